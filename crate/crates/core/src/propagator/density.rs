use crate::error::{Error, Result};
use crate::model::{HilbertSpace, OperatorMatrix, C64};

/// A density matrix, or a non-Hermitian regression intermediate built from one.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: OperatorMatrix,
    hermitian_expected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalityReport {
    pub trace: C64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl PhysicalityReport {
    /// Trace real and within [0, 1 + 1e-9], Hermitian to 1e-9, eigenvalues above -1e-8.
    pub fn is_physical(&self) -> bool {
        self.trace.im.abs() < 1e-9
            && self.trace.re >= -1e-9
            && self.trace.re <= 1.0 + 1e-9
            && self.hermiticity_defect < 1e-9
            && self.min_eigenvalue > -1e-8
    }
}

impl DensityMatrix {
    pub fn new(space: HilbertSpace, matrix: OperatorMatrix, hermitian_expected: bool) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            space,
            matrix,
            hermitian_expected,
        })
    }

    /// Pure state |i><i| for a basis index.
    pub fn basis_state(space: &HilbertSpace, index: usize) -> Self {
        Self {
            matrix: space.unit(index, index),
            space: space.clone(),
            hermitian_expected: true,
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> OperatorMatrix {
        self.matrix
    }

    pub fn hermitian_expected(&self) -> bool {
        self.hermitian_expected
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn physicality(&self) -> PhysicalityReport {
        let hermiticity_defect = crate::model::hermiticity_defect(&self.matrix);
        let sym = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let min_eigenvalue = sym
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        PhysicalityReport {
            trace: self.trace(),
            hermiticity_defect,
            min_eigenvalue,
        }
    }

    /// Checks the invariants appropriate to this matrix's kind. Regression
    /// intermediates only carry the shape invariant, which holds by construction.
    pub fn check(&self) -> Result<()> {
        if !self.hermitian_expected {
            return Ok(());
        }
        let r = self.physicality();
        if r.is_physical() {
            Ok(())
        } else {
            Err(Error::Numerical(format!("unphysical density matrix: {r:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Level;

    #[test]
    fn pure_state_is_physical() {
        let s = HilbertSpace::new(2).unwrap();
        let rho = DensityMatrix::basis_state(&s, s.index(Level::Metastable, 0).unwrap());
        let r = rho.physicality();
        assert!(r.is_physical());
        assert!((r.min_eigenvalue - 0.0).abs() < 1e-12);
        assert!(rho.check().is_ok());
    }

    #[test]
    fn negative_eigenvalue_detected() {
        let s = HilbertSpace::new(2).unwrap();
        let mut m = s.unit(0, 0) * C64::new(1.1, 0.0);
        m[(1, 1)] = C64::new(-0.1, 0.0);
        let rho = DensityMatrix::new(s, m, true).unwrap();
        assert!(rho.check().is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let s = HilbertSpace::new(2).unwrap();
        let m = OperatorMatrix::zeros(5, 5);
        assert!(matches!(
            DensityMatrix::new(s, m, true),
            Err(Error::DimensionMismatch { expected: 12, got: 5 })
        ));
    }
}
