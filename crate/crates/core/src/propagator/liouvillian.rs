//! The generic master-equation generator.
//!
//! Operators are vectorised row-major, `vec(X)[i * d + j] = X[i][j]`. The
//! superoperator is assembled mechanically by applying [`lindblad_rhs`] to every
//! matrix unit, split into a pump-independent part and the part linear in
//! Omega_p(t). Any operand can be restricted to the closure of its support under
//! the generator's sparsity graph; elements outside that closure stay exactly
//! zero, which is what makes the regression chains cheap.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{
    drive_operator, lindblad_set, static_hamiltonian, CollapseOperator, HilbertSpace, OperatorMatrix, SystemParams, C64,
};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// -i[H, rho] - 1/2 sum (L^dag L rho - 2 L rho L^dag + rho L^dag L)
pub fn lindblad_rhs(
    rho: &OperatorMatrix,
    hamiltonian: &OperatorMatrix,
    collapse: &[CollapseOperator],
) -> Result<OperatorMatrix> {
    let d = hamiltonian.nrows();
    for m in std::iter::once(rho).chain(collapse.iter().map(|l| &l.matrix)) {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            });
        }
    }
    let mut out = (hamiltonian * rho - rho * hamiltonian) * (-I);
    for l in collapse {
        let ld = l.matrix.adjoint();
        let ldl = &ld * &l.matrix;
        out += &l.matrix * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0);
    }
    Ok(out)
}

/// Compressed sparse rows over complex values.
#[derive(Clone, Debug, Default)]
pub struct Csr {
    rows: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn from_triplets(rows: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals = Vec::with_capacity(trip.len());
        for &(r, c, v) in &trip {
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    fn column_targets(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows).filter(move |&r| self.row(r).any(|(cc, _)| cc == c))
    }
}

/// Full superoperator L(t) = L_static + Omega_p(t) L_drive.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    fixed: Csr,
    drive: Csr,
}

/// Sorted set of vectorised element indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Support {
    dim: usize,
    indices: Vec<usize>,
}

impl Support {
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let set: BTreeSet<usize> = pairs.into_iter().map(|(i, j)| i * dim + j).collect();
        Self {
            dim,
            indices: set.into_iter().collect(),
        }
    }

    /// Structurally nonzero entries of a matrix.
    pub fn of_matrix(m: &OperatorMatrix) -> Self {
        let d = m.nrows();
        Self::from_pairs(
            d,
            (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .filter(|&(i, j)| m[(i, j)] != C64::new(0.0, 0.0)),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.iter().map(|&k| (k / self.dim, k % self.dim))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.indices.binary_search(&(i * self.dim + j)).is_ok()
    }

    /// Pattern of `a X` for X supported here.
    pub fn left_product(&self, a: &OperatorMatrix) -> Self {
        Self::from_pairs(
            self.dim,
            self.pairs().flat_map(|(j, k)| {
                (0..self.dim)
                    .filter(move |&i| a[(i, j)] != C64::new(0.0, 0.0))
                    .map(move |i| (i, k))
            }),
        )
    }

    /// Pattern of `X b` for X supported here.
    pub fn right_product(&self, b: &OperatorMatrix) -> Self {
        Self::from_pairs(
            self.dim,
            self.pairs().flat_map(|(i, j)| {
                (0..self.dim)
                    .filter(move |&k| b[(j, k)] != C64::new(0.0, 0.0))
                    .map(move |k| (i, k))
            }),
        )
    }
}

impl Liouvillian {
    pub fn new(params: &SystemParams, space: &HilbertSpace) -> Self {
        let d = space.dim();
        let h0 = static_hamiltonian(params, space);
        let hd = drive_operator(space);
        let ls = lindblad_set(params, space);
        let mut fixed = Vec::new();
        let mut drive = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let unit = space.unit(i, j);
                let col = i * d + j;
                let f = lindblad_rhs(&unit, &h0, &ls).expect("shapes agree");
                let g = lindblad_rhs(&unit, &hd, &[]).expect("shapes agree");
                for r in 0..d {
                    for c in 0..d {
                        if f[(r, c)] != C64::new(0.0, 0.0) {
                            fixed.push((r * d + c, col, f[(r, c)]));
                        }
                        if g[(r, c)] != C64::new(0.0, 0.0) {
                            drive.push((r * d + c, col, g[(r, c)]));
                        }
                    }
                }
            }
        }
        Self {
            dim: d,
            fixed: Csr::from_triplets(d * d, fixed),
            drive: Csr::from_triplets(d * d, drive),
        }
    }

    /// Dimension of the underlying Hilbert space (the vectorised length is its square).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.fixed.nnz() + self.drive.nnz()
    }

    /// Smallest support containing `seed` that the generator maps into itself.
    pub fn closure(&self, seed: &Support) -> Support {
        let n = self.dim * self.dim;
        // column -> rows adjacency
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for m in [&self.fixed, &self.drive] {
            for r in 0..n {
                for (c, _) in m.row(r) {
                    adj[c].push(r);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = seed.indices.clone();
        while let Some(k) = stack.pop() {
            if std::mem::replace(&mut seen[k], true) {
                continue;
            }
            stack.extend(adj[k].iter().copied().filter(|&r| !seen[r]));
        }
        Support {
            dim: self.dim,
            indices: (0..n).filter(|&k| seen[k]).collect(),
        }
    }

    /// The generator acting on operands confined to `support`. The support must be
    /// closed (see [`Liouvillian::closure`]); otherwise leaked terms are dropped.
    pub fn restrict(&self, support: &Support) -> Generator {
        let pos = |k: usize| support.indices.binary_search(&k).ok();
        let pick = |m: &Csr| {
            let mut trip = Vec::new();
            for (ri, &r) in support.indices.iter().enumerate() {
                for (c, v) in m.row(r) {
                    if let Some(ci) = pos(c) {
                        trip.push((ri, ci, v));
                    }
                }
            }
            Csr::from_triplets(support.len(), trip)
        };
        Generator {
            support: support.clone(),
            fixed: pick(&self.fixed),
            drive: pick(&self.drive),
        }
    }

    pub fn full(&self) -> Generator {
        self.restrict(&Support {
            dim: self.dim,
            indices: (0..self.dim * self.dim).collect(),
        })
    }

    /// True when no generator entry leads from inside `support` to outside it.
    pub fn is_closed(&self, support: &Support) -> bool {
        support.indices.iter().all(|&c| {
            [&self.fixed, &self.drive]
                .iter()
                .all(|m| m.column_targets(c).all(|r| support.indices.binary_search(&r).is_ok()))
        })
    }
}

/// Right-hand side of a linear ODE dy/dt = A(Omega) y with A affine in the
/// pump amplitude.
pub trait Flow {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn derivative(&self, drive: f64, y: &[C64], dy: &mut [C64]);
}

/// The generator restricted to a closed support.
#[derive(Clone, Debug)]
pub struct Generator {
    support: Support,
    fixed: Csr,
    drive: Csr,
}

impl Generator {
    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn gather(&self, m: &OperatorMatrix) -> Vec<C64> {
        let d = self.support.dim;
        self.support.indices.iter().map(|&k| m[(k / d, k % d)]).collect()
    }

    pub fn scatter(&self, v: &[C64]) -> OperatorMatrix {
        let d = self.support.dim;
        let mut m = OperatorMatrix::zeros(d, d);
        for (&k, &z) in self.support.indices.iter().zip(v) {
            m[(k / d, k % d)] = z;
        }
        m
    }
}

impl Flow for Generator {
    fn len(&self) -> usize {
        self.support.len()
    }

    fn derivative(&self, drive: f64, y: &[C64], dy: &mut [C64]) {
        for (r, out) in dy.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (c, v) in self.fixed.row(r) {
                acc += v * y[c];
            }
            if drive != 0.0 {
                let mut dacc = C64::new(0.0, 0.0);
                for (c, v) in self.drive.row(r) {
                    dacc += v * y[c];
                }
                acc += dacc * drive;
            }
            *out = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, CascadeState, Level, PulsePair};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(d: usize, rng: &mut impl Rng) -> OperatorMatrix {
        let m = OperatorMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn generator_is_trace_free() {
        let s = HilbertSpace::new(2).unwrap();
        let p = SystemParams::default();
        let h = build_hamiltonian(&p, &PulsePair::default(), 10.0, &s);
        let ls = lindblad_set(&p, &s);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let rho = random_hermitian(s.dim(), &mut rng);
            let d = lindblad_rhs(&rho, &h, &ls).unwrap();
            assert!(d.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn metastable_state_is_dark_without_pump() {
        let s = HilbertSpace::new(2).unwrap();
        let p = SystemParams::default();
        let h = build_hamiltonian(&p, &PulsePair::zero(), 0.0, &s);
        let m0 = s.index(Level::Metastable, 0).unwrap();
        let d = lindblad_rhs(&s.unit(m0, m0), &h, &lindblad_set(&p, &s)).unwrap();
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_photon_decay_rate() {
        let s = HilbertSpace::new(2).unwrap();
        let p = SystemParams {
            g1: 0.0,
            g2: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            gamma_d: 0.0,
            delta_p: 0.0,
            delta1: 0.0,
            delta2: 0.0,
            kappa: 2.5,
        };
        let h = build_hamiltonian(&p, &PulsePair::zero(), 0.0, &s);
        let g1 = s.index(Level::Ground, 1).unwrap();
        let g0 = s.index(Level::Ground, 0).unwrap();
        let d = lindblad_rhs(&s.unit(g1, g1), &h, &lindblad_set(&p, &s)).unwrap();
        let mut expect = OperatorMatrix::zeros(12, 12);
        expect[(g1, g1)] = C64::new(-2.5, 0.0);
        expect[(g0, g0)] = C64::new(2.5, 0.0);
        assert!((d - expect).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = HilbertSpace::new(2).unwrap();
        let h = build_hamiltonian(&SystemParams::default(), &PulsePair::zero(), 0.0, &s);
        let rho = OperatorMatrix::zeros(3, 3);
        assert!(lindblad_rhs(&rho, &h, &[]).is_err());
    }

    #[test]
    fn superoperator_matches_dense_rhs() {
        let s = HilbertSpace::new(2).unwrap();
        let p = SystemParams::default();
        let pulses = PulsePair::default();
        let l = Liouvillian::new(&p, &s);
        let full = l.full();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = OperatorMatrix::from_fn(12, 12, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let t = 14.0;
        let dense = lindblad_rhs(&rho, &build_hamiltonian(&p, &pulses, t, &s), &lindblad_set(&p, &s)).unwrap();
        let mut dy = vec![C64::new(0.0, 0.0); 144];
        full.derivative(pulses.envelope(t), &full.gather(&rho), &mut dy);
        assert!((full.scatter(&dy) - dense).norm() < 1e-12);
    }

    #[test]
    fn baseline_closure_is_the_cascade_block() {
        let s = HilbertSpace::new(2).unwrap();
        let l = Liouvillian::new(&SystemParams::default(), &s);
        let m0 = s.cascade_index(CascadeState::M);
        let sup = l.closure(&Support::from_pairs(12, [(m0, m0)]));
        // {m,u,Y,G'}^2 + {y,G}^2 + |g,0><g,0|
        assert_eq!(sup.len(), 21);
        assert!(l.is_closed(&sup));
        let cascade: BTreeSet<usize> = CascadeState::ALL.iter().map(|&c| s.cascade_index(c)).collect();
        assert!(sup.pairs().all(|(i, j)| cascade.contains(&i) && cascade.contains(&j)));
    }
}
