//! Correlators evaluated on the truncated element sets instead of the full
//! superoperator, as an independent check of the lattice engine.
//!
//! The regression operands of the cross chain are carried as their adjoints,
//! which live in the shifted set and obey the same master equation.

use super::engine::{CorrelatorEngine, Lattice};
use crate::error::{Error, Result};
use crate::model::{CascadeState, SystemParams, C64};
use crate::propagator::bloch::{BlochState, ElementSet, PhysicalBloch, ShiftedBloch};
use crate::propagator::{DensityMatrix, Flow, Rk4Workspace};

use CascadeState::{GOne as Gs, GTwo as Gp, GZero as G0, YOne as Ys, YZero as Y0, M, U};

const A_BLOCK: [CascadeState; 4] = [M, U, Ys, Gp];

/// Element-set propagation on a lattice, starting from |m,0><m,0|.
pub struct ElementPath<'a> {
    lattice: &'a Lattice,
    physical: PhysicalBloch,
    shifted: ShiftedBloch,
}

/// Shifted-set states after each stage of the cross chain, plus the result.
#[derive(Clone, Debug)]
pub struct CrossStages {
    pub stages: [BlochState; 3],
    pub value: C64,
}

impl<'a> ElementPath<'a> {
    pub fn new(params: &SystemParams, lattice: &'a Lattice) -> Self {
        Self {
            lattice,
            physical: PhysicalBloch { params: params.clone() },
            shifted: ShiftedBloch { params: params.clone() },
        }
    }

    fn advance(&self, flow: &dyn Flow, s: &mut BlochState, k0: usize, k1: usize) -> Result<()> {
        let mut ws = Rk4Workspace::new(s.values().len());
        self.lattice.advance(flow, s.values_mut(), k0, k1, &mut ws)
    }

    /// Physical state at node `k`.
    pub fn baseline(&self, k: usize) -> Result<BlochState> {
        let mut s = BlochState::zero(ElementSet::Physical);
        s.values_mut()[0] = C64::new(1.0, 0.0);
        self.advance(&self.physical, &mut s, 0, k)?;
        Ok(s)
    }

    /// <a1†(t_s) a2†(t_s + j h) a2(t_s + j h) a1(t_s)>.
    pub fn g2(&self, s: usize, j: usize) -> Result<f64> {
        let rho = self.baseline(s)?;
        let mut x = BlochState::zero(ElementSet::Physical);
        set(&mut x, Y0, Y0, get(&rho, Ys, Ys)?)?;
        self.advance(&self.physical, &mut x, s, s + j)?;
        Ok(get(&x, Gs, Gs)?.re)
    }

    /// The cross correlator with T = `delay` h at inner delay j h >= 0.
    pub fn cross(&self, s: usize, delay: usize, j: usize) -> Result<CrossStages> {
        if j > delay || delay > s {
            return Err(Error::TimeOrdering(format!(
                "need j <= T <= s, got j = {j}, T = {delay}, s = {s}"
            )));
        }
        let r = s - delay;
        let rho = self.baseline(r)?;
        // (rho a1†)_{i,y} = rho_{i,Y}
        let mut x1 = BlochState::zero(ElementSet::Shifted);
        for i in A_BLOCK {
            set(&mut x1, i, Y0, get(&rho, i, Ys)?)?;
        }
        self.advance(&self.shifted, &mut x1, r, r + j)?;
        // (x a2†)_{i,g} = x_{i,G}
        let mut x2 = BlochState::zero(ElementSet::Shifted);
        for i in A_BLOCK {
            set(&mut x2, i, G0, get(&x1, i, Gs)?)?;
        }
        self.advance(&self.shifted, &mut x2, r + j, s)?;
        // (a1 x)_{y,g} = x_{Y,g}
        let mut x3 = BlochState::zero(ElementSet::Shifted);
        set(&mut x3, Y0, G0, get(&x2, Ys, G0)?)?;
        self.advance(&self.shifted, &mut x3, s, s + j)?;
        let value = get(&x3, Gs, G0)?.conj();
        Ok(CrossStages {
            stages: [x1, x2, x3],
            value,
        })
    }
}

fn get(s: &BlochState, r: CascadeState, c: CascadeState) -> Result<C64> {
    s.get(r, c)
        .ok_or_else(|| Error::MissingElement(format!("{}{}", r.label(), c.label())))
}

fn set(s: &mut BlochState, r: CascadeState, c: CascadeState, v: C64) -> Result<()> {
    let (k, conj) = s
        .set()
        .locate(r, c)
        .ok_or_else(|| Error::MissingElement(format!("{}{}", r.label(), c.label())))?;
    s.values_mut()[k] = if conj { v.conj() } else { v };
    Ok(())
}

/// The same three adjoint operands propagated by the generic engine, read
/// back into the shifted set.
pub fn generic_cross_stages(engine: &CorrelatorEngine, s: usize, delay: usize, j: usize) -> Result<CrossStages> {
    if j > delay || delay > s {
        return Err(Error::TimeOrdering(format!(
            "need j <= T <= s, got j = {j}, T = {delay}, s = {s}"
        )));
    }
    let space = engine.space();
    let a1 = super::ModeOperator::new(super::Mode::A1, space).matrix;
    let a2 = super::ModeOperator::new(super::Mode::A2, space).matrix;
    let r = s - delay;
    let x1 = engine.baseline(r)? * a1.adjoint();
    let x1 = engine.propagate(&x1, r, r + j)?;
    let x2 = engine.propagate(&(&x1 * a2.adjoint()), r + j, s)?;
    let x3 = engine.propagate(&(&a1 * &x2), s, s + j)?;
    let value = (&a2 * &x3).trace().conj();
    let read = |m: crate::model::OperatorMatrix| {
        BlochState::from_density(ElementSet::Shifted, &DensityMatrix::new(space.clone(), m, false)?)
    };
    Ok(CrossStages {
        stages: [read(x1)?, read(x2)?, read(x3)?],
        value,
    })
}

/// Largest element-wise difference across all stages.
pub fn max_stage_difference(a: &CrossStages, b: &CrossStages) -> f64 {
    a.stages
        .iter()
        .zip(&b.stages)
        .flat_map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| (p - q).norm()))
        .fold((a.value - b.value).norm(), f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HilbertSpace, PulsePair};
    use crate::propagator::StepperConfig;
    use crate::regression::EngineOptions;

    #[test]
    fn element_path_matches_engine() {
        let pulses = PulsePair::default();
        let space = HilbertSpace::new(2).unwrap();
        let p = SystemParams::default();
        let lat = Lattice::new(&pulses, pulses.tau_p / 4.0, StepperConfig::default().dt, 70).unwrap();
        let engine = CorrelatorEngine::new(&space, &p, lat.clone(), EngineOptions::default()).unwrap();
        let path = ElementPath::new(&p, &lat);
        let (s, t, j) = (40, 30, 3);
        let a = path.cross(s, t, j).unwrap();
        let b = generic_cross_stages(&engine, s, t, j).unwrap();
        assert!(max_stage_difference(&a, &b) < 1e-12);
        assert!(a.value.norm() > 1e-6);
        let row = engine.cross_row(s, t, j).unwrap();
        assert!((row[j] - b.value).norm() < 1e-14);
        let g = path.g2(8, 2).unwrap();
        assert!((g - engine.g2_row(8, 2).unwrap()[2].re).abs() < 1e-12);
    }
}
