//! Master-equation propagation along two independent routes: the generic
//! superoperator built from the Hamiltonian and collapse operators, and the
//! hand-written element equations of [`bloch`].

pub mod bloch;
mod density;
mod liouvillian;
mod stepper;
mod trajectory;

pub use density::{DensityMatrix, PhysicalityReport};
pub use liouvillian::{lindblad_rhs, Csr, Flow, Generator, Liouvillian, Support};
pub use stepper::{integrate, rk4_step, Method, Rk4Workspace, StepperConfig};
pub use trajectory::{population_pairs, populations, PopulationSeries, Recording, Samples, Trajectory};

use crate::error::{Error, Result};
use crate::model::{PulsePair, SystemParams};

/// Evolves `rho0` from `t0` to `t1` under the generic generator, recording full
/// states every `stepper.record_stride` steps.
pub fn evolve(
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    params: &SystemParams,
    pulses: &PulsePair,
    stepper: &StepperConfig,
) -> Result<Trajectory> {
    evolve_recording(rho0, t0, t1, params, pulses, stepper, &Recording::Full)
}

pub fn evolve_recording(
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    params: &SystemParams,
    pulses: &PulsePair,
    stepper: &StepperConfig,
    recording: &Recording,
) -> Result<Trajectory> {
    let liouvillian = Liouvillian::new(params, rho0.space());
    evolve_with(&liouvillian, rho0, t0, t1, pulses, stepper, recording)
}

/// As [`evolve_recording`] with a prebuilt generator.
pub fn evolve_with(
    liouvillian: &Liouvillian,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    pulses: &PulsePair,
    stepper: &StepperConfig,
    recording: &Recording,
) -> Result<Trajectory> {
    stepper.validate()?;
    if t1 < t0 {
        return Err(Error::TimeOrdering(format!("evolve: t1 = {t1} < t0 = {t0}")));
    }
    let space = rho0.space().clone();
    if liouvillian.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: liouvillian.dim(),
        });
    }
    if let Recording::Elements(pairs) = recording {
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= space.dim() || j >= space.dim()) {
            return Err(Error::MissingElement(format!("({i},{j}) outside the basis")));
        }
    }
    let generator = liouvillian.restrict(&liouvillian.closure(&Support::of_matrix(rho0.matrix())));
    let mut y = generator.gather(rho0.matrix());
    let hermitian = rho0.hermitian_expected();
    let mut times = Vec::new();
    let mut full = Vec::new();
    let mut elems = Vec::new();
    integrate(
        &generator,
        |t| pulses.envelope(t),
        &mut y,
        t0,
        t1,
        stepper,
        |t, v| {
            times.push(t);
            let m = generator.scatter(v);
            match recording {
                Recording::Full => {
                    full.push(DensityMatrix::new(space.clone(), m, hermitian).expect("shape from space"))
                }
                Recording::Elements(pairs) => elems.push(pairs.iter().map(|&(i, j)| m[(i, j)]).collect()),
            }
        },
    )?;
    let samples = match recording {
        Recording::Full => Samples::Full(full),
        Recording::Elements(pairs) => Samples::Elements {
            pairs: pairs.clone(),
            values: elems,
        },
    };
    Ok(Trajectory::new(space, times, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HilbertSpace, Level, C64};

    fn decay_only() -> SystemParams {
        SystemParams {
            g1: 0.0,
            g2: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            gamma_d: 0.0,
            delta_p: 0.0,
            delta1: 0.0,
            delta2: 0.0,
            kappa: 2.5,
        }
    }

    #[test]
    fn dark_state_unchanged() {
        let s = HilbertSpace::new(2).unwrap();
        let p = SystemParams {
            g1: 0.0,
            g2: 0.0,
            ..SystemParams::default()
        };
        let rho = DensityMatrix::basis_state(&s, s.index(Level::Metastable, 0).unwrap());
        let traj = evolve(&rho, 0.0, 10.0, &p, &PulsePair::zero(), &StepperConfig::default()).unwrap();
        let last = traj.last_state().unwrap();
        assert_eq!((last.matrix() - rho.matrix()).norm(), 0.0);
        assert_eq!(*traj.times().last().unwrap(), 10.0);
    }

    #[test]
    fn single_photon_decay_is_exponential() {
        let s = HilbertSpace::new(2).unwrap();
        let g1 = s.index(Level::Ground, 1).unwrap();
        let rho = DensityMatrix::basis_state(&s, g1);
        let traj = evolve(
            &rho,
            0.0,
            3.0,
            &decay_only(),
            &PulsePair::zero(),
            &StepperConfig::default(),
        )
        .unwrap();
        // RK4 reproduces the exponential to fourth order; compare against its
        // exact per-step amplification instead.
        let cfg = StepperConfig::default();
        let n = (3.0 / cfg.dt).ceil();
        let h = 3.0 / n;
        let z = -2.5 * h;
        let amp = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        for (k, &t) in traj.times().iter().enumerate() {
            let p = traj.element(k, g1, g1).unwrap().re;
            let steps = (t / h).round() as i32;
            assert!((p - amp.powi(steps)).abs() < 1e-12, "t={t}");
            assert!((p - (-2.5 * t).exp()).abs() < 1e-5, "t={t}");
        }
    }

    #[test]
    fn element_recording_matches_full() {
        let s = HilbertSpace::new(2).unwrap();
        let rho = DensityMatrix::basis_state(&s, s.index(Level::Metastable, 0).unwrap());
        let p = SystemParams::default();
        let pulses = PulsePair::default();
        let cfg = StepperConfig::default();
        let pairs = population_pairs(&s);
        let a = evolve(&rho, 0.0, 20.0, &p, &pulses, &cfg).unwrap();
        let b = evolve_recording(&rho, 0.0, 20.0, &p, &pulses, &cfg, &Recording::Elements(pairs.clone())).unwrap();
        assert_eq!(a.times(), b.times());
        for k in 0..a.len() {
            for &(i, j) in &pairs {
                assert_eq!(a.element(k, i, j), b.element(k, i, j));
            }
        }
        let mut csv = Vec::new();
        b.write_csv(&mut csv, &pairs).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("time,rho_m0_m0,"));
        assert_eq!(text.lines().count(), b.len() + 1);
    }

    #[test]
    fn linearity_on_non_hermitian_operands() {
        let s = HilbertSpace::new(2).unwrap();
        let p = SystemParams::default();
        let pulses = PulsePair::default();
        let cfg = StepperConfig::default();
        let m0 = s.index(Level::Metastable, 0).unwrap();
        let y1 = s.index(Level::Exciton, 1).unwrap();
        let a = DensityMatrix::new(s.clone(), s.unit(m0, y1), false).unwrap();
        let b = DensityMatrix::new(s.clone(), s.unit(m0, m0), true).unwrap();
        let (alpha, beta) = (C64::new(0.3, -1.2), C64::new(-0.7, 0.4));
        let mix = DensityMatrix::new(s.clone(), a.matrix() * alpha + b.matrix() * beta, false).unwrap();
        let run = |r: &DensityMatrix| {
            evolve(r, 5.0, 25.0, &p, &pulses, &cfg)
                .unwrap()
                .last_state()
                .unwrap()
                .matrix()
                .clone()
        };
        let lhs = run(&mix);
        let rhs = run(&a) * alpha + run(&b) * beta;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn adaptive_agrees_with_rk4() {
        let s = HilbertSpace::new(2).unwrap();
        let rho = DensityMatrix::basis_state(&s, s.index(Level::Metastable, 0).unwrap());
        let p = SystemParams::default();
        let pulses = PulsePair::default();
        let fixed = evolve(&rho, 0.0, 30.0, &p, &pulses, &StepperConfig::default()).unwrap();
        let adaptive = StepperConfig {
            method: Method::Adaptive,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..StepperConfig::default()
        };
        let adapt = evolve(&rho, 0.0, 30.0, &p, &pulses, &adaptive).unwrap();
        let d = fixed.last_state().unwrap().matrix() - adapt.last_state().unwrap().matrix();
        assert!(d.norm() < 1e-7, "{}", d.norm());
    }
}
