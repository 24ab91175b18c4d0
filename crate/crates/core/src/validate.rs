//! Self-checks run by `timebin validate`: physicality of the reference run,
//! agreement between independent propagation paths, convergence order and
//! degenerate limits.

use std::f64::consts::PI;
use std::io::Write;

use crate::analysis::{central_components, population_run, pulse_probabilities};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{CascadeState, HilbertSpace, PulsePair, SystemParams, C64};
use crate::propagator::bloch::{BlochState, ElementSet};
use crate::propagator::{evolve, integrate, populations, DensityMatrix, Method, StepperConfig, Trajectory};
use crate::regression::element_path::{generic_cross_stages, max_stage_difference, ElementPath};
use crate::regression::{four_time_cross, two_time_g2, CorrelatorEngine, EngineOptions, Lattice};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// The measured quantity, when the check got that far.
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|c| c.value)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(w, "{}={} {}", c.name, verdict, c.detail)?;
        }
        Ok(())
    }
}

/// Measured value against a bound; errors count as failures.
fn check(name: &'static str, value: Result<f64>, ok: impl Fn(f64) -> bool, bound: &str) -> CheckResult {
    match value {
        Ok(v) => CheckResult {
            name,
            passed: ok(v),
            value: Some(v),
            detail: format!("value={v:e} bound={bound}"),
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            value: None,
            detail: format!("error: {e}"),
        },
    }
}

fn reference_run(cfg: &RunConfig, stepper: &StepperConfig, max_photons: usize) -> Result<Trajectory> {
    let space = HilbertSpace::new(max_photons)?;
    let rho0 = DensityMatrix::basis_state(&space, space.cascade_index(CascadeState::M));
    evolve(&rho0, 0.0, cfg.analysis.horizon, &cfg.system, &cfg.pulses, stepper)
}

fn states(traj: &Trajectory) -> Vec<&DensityMatrix> {
    (0..traj.len()).filter_map(|k| traj.state(k)).collect()
}

fn max_abs(a: impl Iterator<Item = f64>) -> f64 {
    a.fold(0.0, |m, x| {
        if x.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(x.abs())
        }
    })
}

/// Largest |Δ| over all matrix elements of two runs sampled at the same times.
fn run_difference(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let (sa, sb) = (states(a), states(b));
    if sa.len() != sb.len() {
        return Err(Error::Grid(format!(
            "runs recorded {} and {} samples",
            sa.len(),
            sb.len()
        )));
    }
    Ok(max_abs(sa.iter().zip(&sb).map(|(x, y)| {
        (x.matrix() - y.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    })))
}

fn bloch_difference(cfg: &RunConfig, generic: &Trajectory) -> Result<f64> {
    let rho0 = generic.state(0).ok_or_else(|| Error::Grid("empty run".into()))?;
    let mut s = BlochState::from_density(ElementSet::Physical, rho0)?;
    let flow = s.flow(&cfg.system);
    let mut samples: Vec<Vec<C64>> = Vec::new();
    let y = s.values_mut();
    integrate(
        flow.as_ref(),
        |t| cfg.pulses.envelope(t),
        y,
        0.0,
        cfg.analysis.horizon,
        &cfg.stepper,
        |_, v| samples.push(v.to_vec()),
    )?;
    let reference = states(generic);
    if samples.len() != reference.len() {
        return Err(Error::Grid(format!(
            "element run recorded {} samples, generic run {}",
            samples.len(),
            reference.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for (v, rho) in samples.iter().zip(reference) {
        let g = BlochState::from_density(ElementSet::Physical, rho)?;
        for (p, q) in v.iter().zip(g.values()) {
            let d = (p - q).norm();
            if d.is_nan() {
                return Ok(f64::NAN);
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Observed RK4 order on ρ_YY(t) = exp(-κ t) with steps 4dt, 2dt, dt.
/// Returns the slope furthest from 4.
pub fn rk4_order(kappa: f64, dt: f64) -> Result<f64> {
    let params = SystemParams {
        g1: 0.0,
        g2: 0.0,
        kappa,
        gamma1: 0.0,
        gamma2: 0.0,
        gamma_d: 0.0,
        ..SystemParams::default()
    };
    let space = HilbertSpace::new(2)?;
    let y1 = space.cascade_index(CascadeState::YOne);
    let rho0 = DensityMatrix::basis_state(&space, y1);
    let t_end = (3.0 / (4.0 * dt)).ceil().max(1.0) * 4.0 * dt;
    let exact = (-kappa * t_end).exp();
    let err = |h: f64| -> Result<f64> {
        let cfg = StepperConfig {
            method: Method::Rk4,
            dt: h,
            record_stride: usize::MAX,
            ..StepperConfig::default()
        };
        let traj = evolve(&rho0, 0.0, t_end, &params, &PulsePair::zero(), &cfg)?;
        let last = traj.last_state().ok_or_else(|| Error::Grid("empty run".into()))?;
        Ok((last.get(y1, y1).re - exact).abs())
    };
    let e = [err(4.0 * dt)?, err(2.0 * dt)?, err(dt)?];
    let slopes = [(e[0] / e[1]).log2(), (e[1] / e[2]).log2()];
    Ok(if (slopes[0] - 4.0).abs() > (slopes[1] - 4.0).abs() {
        slopes[0]
    } else {
        slopes[1]
    })
}

fn nodes(x: f64, step: f64) -> usize {
    (x / step).round().max(0.0) as usize
}

/// Element-path vs generic cross chain at one (t′, τ, τ′) per G³ peak.
fn element_path_difference(cfg: &RunConfig, fast: bool) -> Result<f64> {
    let step = cfg.step(fast);
    let k = nodes(cfg.pulses.center1, step);
    let nt = nodes(cfg.g3.delay, step);
    let j = nodes(cfg.pulses.tau_p / 2.0, step).max(1);
    let lattice = Lattice::new(&cfg.pulses, step, cfg.stepper.dt, k + nt + j + 1)?;
    let space = HilbertSpace::new(cfg.hilbert.max_photons)?;
    let engine = CorrelatorEngine::new(&space, &cfg.system, lattice.clone(), EngineOptions::default())?;
    let path = ElementPath::new(&cfg.system, &lattice);
    let early = (path.g2(k, j)? - engine.g2_row(k, j)?[j].re).abs();
    let central = max_stage_difference(
        &path.cross(k + nt, nt, j)?,
        &generic_cross_stages(&engine, k + nt, nt, j)?,
    );
    let late = (path.g2(k + nt, j)? - engine.g2_row(k + nt, j)?[j].re).abs();
    Ok(max_abs([early, central, late].into_iter()))
}

fn cross_vs_g2(cfg: &RunConfig) -> Result<f64> {
    let space = HilbertSpace::new(cfg.hilbert.max_photons)?;
    let mut worst: f64 = 0.0;
    for (t, tau) in [
        (cfg.pulses.center1, 0.5 * cfg.pulses.tau_p),
        (cfg.pulses.center2, 0.25 * cfg.pulses.tau_p),
    ] {
        let g = two_time_g2(t, tau, &space, &cfg.system, &cfg.pulses, &cfg.stepper)?;
        let c = four_time_cross(t, tau, 0.0, &space, &cfg.system, &cfg.pulses, &cfg.stepper)?;
        worst = worst.max((c - C64::new(g, 0.0)).norm() / g.abs().max(1e-300));
    }
    Ok(worst)
}

fn phase_symmetry(cfg: &RunConfig, fast: bool) -> Result<f64> {
    let c = central_components(&cfg.scenario(fast)?)?;
    let mut worst: f64 = 0.0;
    for phi in [0.0, 0.4, 1.3] {
        let a = c.grid(phi)?.values;
        for other in [-phi, phi + PI] {
            let b = c.grid(other)?.values;
            worst = worst.max(max_abs(a.iter().zip(&b).map(|(x, y)| x - y)));
        }
    }
    Ok(worst)
}

fn cache_consistency(cfg: &RunConfig, fast: bool) -> Result<f64> {
    let step = cfg.step(fast);
    let k = nodes(cfg.pulses.center1, step);
    let nt = nodes(cfg.g3.delay, step);
    let nb = nodes(cfg.g3.t_bin, step);
    let lattice = Lattice::new(&cfg.pulses, step, cfg.stepper.dt, k + nt + nb + 1)?;
    let space = HilbertSpace::new(cfg.hilbert.max_photons)?;
    let rows = |cache_baseline| -> Result<Vec<C64>> {
        let e = CorrelatorEngine::new(&space, &cfg.system, lattice.clone(), EngineOptions { cache_baseline })?;
        let mut out = e.g2_row(k, nb)?;
        out.extend(e.cross_row(k + nt, nt, nb)?);
        Ok(out)
    };
    let (a, b) = (rows(true)?, rows(false)?);
    Ok(a.iter().zip(&b).filter(|(x, y)| x != y).count() as f64)
}

fn no_coupling_g2(cfg: &RunConfig) -> Result<f64> {
    let params = SystemParams {
        g1: 0.0,
        g2: 0.0,
        ..cfg.system.clone()
    };
    let space = HilbertSpace::new(cfg.hilbert.max_photons)?;
    let mut worst: f64 = 0.0;
    for t in [cfg.pulses.center1, cfg.pulses.center2] {
        worst = worst.max(two_time_g2(t, cfg.pulses.tau_p, &space, &params, &cfg.pulses, &cfg.stepper)?.abs());
    }
    Ok(worst)
}

fn no_pump_transfer(cfg: &RunConfig) -> Result<f64> {
    let pulses = PulsePair {
        amp1: 0.0,
        amp2: 0.0,
        ..cfg.pulses.clone()
    };
    let traj = population_run(
        cfg.hilbert.max_photons,
        &cfg.system,
        &pulses,
        &cfg.stepper,
        cfg.analysis.horizon,
    )?;
    let r = pulse_probabilities(&populations(&traj)?, &pulses, cfg.analysis.plateau_threshold)?;
    Ok(r.p1.abs().max(r.p2.abs()))
}

/// Runs every check; individual failures are recorded, not returned.
pub fn run_validation(cfg: &RunConfig, fast: bool) -> ValidationReport {
    let mut checks = Vec::new();
    let run1 = reference_run(cfg, &cfg.stepper, cfg.hilbert.max_photons);
    let over_run = |f: &dyn Fn(&DensityMatrix) -> f64| -> Result<f64> {
        match &run1 {
            Ok(t) => Ok(max_abs(states(t).into_iter().map(f))),
            Err(e) => Err(Error::Numerical(format!("reference run failed: {e}"))),
        }
    };
    checks.push(check(
        "run1_trace",
        over_run(&|r| (r.trace() - C64::new(1.0, 0.0)).norm()),
        |v| v < 1e-6,
        "1e-6",
    ));
    checks.push(check(
        "run1_hermiticity",
        over_run(&|r| r.physicality().hermiticity_defect),
        |v| v < 1e-9,
        "1e-9",
    ));
    let min_eig = match &run1 {
        Ok(t) => Ok(states(t)
            .into_iter()
            .map(|r| r.physicality().min_eigenvalue)
            .fold(f64::INFINITY, |m, x| if x.is_nan() { f64::NAN } else { m.min(x) })),
        Err(e) => Err(Error::Numerical(format!("reference run failed: {e}"))),
    };
    checks.push(check("run1_min_eigenvalue", min_eig, |v| v > -1e-7, "-1e-7"));

    let g_two = cfg.analysis.g_two_bound;
    let g_two_max = run1.as_ref().map_err(|e| Error::Numerical(e.to_string())).map(|t| {
        let i = t.space().cascade_index(CascadeState::GTwo);
        max_abs(states(t).into_iter().map(|r| r.get(i, i).re))
    });
    checks.push(check(
        "cutoff_population",
        g_two_max,
        |v| v < g_two,
        &format!("{g_two:e}"),
    ));

    let bloch = run1
        .as_ref()
        .map_err(|e| Error::Numerical(e.to_string()))
        .and_then(|t| bloch_difference(cfg, t));
    checks.push(check("bloch_vs_generic", bloch, |v| v < 1e-7, "1e-7"));

    let halving_bound = 10.0 * cfg.stepper.rel_tol;
    let halved = StepperConfig {
        dt: cfg.stepper.dt / 2.0,
        record_stride: cfg.stepper.record_stride * 2,
        ..cfg.stepper.clone()
    };
    let halving = run1
        .as_ref()
        .map_err(|e| Error::Numerical(e.to_string()))
        .and_then(|t| {
            let fine = reference_run(cfg, &halved, cfg.hilbert.max_photons)?;
            run_difference(t, &fine)
        });
    checks.push(check(
        "dt_halving",
        halving,
        |v| v < halving_bound,
        &format!("{halving_bound:e}"),
    ));

    checks.push(check(
        "rk4_order",
        rk4_order(cfg.system.kappa.max(1e-3), cfg.stepper.dt),
        |v| (v - 4.0).abs() <= 0.3,
        "4+-0.3",
    ));

    let cutoff = run1
        .as_ref()
        .map_err(|e| Error::Numerical(e.to_string()))
        .and_then(|t| {
            let bigger = reference_run(cfg, &cfg.stepper, cfg.hilbert.max_photons + 1)?;
            let (a, b) = (populations(t)?, populations(&bigger)?);
            Ok(max_abs(
                [
                    (&a.metastable, &b.metastable),
                    (&a.biexciton, &b.biexciton),
                    (&a.ground, &b.ground),
                    (&a.y_one, &b.y_one),
                    (&a.g_two, &b.g_two),
                ]
                .into_iter()
                .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| p - q)),
            ))
        });
    checks.push(check("cutoff_doubling", cutoff, |v| v < 1e-7, "1e-7"));

    checks.push(check(
        "cross_at_zero_delay",
        cross_vs_g2(cfg),
        |v| v < 1e-10,
        "1e-10 relative",
    ));
    checks.push(check("phase_symmetry", phase_symmetry(cfg, fast), |v| v < 1e-9, "1e-9"));
    checks.push(check(
        "element_path",
        element_path_difference(cfg, fast),
        |v| v < 1e-7,
        "1e-7",
    ));
    checks.push(check(
        "cache_consistency",
        cache_consistency(cfg, fast),
        |v| v == 0.0,
        "0 differing entries",
    ));
    checks.push(check("no_coupling_g2", no_coupling_g2(cfg), |v| v < 1e-15, "1e-15"));
    checks.push(check("no_pump_transfer", no_pump_transfer(cfg), |v| v < 1e-12, "1e-12"));
    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_order_is_four() {
        let s = rk4_order(2.5, StepperConfig::default().dt).unwrap();
        assert!((s - 4.0).abs() < 0.3, "{s}");
        let bad = rk4_order(2.5, 5.0).unwrap();
        assert!(!((bad - 4.0).abs() <= 0.3), "{bad}");
    }

    #[test]
    fn default_config_passes() {
        let report = run_validation(&RunConfig::default(), true);
        let mut text = Vec::new();
        report.write(&mut text).unwrap();
        assert!(report.passed(), "{}", String::from_utf8(text).unwrap());
        assert_eq!(report.checks.len(), 14);
    }

    #[test]
    fn huge_step_fails() {
        let mut cfg = RunConfig::default();
        cfg.stepper.dt = 5.0;
        let report = run_validation(&cfg, true);
        assert!(!report.passed());
        assert!(!report.get("rk4_order").unwrap().passed);
    }
}
