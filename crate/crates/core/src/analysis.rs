//! Physics read off the correlators: central-peak weight, interference
//! visibility, dephasing and delay scans, and pulse transfer probabilities.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{HilbertSpace, PulsePair, SystemParams};
use crate::propagator::{
    evolve_recording, population_pairs, DensityMatrix, PopulationSeries, Recording, StepperConfig, Trajectory,
};
use crate::quadrature::trapezoid_window;
use crate::regression::{g3_components, CorrelationGrid, G3Components, Scenario};

/// P_c = integral of G³ over [T - T_bin, T + T_bin].
pub fn integrate_central_peak(grid: &CorrelationGrid, delay: f64, t_bin: f64) -> Result<f64> {
    let p = trapezoid_window(grid.tau(), &grid.values, delay - t_bin, delay + t_bin)?;
    if p < -1e-9 {
        return Err(Error::Numerical(format!("central peak integral {p:e} is negative")));
    }
    Ok(p.max(0.0))
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

/// Least-squares fit of A + B cos 2φ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineFit {
    pub a: f64,
    pub b: f64,
    /// Largest |P_c - fit| relative to A.
    pub max_residual: f64,
}

impl CosineFit {
    pub fn ratio(&self) -> f64 {
        self.b / self.a
    }
}

fn check_phases(phi: &[f64], pc: &[f64]) -> Result<()> {
    if phi.len() != pc.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            got: pc.len(),
        });
    }
    if phi.len() < 4 {
        return Err(Error::Grid(format!(
            "visibility needs at least 4 phases, got {}",
            phi.len()
        )));
    }
    let lo = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < PI / 2.0 - 1e-12 {
        return Err(Error::Grid(format!("phases span {} < pi/2", hi - lo)));
    }
    Ok(())
}

/// V = (max - min) / (max + min).
pub fn visibility(phi: &[f64], pc: &[f64]) -> Result<f64> {
    check_phases(phi, pc)?;
    let max = pc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = pc.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max + min > 0.0) {
        return Err(Error::DegenerateSignal(max + min));
    }
    Ok((max - min) / (max + min))
}

pub fn fit_cosine(phi: &[f64], pc: &[f64]) -> Result<CosineFit> {
    check_phases(phi, pc)?;
    let n = phi.len() as f64;
    let c: Vec<f64> = phi.iter().map(|p| (2.0 * p).cos()).collect();
    let (sc, scc) = (c.iter().sum::<f64>(), c.iter().map(|x| x * x).sum::<f64>());
    let sy: f64 = pc.iter().sum();
    let scy: f64 = c.iter().zip(pc).map(|(x, y)| x * y).sum();
    let det = n * scc - sc * sc;
    if det.abs() < 1e-12 * n * n {
        return Err(Error::Grid("phases do not resolve cos(2 phi)".into()));
    }
    let a = (scc * sy - sc * scy) / det;
    let b = (n * scy - sc * sy) / det;
    if !(a > 0.0) {
        return Err(Error::DegenerateSignal(2.0 * a));
    }
    let max_residual = c.iter().zip(pc).map(|(x, y)| (y - a - b * x).abs()).fold(0.0, f64::max) / a;
    Ok(CosineFit { a, b, max_residual })
}

/// `points` evenly spaced phases on [0, π].
pub fn phase_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| PI * i as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityResult {
    pub phi_grid: Vec<f64>,
    pub p_c: Vec<f64>,
    pub visibility: f64,
    pub fit: CosineFit,
    pub gamma_d: f64,
    pub delay: f64,
}

impl VisibilityResult {
    pub fn from_samples(phi_grid: Vec<f64>, p_c: Vec<f64>, gamma_d: f64, delay: f64) -> Result<Self> {
        let visibility = visibility(&phi_grid, &p_c)?;
        let fit = fit_cosine(&phi_grid, &p_c)?;
        Ok(Self {
            phi_grid,
            p_c,
            visibility,
            fit,
            gamma_d,
            delay,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# visibility = {:e}", self.visibility)?;
        writeln!(w, "# fit_a = {:e}", self.fit.a)?;
        writeln!(w, "# fit_b = {:e}", self.fit.b)?;
        writeln!(w, "# fit_max_residual = {:e}", self.fit.max_residual)?;
        writeln!(w, "phi,p_c")?;
        for (p, v) in self.phi_grid.iter().zip(&self.p_c) {
            writeln!(w, "{p:e},{v:e}")?;
        }
        Ok(())
    }
}

/// P_c(φ) on `phi_grid` from precomputed components.
pub fn visibility_from_components(c: &G3Components, phi_grid: &[f64], gamma_d: f64) -> Result<VisibilityResult> {
    let (delay, t_bin) = (c.request.delay, c.request.t_bin);
    let p_c = phi_grid
        .iter()
        .map(|&phi| integrate_central_peak(&c.grid(phi)?, delay, t_bin))
        .collect::<Result<Vec<_>>>()?;
    VisibilityResult::from_samples(phi_grid.to_vec(), p_c, gamma_d, delay)
}

/// Components restricted to the central window, shared by all phases.
pub fn central_components(sc: &Scenario) -> Result<G3Components> {
    let sc = Scenario {
        request: sc.request.central_window(),
        ..sc.clone()
    };
    g3_components(&sc)
}

pub fn phase_sweep(sc: &Scenario, phi_grid: &[f64]) -> Result<VisibilityResult> {
    check_phases(phi_grid, phi_grid)?;
    visibility_from_components(&central_components(sc)?, phi_grid, sc.params.gamma_d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub parameter: String,
    pub values: Vec<f64>,
    pub results: Vec<VisibilityResult>,
}

impl SweepResult {
    pub fn visibilities(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.visibility).collect()
    }

    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.visibilities().windows(2).all(|w| w[1] <= w[0] + slack)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{},visibility,fit_ratio,fit_max_residual", self.parameter)?;
        for (v, r) in self.values.iter().zip(&self.results) {
            writeln!(
                w,
                "{v:e},{:e},{:e},{:e}",
                r.visibility,
                r.fit.ratio(),
                r.fit.max_residual
            )?;
        }
        Ok(())
    }
}

/// One phase sweep per dephasing rate, everything else from `base`.
pub fn sweep_dephasing(gamma_d: &[f64], base: &Scenario, phi_grid: &[f64]) -> Result<SweepResult> {
    if gamma_d.is_empty() {
        return Err(Error::Grid("empty gamma_d list".into()));
    }
    if gamma_d.iter().any(|&g| !(g >= 0.0)) || gamma_d.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("gamma_d", "values must be >= 0 and ascending"));
    }
    check_phases(phi_grid, phi_grid)?;
    let results = gamma_d
        .par_iter()
        .map(|&g| {
            let sc = Scenario {
                params: SystemParams {
                    gamma_d: g,
                    ..base.params.clone()
                },
                ..base.clone()
            };
            let r = phase_sweep(&sc, phi_grid);
            if let Ok(r) = &r {
                log::info!("dephasing sweep: gamma_d = {g} -> V = {:.4}", r.visibility);
            }
            r
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        parameter: "gamma_d".into(),
        values: gamma_d.to_vec(),
        results,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalDelay {
    pub best: f64,
    pub candidates: Vec<f64>,
    /// P_c at φ = 0 per candidate.
    pub p_c: Vec<f64>,
}

impl OptimalDelay {
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# best_delay = {:e}", self.best)?;
        writeln!(w, "delay,p_c")?;
        for (t, p) in self.candidates.iter().zip(&self.p_c) {
            writeln!(w, "{t:e},{p:e}")?;
        }
        Ok(())
    }
}

/// The delay maximizing the φ = 0 central-peak weight; ties go to the
/// earliest candidate.
pub fn find_optimal_t(candidates: &[f64], base: &Scenario) -> Result<OptimalDelay> {
    if candidates.is_empty() {
        return Err(Error::Grid("no delay candidates".into()));
    }
    let sep = base.pulses.separation();
    let lo = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo <= sep && sep <= hi) {
        log::warn!("delay candidates [{lo}, {hi}] do not bracket the pump separation {sep}");
    }
    let p_c = candidates
        .par_iter()
        .map(|&t| {
            let mut sc = base.clone();
            sc.request.delay = t;
            let (direct, inter) = central_components(&sc)?.central_integrals()?;
            log::info!("delay scan: T = {t} -> P_c(0) = {:e}", direct + 2.0 * inter);
            Ok(direct + 2.0 * inter)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &p) in p_c.iter().enumerate() {
        if p > p_c[best] {
            best = i;
        }
    }
    Ok(OptimalDelay {
        best: candidates[best],
        candidates: candidates.to_vec(),
        p_c,
    })
}

/// Two-pulse run from |m,0><m,0| over [0, horizon], recording the populations.
pub fn population_run(
    max_photons: usize,
    params: &SystemParams,
    pulses: &PulsePair,
    stepper: &StepperConfig,
    horizon: f64,
) -> Result<Trajectory> {
    params.validate()?;
    pulses.validate()?;
    let space = HilbertSpace::new(max_photons)?;
    let rho0 = DensityMatrix::basis_state(&space, 0);
    let pairs = population_pairs(&space);
    evolve_recording(
        &rho0,
        0.0,
        horizon,
        params,
        pulses,
        stepper,
        &Recording::Elements(pairs),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseProbabilities {
    pub p1: f64,
    pub p2: f64,
    pub plateau_time: f64,
    pub plateau: f64,
    pub final_metastable: f64,
}

/// Reads p1 and p2 from the ρ_mm plateau between the pulse centers: the
/// longest run with |dρ_mm/dt| < `threshold` lasting at least τ_p, sampled
/// at its midpoint.
pub fn pulse_probabilities(
    series: &PopulationSeries,
    pulses: &PulsePair,
    threshold: f64,
) -> Result<PulseProbabilities> {
    let (t, m) = (&series.times, &series.metastable);
    if t.len() < 3 || t.len() != m.len() {
        return Err(Error::PlateauNotDetected(format!("{} samples are too few", t.len())));
    }
    let mut best: Option<(usize, usize)> = None;
    let mut start: Option<usize> = None;
    let mut min_rate = f64::INFINITY;
    let close = |a: Option<usize>, end: usize, best: &mut Option<(usize, usize)>| {
        if let Some(a) = a {
            if best.is_none_or(|(b0, b1)| t[end] - t[a] > t[b1] - t[b0]) {
                *best = Some((a, end));
            }
        }
    };
    for k in 1..t.len() - 1 {
        if t[k] <= pulses.center1 || t[k] >= pulses.center2 {
            close(start.take(), k - 1, &mut best);
            continue;
        }
        let rate = ((m[k + 1] - m[k - 1]) / (t[k + 1] - t[k - 1])).abs();
        min_rate = min_rate.min(rate);
        if rate < threshold {
            start.get_or_insert(k);
        } else {
            close(start.take(), k - 1, &mut best);
        }
    }
    close(start.take(), t.len() - 2, &mut best);
    let (a, b) = match best {
        Some((a, b)) if t[b] - t[a] >= pulses.tau_p - 1e-9 => (a, b),
        Some((a, b)) => {
            return Err(Error::PlateauNotDetected(format!(
                "longest flat run [{}, {}] is shorter than tau_p = {}",
                t[a], t[b], pulses.tau_p
            )))
        }
        None => {
            return Err(Error::PlateauNotDetected(format!(
                "|d rho_mm/dt| >= {threshold:e} everywhere between the pulses (smallest {min_rate:e})"
            )))
        }
    };
    let mid = (a + b) / 2;
    let plateau = m[mid];
    let final_metastable = m[m.len() - 1];
    Ok(PulseProbabilities {
        p1: 1.0 - plateau,
        p2: plateau - final_metastable,
        plateau_time: t[mid],
        plateau,
        final_metastable,
    })
}
