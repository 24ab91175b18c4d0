use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{CorrelatorEngine, EngineOptions, Lattice};
use crate::error::{Error, Result};
use crate::model::{HilbertSpace, PulsePair, SystemParams, C64};
use crate::propagator::StepperConfig;
use crate::quadrature::{trapezoid_window, uniform_weights, Quadrature};

/// Which inner delays enter the τ′ integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// τ′ over [-T_bin, T_bin].
    #[default]
    Full,
    /// τ′ over [0, T_bin] only.
    PositiveOnly,
}

/// Sampling of the triple-coincidence correlation. Every time in the request
/// is a multiple of `step`, which is also the t′ and τ′ spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G3Request {
    pub tau_grid: Vec<f64>,
    pub phi: f64,
    /// Interferometer delay T.
    pub delay: f64,
    pub t_bin: f64,
    pub tprime_window: [f64; 2],
    pub step: f64,
    pub quadrature: Quadrature,
    pub branch: Branch,
}

const LATTICE_SLACK: f64 = 1e-6;

fn nodes(x: f64, step: f64, what: &str) -> Result<i64> {
    let q = x / step;
    let n = q.round();
    if (q - n).abs() > LATTICE_SLACK {
        return Err(Error::Grid(format!(
            "{what} = {x} is not a multiple of the step {step}"
        )));
    }
    Ok(n as i64)
}

impl G3Request {
    /// Lattice-aligned defaults around the first pump pulse: t′ within
    /// center1 ± 3τ_p (clipped at 0), T_bin = 3τ_p, τ covering all three peaks.
    pub fn around_pulses(pulses: &PulsePair, delay: f64, step: f64) -> Self {
        let t_bin = 3.0 * pulses.tau_p;
        let lo = ((pulses.center1 - 3.0 * pulses.tau_p).max(0.0) / step).ceil() * step;
        let hi = ((pulses.center1 + 3.0 * pulses.tau_p) / step).floor() * step;
        let mut req = Self {
            tau_grid: Vec::new(),
            phi: 0.0,
            delay,
            t_bin,
            tprime_window: [lo, hi],
            step,
            quadrature: Quadrature::Trapezoid,
            branch: Branch::Full,
        };
        req.tau_grid = req.lattice_range(-t_bin, 2.0 * delay + t_bin);
        req
    }

    /// Lattice points within [a, b].
    pub fn lattice_range(&self, a: f64, b: f64) -> Vec<f64> {
        let lo = (a / self.step - LATTICE_SLACK).ceil() as i64;
        let hi = (b / self.step + LATTICE_SLACK).floor() as i64;
        (lo..=hi).map(|k| k as f64 * self.step).collect()
    }

    /// The τ grid restricted to the central peak window [T - T_bin, T + T_bin].
    pub fn central_window(&self) -> Self {
        Self {
            tau_grid: self.lattice_range(self.delay - self.t_bin, self.delay + self.t_bin),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| Err(Error::param(name, reason));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("g3.step", format!("must be positive, got {}", self.step));
        }
        if !(self.t_bin > 0.0 && self.t_bin < self.delay) {
            return bad(
                "g3.t_bin",
                format!("need 0 < T_bin < T, got T_bin = {} and T = {}", self.t_bin, self.delay),
            );
        }
        if self.tau_grid.is_empty() {
            return Err(Error::Grid("empty tau grid".into()));
        }
        if self.tau_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("tau grid must be strictly increasing".into()));
        }
        if !(self.tprime_window[0] >= 0.0 && self.tprime_window[1] > self.tprime_window[0]) {
            return bad(
                "g3.tprime_window",
                format!("need 0 <= start < end, got {:?}", self.tprime_window),
            );
        }
        nodes(self.delay, self.step, "T")?;
        nodes(self.t_bin, self.step, "T_bin")?;
        nodes(self.tprime_window[0], self.step, "t' window start")?;
        nodes(self.tprime_window[1], self.step, "t' window end")?;
        for &t in &self.tau_grid {
            nodes(t, self.step, "tau")?;
        }
        Ok(())
    }

    /// Warns when the grid has fewer than 8 points per pulse width.
    pub fn check_resolution(&self, tau_p: f64) -> bool {
        let ok = tau_p / self.step >= 8.0 - 1e-9;
        if !ok {
            log::warn!(
                "g3 grid step {} gives only {:.1} points per pulse width",
                self.step,
                tau_p / self.step
            );
        }
        ok
    }
}

/// Everything a correlator run needs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub max_photons: usize,
    pub params: SystemParams,
    pub pulses: PulsePair,
    pub stepper: StepperConfig,
    pub request: G3Request,
    pub engine: EngineOptions,
}

/// G³(τ) split by correlator kind, so any φ can be assembled afterwards:
/// G³ = early + late + 2 cos(2φ) Re cross.
#[derive(Clone, Debug)]
pub struct G3Components {
    pub request: G3Request,
    pub early: Vec<C64>,
    pub late: Vec<C64>,
    pub cross: Vec<C64>,
}

/// Real G³ samples for one φ.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationGrid {
    pub request: G3Request,
    pub values: Vec<f64>,
}

pub const REALNESS_TOL: f64 = 1e-9;

impl G3Components {
    pub fn tau(&self) -> &[f64] {
        &self.request.tau_grid
    }

    /// Complex G³ before the real cast.
    pub fn complex_values(&self, phi: f64) -> Vec<C64> {
        let w = (2.0 * phi).cos();
        self.early
            .iter()
            .zip(&self.late)
            .zip(&self.cross)
            .map(|((&e, &l), &c)| e + l + (c + c.conj()) * w)
            .collect()
    }

    pub fn grid(&self, phi: f64) -> Result<CorrelationGrid> {
        let mut values = Vec::with_capacity(self.early.len());
        for (z, &tau) in self.complex_values(phi).iter().zip(self.tau()) {
            if z.im.abs() > REALNESS_TOL {
                return Err(Error::Numerical(format!("G3({tau}) has imaginary part {:e}", z.im)));
            }
            if z.re < -REALNESS_TOL {
                return Err(Error::Numerical(format!("G3({tau}) = {:e} is negative", z.re)));
            }
            values.push(z.re);
        }
        Ok(CorrelationGrid {
            request: G3Request {
                phi,
                ..self.request.clone()
            },
            values,
        })
    }

    /// Integrals of (early + late, Re cross) over the central window, so that
    /// P_c(φ) = direct + 2 cos(2φ) interference.
    pub fn central_integrals(&self) -> Result<(f64, f64)> {
        let (t, tb) = (self.request.delay, self.request.t_bin);
        let direct: Vec<f64> = self.early.iter().zip(&self.late).map(|(e, l)| e.re + l.re).collect();
        let inter: Vec<f64> = self.cross.iter().map(|c| c.re).collect();
        Ok((
            trapezoid_window(self.tau(), &direct, t - tb, t + tb)?,
            trapezoid_window(self.tau(), &inter, t - tb, t + tb)?,
        ))
    }
}

impl CorrelationGrid {
    pub fn tau(&self) -> &[f64] {
        &self.request.tau_grid
    }

    /// `tau,g3_value` rows after the given comment lines and a block echoing
    /// the request.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        let r = &self.request;
        writeln!(w, "# g3.phi = {:e}", r.phi)?;
        writeln!(w, "# g3.delay = {:e}", r.delay)?;
        writeln!(w, "# g3.t_bin = {:e}", r.t_bin)?;
        writeln!(
            w,
            "# g3.tprime_window = [{:e}, {:e}]",
            r.tprime_window[0], r.tprime_window[1]
        )?;
        writeln!(w, "# g3.step = {:e}", r.step)?;
        writeln!(w, "# g3.quadrature = {:?}", r.quadrature)?;
        writeln!(w, "# g3.branch = {:?}", r.branch)?;
        writeln!(w, "# g3.tau_points = {}", r.tau_grid.len())?;
        writeln!(w, "tau,g3_value")?;
        for (t, v) in self.tau().iter().zip(&self.values) {
            writeln!(w, "{t:e},{v:e}")?;
        }
        Ok(())
    }
}

/// Computes the three correlator components of G³ on the request's τ grid.
pub fn g3_components(sc: &Scenario) -> Result<G3Components> {
    let req = &sc.request;
    sc.params.validate()?;
    sc.pulses.validate()?;
    sc.stepper.validate()?;
    req.validate()?;
    let space = HilbertSpace::new(sc.max_photons)?;
    let step = req.step;
    let nb = nodes(req.t_bin, step, "T_bin")? as usize;
    let nt = nodes(req.delay, step, "T")?;
    let k0 = nodes(req.tprime_window[0], step, "t' window start")?;
    let k1 = nodes(req.tprime_window[1], step, "t' window end")?;
    let taus: Vec<i64> = req
        .tau_grid
        .iter()
        .map(|&t| nodes(t, step, "tau"))
        .collect::<Result<_>>()?;

    let tq_w = uniform_weights((k1 - k0 + 1) as usize, req.quadrature)?;
    let weights_t: Vec<(i64, f64)> = (k0..=k1)
        .zip(&tq_w)
        .map(|(k, &w)| {
            let t = k as f64 * step;
            let o = sc.pulses.first(t);
            (k, o * o * w * step)
        })
        .collect();
    let inner_w = match req.branch {
        Branch::Full => uniform_weights(2 * nb + 1, req.quadrature)?,
        Branch::PositiveOnly => uniform_weights(nb + 1, req.quadrature)?,
    };

    let (tau_lo, tau_hi) = (taus[0], taus[taus.len() - 1]);
    let s_max = k1 + tau_hi;
    let s_min = (k0 + tau_lo - nt).max(0);
    if s_max < 0 {
        let z = vec![C64::new(0.0, 0.0); taus.len()];
        return Ok(G3Components {
            request: req.clone(),
            early: z.clone(),
            late: z.clone(),
            cross: z,
        });
    }
    let (s_min, s_max) = (s_min as usize, s_max as usize);
    let lattice = Lattice::new(&sc.pulses, step, sc.stepper.dt, s_max + nb + 1)?;
    let engine = CorrelatorEngine::new(&space, &sc.params, lattice, sc.engine)?;
    let nt = nt as usize;

    let full = req.branch == Branch::Full;
    let rev_lo = s_min.saturating_sub(nb);
    let total = (s_max - s_min + 1) * 2 + if full { s_max - rev_lo + 1 } else { 0 };
    let done = AtomicUsize::new(0);
    let tick = || {
        let d = done.fetch_add(1, Ordering::Relaxed) + 1;
        if d.is_multiple_of(16) || d == total {
            log::info!("g3: {d}/{total} correlator rows");
        }
    };

    let direct: Vec<Vec<C64>> = (s_min..=s_max)
        .into_par_iter()
        .map(|s| {
            let r = engine.g2_row(s, nb);
            tick();
            r
        })
        .collect::<Result<_>>()?;
    let reverse: Vec<Vec<C64>> = if full {
        (rev_lo..=s_max)
            .into_par_iter()
            .map(|r| {
                let row = engine.reverse_g2_row(r, nb);
                tick();
                row
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let cross_rows: Vec<(Vec<C64>, Vec<C64>)> = (s_min..=s_max)
        .into_par_iter()
        .map(|s| {
            let pos = engine.cross_row(s, nt, nb)?;
            let neg = if full {
                engine.reverse_cross_row(s, nt, nb)?
            } else {
                Vec::new()
            };
            tick();
            Ok((pos, neg))
        })
        .collect::<Result<_>>()?;

    // Inner τ′ integrals per s.
    let inner = |pos: &[C64], neg: &dyn Fn(usize) -> C64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        match req.branch {
            Branch::Full => {
                for j in 1..=nb {
                    acc += neg(j) * inner_w[nb - j];
                }
                for (j, &v) in pos.iter().enumerate() {
                    acc += v * inner_w[nb + j];
                }
            }
            Branch::PositiveOnly => {
                for (j, &v) in pos.iter().enumerate() {
                    acc += v * inner_w[j];
                }
            }
        }
        acc * step
    };
    let sd: Vec<C64> = (s_min..=s_max)
        .map(|s| {
            inner(&direct[s - s_min], &|j| match s.checked_sub(j) {
                Some(r) if r >= rev_lo => reverse[r - rev_lo][j],
                _ => C64::new(0.0, 0.0),
            })
        })
        .collect();
    let sc_: Vec<C64> = cross_rows.iter().map(|(pos, neg)| inner(pos, &|j| neg[j])).collect();
    let at = |v: &[C64], s: i64| -> C64 {
        if s < s_min as i64 || s > s_max as i64 {
            C64::new(0.0, 0.0)
        } else {
            v[(s - s_min as i64) as usize]
        }
    };

    let mut early = Vec::with_capacity(taus.len());
    let mut late = Vec::with_capacity(taus.len());
    let mut cross = Vec::with_capacity(taus.len());
    for &n in &taus {
        let (mut e, mut l, mut c) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for &(k, w) in &weights_t {
            e += at(&sd, k + n) * w;
            l += at(&sd, k + n - nt as i64) * w;
            c += at(&sc_, k + n) * w;
        }
        early.push(e);
        late.push(l);
        cross.push(c);
    }
    Ok(G3Components {
        request: req.clone(),
        early,
        late,
        cross,
    })
}

/// G³(τ) at the request's φ.
pub fn g3(sc: &Scenario) -> Result<CorrelationGrid> {
    g3_components(sc)?.grid(sc.request.phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scenario(step_div: f64) -> Scenario {
        let pulses = PulsePair::default();
        let step = pulses.tau_p / step_div;
        let request = G3Request::around_pulses(&pulses, 14.0 * PI, step).central_window();
        Scenario {
            max_photons: 2,
            params: SystemParams::default(),
            pulses,
            stepper: StepperConfig::default(),
            request,
            engine: EngineOptions::default(),
        }
    }

    #[test]
    fn request_defaults_are_lattice_aligned() {
        let p = PulsePair::default();
        let r = G3Request::around_pulses(&p, 14.0 * PI, p.tau_p / 8.0);
        assert!(r.validate().is_ok());
        assert!(r.check_resolution(p.tau_p));
        assert!(!G3Request::around_pulses(&p, 14.0 * PI, p.tau_p / 4.0).check_resolution(p.tau_p));
        assert_eq!(r.tprime_window[0], 0.0);
        assert!((r.tprime_window[1] - 5.0 * p.tau_p).abs() < 1e-12);
        assert_eq!(r.central_window().tau_grid.len(), 49);
    }

    #[test]
    fn request_rejects_bad_bins_and_grids() {
        let p = PulsePair::default();
        let mut r = G3Request::around_pulses(&p, 14.0 * PI, p.tau_p / 8.0);
        r.t_bin = 20.0 * PI;
        assert!(matches!(r.validate(), Err(Error::InvalidParameter { .. })));
        let mut r = G3Request::around_pulses(&p, 14.0 * PI, p.tau_p / 8.0);
        r.tau_grid.clear();
        assert!(matches!(r.validate(), Err(Error::Grid(_))));
        let mut r = G3Request::around_pulses(&p, 14.0 * PI, p.tau_p / 8.0);
        r.tau_grid = vec![0.1];
        assert!(matches!(r.validate(), Err(Error::Grid(_))));
    }

    #[test]
    fn vanishes_without_second_coupling() {
        let mut sc = scenario(4.0);
        sc.params.g2 = 0.0;
        let c = g3_components(&sc).unwrap();
        for phi in [0.0, 0.7] {
            assert!(c.grid(phi).unwrap().values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn phase_symmetry() {
        let c = g3_components(&scenario(4.0)).unwrap();
        for phi in [0.0, 0.3, 1.1] {
            let a = c.grid(phi).unwrap().values;
            let b = c.grid(phi + PI).unwrap().values;
            let m = c.grid(-phi).unwrap().values;
            for i in 0..a.len() {
                assert!((a[i] - b[i]).abs() < 1e-9);
                assert!((a[i] - m[i]).abs() < 1e-9);
            }
        }
        let (d, x) = c.central_integrals().unwrap();
        assert!(d > 0.0);
        assert!(d + 2.0 * x > d - 2.0 * x);
    }

    #[test]
    fn csv_echoes_request() {
        let mut sc = scenario(4.0);
        sc.request.tau_grid = sc.request.lattice_range(13.0 * PI, 15.0 * PI);
        let grid = g3(&sc).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf, &["config_hash = abc".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# config_hash = abc\n"));
        assert!(text.contains("# g3.t_bin = "));
        assert!(text.contains("\ntau,g3_value\n"));
        assert_eq!(
            text.lines().filter(|l| !l.starts_with('#')).count(),
            grid.values.len() + 1
        );
    }
}
