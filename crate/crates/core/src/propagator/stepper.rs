//! Time steppers for linear flows: classical fixed-step RK4 and an adaptive
//! Dormand-Prince 5(4) pair.

use serde::{Deserialize, Serialize};

use super::liouvillian::Flow;
use crate::error::{Error, Result};
use crate::model::{C64, REFERENCE_TAU_P};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    pub method: Method,
    /// Fixed step for RK4, initial step for the adaptive method.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Record every `record_stride` base steps of length `dt`.
    pub record_stride: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            dt: REFERENCE_TAU_P / 200.0,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            record_stride: 25,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("stepper.dt", "must be > 0"));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::param("stepper.tol", "tolerances must be > 0"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("stepper.record_stride", "must be >= 1"));
        }
        Ok(())
    }
}

/// Scratch buffers for one RK4 step.
#[derive(Clone, Debug)]
pub struct Rk4Workspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

/// One classical RK4 step. `drives` holds Omega at t, t + h/2 and t + h.
pub fn rk4_step<F: Flow + ?Sized>(flow: &F, y: &mut [C64], drives: [f64; 3], h: f64, ws: &mut Rk4Workspace) {
    let n = y.len();
    let Rk4Workspace { k1, k2, k3, k4, tmp } = ws;
    flow.derivative(drives[0], y, k1);
    for i in 0..n {
        tmp[i] = y[i] + k1[i] * (0.5 * h);
    }
    flow.derivative(drives[1], tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + k2[i] * (0.5 * h);
    }
    flow.derivative(drives[1], tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + k3[i] * h;
    }
    flow.derivative(drives[2], tmp, k4);
    let sixth = h / 6.0;
    for i in 0..n {
        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * sixth;
    }
}

/// Integrates `y` from `t0` to `t1`, calling `record(t, y)` at `t0`, every
/// `record_stride * dt` and at `t1`.
pub fn integrate<F, D, R>(
    flow: &F,
    drive: D,
    y: &mut [C64],
    t0: f64,
    t1: f64,
    cfg: &StepperConfig,
    mut record: R,
) -> Result<()>
where
    F: Flow + ?Sized,
    D: Fn(f64) -> f64,
    R: FnMut(f64, &[C64]),
{
    if t1 < t0 {
        return Err(Error::TimeOrdering(format!("t1 = {t1} < t0 = {t0}")));
    }
    record(t0, y);
    if t1 == t0 || y.is_empty() {
        if t1 != t0 {
            record(t1, y);
        }
        return Ok(());
    }
    match cfg.method {
        Method::Rk4 => {
            let n = ((t1 - t0) / cfg.dt - 1e-9).ceil().max(1.0) as usize;
            let h = (t1 - t0) / n as f64;
            let mut ws = Rk4Workspace::new(y.len());
            for k in 0..n {
                let t = t0 + k as f64 * h;
                rk4_step(flow, y, [drive(t), drive(t + 0.5 * h), drive(t + h)], h, &mut ws);
                if (k + 1) % cfg.record_stride == 0 || k + 1 == n {
                    record(if k + 1 == n { t1 } else { t0 + (k + 1) as f64 * h }, y);
                }
            }
            Ok(())
        }
        Method::Adaptive => {
            let span = cfg.record_stride as f64 * cfg.dt;
            let mut dp = DormandPrince::new(y.len(), cfg);
            let mut t = t0;
            let mut k = 1usize;
            loop {
                let target = (t0 + k as f64 * span).min(t1);
                dp.advance(flow, &drive, y, &mut t, target)?;
                record(target, y);
                if target >= t1 {
                    return Ok(());
                }
                k += 1;
            }
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct DormandPrince {
    h: f64,
    rel: f64,
    abs: f64,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    next: Vec<C64>,
}

impl DormandPrince {
    fn new(n: usize, cfg: &StepperConfig) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self {
            h: cfg.dt,
            rel: cfg.rel_tol,
            abs: cfg.abs_tol,
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            next: z,
        }
    }

    fn advance<F: Flow + ?Sized, D: Fn(f64) -> f64>(
        &mut self,
        flow: &F,
        drive: &D,
        y: &mut [C64],
        t: &mut f64,
        target: f64,
    ) -> Result<()> {
        let n = y.len();
        while *t < target {
            let last = target - *t <= self.h;
            let h = if last { target - *t } else { self.h };
            if h < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepUnderflow { time: *t, step: h });
            }
            let stage = |s: &mut Self, coeffs: &[f64], c: f64, out: usize, y: &[C64]| {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in coeffs.iter().enumerate() {
                        acc += s.k[j][i] * (a * h);
                    }
                    s.tmp[i] = acc;
                }
                let (tmp, k) = (&s.tmp, &mut s.k[out]);
                flow.derivative(drive(*t + c * h), tmp, k);
            };
            flow.derivative(drive(*t), y, &mut self.k[0]);
            stage(self, &[A21], C2, 1, y);
            stage(self, &[A31, A32], C3, 2, y);
            stage(self, &[A41, A42, A43], C4, 3, y);
            stage(self, &[A51, A52, A53, A54], C5, 4, y);
            stage(self, &[A61, A62, A63, A64, A65], 1.0, 5, y);
            for i in 0..n {
                self.next[i] = y[i]
                    + (self.k[0][i] * B1
                        + self.k[2][i] * B3
                        + self.k[3][i] * B4
                        + self.k[4][i] * B5
                        + self.k[5][i] * B6)
                        * h;
            }
            flow.derivative(drive(*t + h), &self.next, &mut self.k[6]);
            let mut err = 0.0f64;
            for i in 0..n {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let scale = self.abs + self.rel * y[i].norm().max(self.next[i].norm());
                let r = e.norm() / scale;
                err = if r.is_finite() && self.next[i].norm().is_finite() {
                    err.max(r)
                } else {
                    f64::INFINITY
                };
            }
            if !err.is_finite() {
                self.h = 0.2 * h;
                if self.h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { time: *t, step: self.h });
                }
                continue;
            }
            if err <= 1.0 {
                *t = if last { target } else { *t + h };
                y.copy_from_slice(&self.next);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !(last && err <= 1.0) {
                self.h = h * factor;
            }
            if self.h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { time: *t, step: self.h });
            }
        }
        Ok(())
    }
}
