//! Multi-time photon correlators by quantum regression, and the
//! triple-coincidence correlation built from them.

pub mod element_path;
mod engine;
mod g3;

pub use engine::{CorrelatorEngine, EngineOptions, Lattice};
pub use g3::{g3, g3_components, Branch, CorrelationGrid, G3Components, G3Request, Scenario};

use crate::error::{Error, Result};
use crate::model::{CascadeState, HilbertSpace, OperatorMatrix, PulsePair, SystemParams, C64};
use crate::propagator::{integrate, DensityMatrix, Liouvillian, StepperConfig, Support};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// First photon of the cascade, |y,0><y,1|.
    A1,
    /// Second photon, |g,0><g,1|.
    A2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    pub which: Mode,
    pub matrix: OperatorMatrix,
}

impl ModeOperator {
    pub fn new(which: Mode, space: &HilbertSpace) -> Self {
        let (to, from) = match which {
            Mode::A1 => (CascadeState::YZero, CascadeState::YOne),
            Mode::A2 => (CascadeState::GZero, CascadeState::GOne),
        };
        Self {
            which,
            matrix: space.unit(space.cascade_index(to), space.cascade_index(from)),
        }
    }
}

fn check_shape(op: &ModeOperator, rho: &DensityMatrix) -> Result<()> {
    let d = rho.space().dim();
    if op.matrix.nrows() != d || op.matrix.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: op.matrix.nrows(),
        });
    }
    Ok(())
}

/// `op * rho`.
pub fn apply_left(op: &ModeOperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_shape(op, rho)?;
    DensityMatrix::new(rho.space().clone(), &op.matrix * rho.matrix(), false)
}

/// `rho * op†`.
pub fn apply_right(rho: &DensityMatrix, op: &ModeOperator) -> Result<DensityMatrix> {
    check_shape(op, rho)?;
    DensityMatrix::new(rho.space().clone(), rho.matrix() * op.matrix.adjoint(), false)
}

/// `op * rho * op†`, which keeps Hermiticity.
pub fn sandwich(op: &ModeOperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_shape(op, rho)?;
    let m = &op.matrix * rho.matrix() * op.matrix.adjoint();
    DensityMatrix::new(rho.space().clone(), m, rho.hermitian_expected())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// The annihilator multiplies from the left.
    Left,
    /// The creator multiplies from the right.
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub mode: Mode,
    pub side: Side,
}

impl Event {
    pub fn new(time: f64, mode: Mode, side: Side) -> Self {
        Self { time, mode, side }
    }
}

/// Evaluates a correlator by applying the events in ascending time order to
/// the state evolving from |m,0><m,0| at t = 0, and tracing the result.
/// Events sharing a time keep their given order.
pub fn ordered_correlator(
    space: &HilbertSpace,
    params: &SystemParams,
    pulses: &PulsePair,
    stepper: &StepperConfig,
    events: &[Event],
) -> Result<C64> {
    stepper.validate()?;
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    if let Some(e) = sorted.first() {
        if e.time < 0.0 {
            return Err(Error::TimeOrdering(format!("event at t = {} precedes t = 0", e.time)));
        }
    }
    let liouvillian = Liouvillian::new(params, space);
    let a1 = ModeOperator::new(Mode::A1, space);
    let a2 = ModeOperator::new(Mode::A2, space);
    let mut x = space.unit(
        space.cascade_index(CascadeState::M),
        space.cascade_index(CascadeState::M),
    );
    let mut t = 0.0;
    for e in &sorted {
        x = evolve_operand(&liouvillian, pulses, stepper, x, t, e.time)?;
        t = e.time;
        let op = match e.mode {
            Mode::A1 => &a1.matrix,
            Mode::A2 => &a2.matrix,
        };
        x = match e.side {
            Side::Left => op * &x,
            Side::Right => &x * op.adjoint(),
        };
    }
    Ok(x.trace())
}

fn evolve_operand(
    liouvillian: &Liouvillian,
    pulses: &PulsePair,
    stepper: &StepperConfig,
    x: OperatorMatrix,
    t0: f64,
    t1: f64,
) -> Result<OperatorMatrix> {
    let support = Support::of_matrix(&x);
    if t1 == t0 || support.is_empty() {
        return Ok(x);
    }
    let gen = liouvillian.restrict(&liouvillian.closure(&support));
    let mut y = gen.gather(&x);
    integrate(&gen, |t| pulses.envelope(t), &mut y, t0, t1, stepper, |_, _| {})?;
    Ok(gen.scatter(&y))
}

/// <a1†(t) a2†(t+tau) a2(t+tau) a1(t)>.
pub fn two_time_g2(
    t: f64,
    tau: f64,
    space: &HilbertSpace,
    params: &SystemParams,
    pulses: &PulsePair,
    stepper: &StepperConfig,
) -> Result<f64> {
    if tau < 0.0 {
        return Err(Error::TimeOrdering(format!("tau = {tau} < 0")));
    }
    let events = [
        Event::new(t, Mode::A1, Side::Left),
        Event::new(t, Mode::A1, Side::Right),
        Event::new(t + tau, Mode::A2, Side::Left),
        Event::new(t + tau, Mode::A2, Side::Right),
    ];
    let v = ordered_correlator(space, params, pulses, stepper, &events)?;
    if v.im.abs() > 1e-10 * v.re.abs().max(1.0) {
        log::warn!("two-time correlator has imaginary part {:e}", v.im);
    }
    Ok(v.re)
}

/// <a1†(t) a2†(t+tau) a2(t-T+tau) a1(t-T)>.
pub fn four_time_cross(
    t: f64,
    tau: f64,
    delay: f64,
    space: &HilbertSpace,
    params: &SystemParams,
    pulses: &PulsePair,
    stepper: &StepperConfig,
) -> Result<C64> {
    if t - delay < 0.0 {
        return Err(Error::TimeOrdering(format!("t - T = {} < 0", t - delay)));
    }
    if tau < 0.0 {
        return Err(Error::TimeOrdering(format!("tau = {tau} < 0")));
    }
    if delay < 0.0 {
        return Err(Error::TimeOrdering(format!("T = {delay} < 0")));
    }
    let events = [
        Event::new(t - delay, Mode::A1, Side::Left),
        Event::new(t - delay + tau, Mode::A2, Side::Left),
        Event::new(t, Mode::A1, Side::Right),
        Event::new(t + tau, Mode::A2, Side::Right),
    ];
    ordered_correlator(space, params, pulses, stepper, &events)
}

/// One retained term of the interferometer expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct RetainedTerm {
    pub kind: CorrelatorKind,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelatorKind {
    /// Both photons in the early bin.
    Early,
    /// Both photons in the late bin.
    Late,
    /// Early pair interfering with late pair.
    Cross,
}

/// A formal product of the output-mode expansion, indexed by which arm
/// (0 = direct, 1 = delayed by T) each of the four field operators takes.
#[derive(Clone, Debug, PartialEq)]
pub struct DroppedTerm {
    pub arms: [u8; 4],
    pub reason: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterferometerExpansion {
    pub retained: Vec<RetainedTerm>,
    pub dropped: Vec<DroppedTerm>,
}

/// Expands <a3† a4† a4 a3> with a3 = a1(t) + e^{i phi} a1(t-T) and a4 likewise
/// for a2. Only products in which both annihilators and both creators act in a
/// common arm survive, since a pair shares its time bin; the two cross orderings
/// combine into 2 cos(2 phi) Re C.
pub fn interferometer_outputs(phi: f64, _delay: f64) -> InterferometerExpansion {
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    let mut cross_seen = false;
    for bits in 0u8..16 {
        // Order: a3†, a4†, a4, a3.
        let arms = [bits >> 3 & 1, bits >> 2 & 1, bits >> 1 & 1, bits & 1];
        let [c3, c4, a4, a3] = arms;
        if a3 != a4 || c3 != c4 {
            dropped.push(DroppedTerm {
                arms,
                reason: "photons of one pair in different time bins",
            });
            continue;
        }
        match (c3, a3) {
            (0, 0) => retained.push(RetainedTerm {
                kind: CorrelatorKind::Early,
                weight: 1.0,
            }),
            (1, 1) => retained.push(RetainedTerm {
                kind: CorrelatorKind::Late,
                weight: 1.0,
            }),
            _ if !cross_seen => {
                cross_seen = true;
                retained.push(RetainedTerm {
                    kind: CorrelatorKind::Cross,
                    weight: 2.0 * (2.0 * phi).cos(),
                });
            }
            _ => dropped.push(DroppedTerm {
                arms,
                reason: "complex conjugate of the retained cross term",
            }),
        }
    }
    InterferometerExpansion { retained, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> HilbertSpace {
        HilbertSpace::new(2).unwrap()
    }

    fn idx(s: &HilbertSpace, c: CascadeState) -> usize {
        s.cascade_index(c)
    }

    #[test]
    fn mode_operators_single_entry() {
        let s = space();
        for (m, to, from) in [
            (Mode::A1, CascadeState::YZero, CascadeState::YOne),
            (Mode::A2, CascadeState::GZero, CascadeState::GOne),
        ] {
            let op = ModeOperator::new(m, &s);
            let nz: Vec<_> = (0..s.dim())
                .flat_map(|i| (0..s.dim()).map(move |j| (i, j)))
                .filter(|&(i, j)| op.matrix[(i, j)] != C64::new(0.0, 0.0))
                .collect();
            assert_eq!(nz, vec![(idx(&s, to), idx(&s, from))]);
            assert_eq!(op.matrix[nz[0]], C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn sandwich_and_one_sided_products() {
        let s = space();
        let a1 = ModeOperator::new(Mode::A1, &s);
        let a2 = ModeOperator::new(Mode::A2, &s);
        let y1 = DensityMatrix::basis_state(&s, idx(&s, CascadeState::YOne));
        let out = sandwich(&a1, &y1).unwrap();
        assert_eq!(
            out.matrix(),
            &s.unit(idx(&s, CascadeState::YZero), idx(&s, CascadeState::YZero))
        );
        assert!(out.hermitian_expected());
        let m0 = DensityMatrix::basis_state(&s, idx(&s, CascadeState::M));
        assert_eq!(sandwich(&a1, &m0).unwrap().matrix().norm(), 0.0);
        let gy = DensityMatrix::new(
            s.clone(),
            s.unit(idx(&s, CascadeState::GOne), idx(&s, CascadeState::YOne)),
            false,
        )
        .unwrap();
        let left = apply_left(&a2, &gy).unwrap();
        assert_eq!(
            left.matrix(),
            &s.unit(idx(&s, CascadeState::GZero), idx(&s, CascadeState::YOne))
        );
        assert!(!left.hermitian_expected());
        let right = apply_right(&gy, &a1).unwrap();
        assert_eq!(
            right.matrix(),
            &s.unit(idx(&s, CascadeState::GOne), idx(&s, CascadeState::YZero))
        );
    }

    #[test]
    fn shape_mismatch() {
        let s = space();
        let big = HilbertSpace::new(3).unwrap();
        let op = ModeOperator::new(Mode::A1, &big);
        let rho = DensityMatrix::basis_state(&s, 0);
        assert!(matches!(apply_left(&op, &rho), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn expansion_bookkeeping() {
        let e = interferometer_outputs(0.0, 1.0);
        assert_eq!(e.retained.len(), 3);
        assert_eq!(e.retained.len() + e.dropped.len(), 16);
        assert_eq!(e.retained[1].weight, 2.0);
        let q = interferometer_outputs(std::f64::consts::FRAC_PI_4, 1.0);
        assert!(q.retained[1].weight.abs() < 1e-15);
        let kinds: Vec<_> = e.retained.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![CorrelatorKind::Early, CorrelatorKind::Cross, CorrelatorKind::Late]
        );
    }

    #[test]
    fn no_photons_without_coupling_or_pump() {
        let s = space();
        let cfg = StepperConfig::default();
        let p0 = SystemParams {
            g1: 0.0,
            g2: 0.0,
            ..SystemParams::default()
        };
        assert_eq!(
            two_time_g2(12.0, 3.0, &s, &p0, &PulsePair::default(), &cfg).unwrap(),
            0.0
        );
        assert_eq!(
            two_time_g2(12.0, 3.0, &s, &SystemParams::default(), &PulsePair::zero(), &cfg).unwrap(),
            0.0
        );
        let c = four_time_cross(50.0, 2.0, 44.0, &s, &p0, &PulsePair::default(), &cfg).unwrap();
        assert_eq!(c, C64::new(0.0, 0.0));
    }

    #[test]
    fn ordering_errors() {
        let s = space();
        let cfg = StepperConfig::default();
        let p = SystemParams::default();
        let pp = PulsePair::default();
        assert!(matches!(
            two_time_g2(1.0, -0.5, &s, &p, &pp, &cfg),
            Err(Error::TimeOrdering(_))
        ));
        match four_time_cross(10.0, 1.0, 20.0, &s, &p, &pp, &cfg) {
            Err(Error::TimeOrdering(m)) => assert!(m.contains("t - T")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cross_with_zero_delay_is_g2() {
        let s = space();
        let cfg = StepperConfig::default();
        let p = SystemParams::default();
        let pp = PulsePair::default();
        for (t, tau) in [(12.0, 0.0), (12.0, 1.5), (60.0, 2.0)] {
            let g2 = two_time_g2(t, tau, &s, &p, &pp, &cfg).unwrap();
            let c = four_time_cross(t, tau, 0.0, &s, &p, &pp, &cfg).unwrap();
            assert_eq!(c.re, g2);
            assert!(c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn g2_is_real_and_nonnegative() {
        let s = space();
        let cfg = StepperConfig::default();
        let p = SystemParams::default();
        let pp = PulsePair::default();
        for tau in [0.0, 0.5, 1.0, 3.0] {
            let g = two_time_g2(13.0, tau, &s, &p, &pp, &cfg).unwrap();
            assert!(g >= -1e-10);
        }
        assert!(two_time_g2(13.0, 0.5, &s, &p, &pp, &cfg).unwrap() > 1e-4);
    }
}
