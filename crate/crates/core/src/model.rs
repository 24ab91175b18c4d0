//! Quantum-dot cavity model: Hilbert space, Hamiltonian, collapse operators and
//! the two-pulse pump.
//!
//! Units: ħ = 1, rates and detunings in units of the cavity coupling g, time in
//! units of 1/g. The basis is level-major: index = level * (max_photons + 1) + n,
//! with levels ordered m, u, y, g.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type OperatorMatrix = DMatrix<C64>;

/// Quantum-dot level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    /// Metastable exciton |m>, the initial state.
    Metastable,
    /// Biexciton |u>.
    Biexciton,
    /// Bright exciton |y>.
    Exciton,
    /// Ground state |g>.
    Ground,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Metastable, Level::Biexciton, Level::Exciton, Level::Ground];

    pub fn label(self) -> char {
        match self {
            Level::Metastable => 'm',
            Level::Biexciton => 'u',
            Level::Exciton => 'y',
            Level::Ground => 'g',
        }
    }

    fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// The seven states reached from |m,0> by the pump, the cavity and the
/// collapse channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CascadeState {
    /// |m,0>
    M,
    /// |u,0>
    U,
    /// |Y> = |y,1>
    YOne,
    /// |G'> = |g,2>
    GTwo,
    /// |y,0>
    YZero,
    /// |G> = |g,1>
    GOne,
    /// |g,0>
    GZero,
}

impl CascadeState {
    pub const ALL: [CascadeState; 7] = [
        CascadeState::M,
        CascadeState::U,
        CascadeState::YOne,
        CascadeState::GTwo,
        CascadeState::YZero,
        CascadeState::GOne,
        CascadeState::GZero,
    ];

    pub fn level_photons(self) -> (Level, usize) {
        match self {
            CascadeState::M => (Level::Metastable, 0),
            CascadeState::U => (Level::Biexciton, 0),
            CascadeState::YOne => (Level::Exciton, 1),
            CascadeState::GTwo => (Level::Ground, 2),
            CascadeState::YZero => (Level::Exciton, 0),
            CascadeState::GOne => (Level::Ground, 1),
            CascadeState::GZero => (Level::Ground, 0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CascadeState::M => "m",
            CascadeState::U => "u",
            CascadeState::YOne => "Y",
            CascadeState::GTwo => "G'",
            CascadeState::YZero => "y",
            CascadeState::GOne => "G",
            CascadeState::GZero => "g",
        }
    }
}

/// Truncated Hilbert space of the four-level dot times a Fock ladder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    max_photons: usize,
    basis: Vec<(Level, usize)>,
}

impl HilbertSpace {
    pub fn new(max_photons: usize) -> Result<Self> {
        if max_photons < 2 {
            return Err(Error::CutoffTooSmall(max_photons));
        }
        let basis = Level::ALL
            .iter()
            .flat_map(|&l| (0..=max_photons).map(move |n| (l, n)))
            .collect();
        Ok(Self { max_photons, basis })
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[(Level, usize)] {
        &self.basis
    }

    pub fn index(&self, level: Level, photons: usize) -> Option<usize> {
        (photons <= self.max_photons).then(|| level.ordinal() * (self.max_photons + 1) + photons)
    }

    pub fn cascade_index(&self, state: CascadeState) -> usize {
        let (l, n) = state.level_photons();
        self.index(l, n).expect("cutoff >= 2 covers every cascade state")
    }

    pub fn state(&self, index: usize) -> (Level, usize) {
        self.basis[index]
    }

    /// Projector-like ket-bra |i><j| as a matrix.
    pub fn unit(&self, i: usize, j: usize) -> OperatorMatrix {
        let mut m = OperatorMatrix::zeros(self.dim(), self.dim());
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }
}

/// Deterministic level-major basis for the given photon cutoff.
pub fn enumerate_basis(max_photons: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(max_photons)
}

/// Rates and detunings of the dot-cavity system, in units of g.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Biexciton-exciton cavity coupling.
    pub g1: f64,
    /// Exciton-ground cavity coupling.
    pub g2: f64,
    /// Cavity field decay; the emission channel is sqrt(kappa) a.
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Pure dephasing rate.
    pub gamma_d: f64,
    pub delta_p: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g1: 1.0,
            g2: 1.0,
            kappa: 2.5,
            gamma1: 1e-3,
            gamma2: 1e-3,
            gamma_d: 1e-2,
            delta_p: -1.5,
            delta1: -3.0,
            delta2: 2.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("g1", self.g1),
            ("g2", self.g2),
            ("kappa", self.kappa),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_d", self.gamma_d),
            ("delta_p", self.delta_p),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        for (name, v) in &all[..6] {
            if *v < 0.0 {
                return Err(Error::param(*name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Two Gaussian pump pulses with a common width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulsePair {
    pub amp1: f64,
    pub center1: f64,
    pub amp2: f64,
    pub center2: f64,
    pub tau_p: f64,
}

/// Pulse width used by the reference configuration: g tau_p = 2 pi.
pub const REFERENCE_TAU_P: f64 = 2.0 * PI;

impl Default for PulsePair {
    fn default() -> Self {
        Self {
            amp1: 0.74,
            center1: 2.0 * REFERENCE_TAU_P,
            amp2: 3.0,
            center2: 9.5 * REFERENCE_TAU_P,
            tau_p: REFERENCE_TAU_P,
        }
    }
}

impl PulsePair {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("amp1", self.amp1),
            ("center1", self.center1),
            ("amp2", self.amp2),
            ("center2", self.center2),
            ("tau_p", self.tau_p),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.amp1 < 0.0 || self.amp2 < 0.0 {
            return Err(Error::param("amp", "pulse amplitudes must be >= 0"));
        }
        if self.tau_p <= 0.0 {
            return Err(Error::param("tau_p", "must be > 0"));
        }
        if self.center2 <= self.center1 {
            return Err(Error::param("center2", "second pulse must come after the first"));
        }
        if !self.is_resolved() {
            log::warn!(
                "pump pulses separated by {:.3} are not resolved (tau_p = {:.3})",
                self.separation(),
                self.tau_p
            );
        }
        Ok(())
    }

    pub fn separation(&self) -> f64 {
        self.center2 - self.center1
    }

    /// Separation of at least three widths.
    pub fn is_resolved(&self) -> bool {
        self.separation() >= 3.0 * self.tau_p
    }

    pub fn first(&self, t: f64) -> f64 {
        gaussian(self.amp1, self.center1, self.tau_p, t)
    }

    pub fn second(&self, t: f64) -> f64 {
        gaussian(self.amp2, self.center2, self.tau_p, t)
    }

    /// Total Rabi frequency Omega_p(t).
    pub fn envelope(&self, t: f64) -> f64 {
        self.first(t) + self.second(t)
    }

    pub fn zero() -> Self {
        Self {
            amp1: 0.0,
            amp2: 0.0,
            ..Self::default()
        }
    }
}

fn gaussian(amp: f64, center: f64, width: f64, t: f64) -> f64 {
    let x = (t - center) / width;
    amp * (-x * x).exp()
}

pub fn pump_envelope(pulses: &PulsePair, t: f64) -> f64 {
    pulses.envelope(t)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Photon annihilation operator a, identity on the dot.
pub fn annihilation(space: &HilbertSpace) -> OperatorMatrix {
    let d = space.dim();
    let mut a = OperatorMatrix::zeros(d, d);
    for &l in &Level::ALL {
        for n in 1..=space.max_photons() {
            let to = space.index(l, n - 1).unwrap();
            let from = space.index(l, n).unwrap();
            a[(to, from)] = real((n as f64).sqrt());
        }
    }
    a
}

/// Dot transition |to><from| tensored with the photon identity.
pub fn transition(space: &HilbertSpace, to: Level, from: Level) -> OperatorMatrix {
    let d = space.dim();
    let mut m = OperatorMatrix::zeros(d, d);
    for n in 0..=space.max_photons() {
        m[(space.index(to, n).unwrap(), space.index(from, n).unwrap())] = real(1.0);
    }
    m
}

/// Hamiltonian with the pump switched off.
pub fn static_hamiltonian(params: &SystemParams, space: &HilbertSpace) -> OperatorMatrix {
    let a = annihilation(space);
    let mut h = transition(space, Level::Metastable, Level::Metastable) * real(params.delta_p)
        + transition(space, Level::Exciton, Level::Exciton) * real(params.delta1)
        + transition(space, Level::Ground, Level::Ground) * real(params.delta1 + params.delta2);
    let cavity = transition(space, Level::Biexciton, Level::Exciton) * &a * real(params.g1)
        + transition(space, Level::Exciton, Level::Ground) * &a * real(params.g2);
    h += &cavity + cavity.adjoint();
    h
}

/// Coefficient matrix of Omega_p(t): |u><m| + |m><u|.
pub fn drive_operator(space: &HilbertSpace) -> OperatorMatrix {
    let um = transition(space, Level::Biexciton, Level::Metastable);
    &um + um.adjoint()
}

/// H(t) in the frame rotating at the pump frequency.
pub fn build_hamiltonian(params: &SystemParams, pulses: &PulsePair, t: f64, space: &HilbertSpace) -> OperatorMatrix {
    static_hamiltonian(params, space) + drive_operator(space) * real(pulses.envelope(t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    BiexcitonToMetastable,
    BiexcitonToExciton,
    ExcitonToGround,
    BiexcitonDephasing,
    MetastableDephasing,
    ExcitonDephasing,
    CavityEmission,
}

#[derive(Clone, Debug)]
pub struct CollapseOperator {
    pub channel: Channel,
    pub matrix: OperatorMatrix,
}

/// The seven collapse operators, rates folded into the matrices.
pub fn lindblad_set(params: &SystemParams, space: &HilbertSpace) -> Vec<CollapseOperator> {
    use Level::*;
    let op = |channel, rate: f64, m: OperatorMatrix| CollapseOperator {
        channel,
        matrix: m * real(rate.sqrt()),
    };
    vec![
        op(
            Channel::BiexcitonToMetastable,
            params.gamma1,
            transition(space, Metastable, Biexciton),
        ),
        op(
            Channel::BiexcitonToExciton,
            params.gamma1,
            transition(space, Exciton, Biexciton),
        ),
        op(
            Channel::ExcitonToGround,
            params.gamma2,
            transition(space, Ground, Exciton),
        ),
        op(
            Channel::BiexcitonDephasing,
            2.0 * params.gamma_d,
            transition(space, Biexciton, Biexciton),
        ),
        op(
            Channel::MetastableDephasing,
            params.gamma_d,
            transition(space, Metastable, Metastable),
        ),
        op(
            Channel::ExcitonDephasing,
            params.gamma_d,
            transition(space, Exciton, Exciton),
        ),
        op(Channel::CavityEmission, params.kappa, annihilation(space)),
    ]
}

/// Max element-wise |H - H^dagger|.
pub fn hermiticity_defect(m: &OperatorMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Basis states reachable from |m,0> through any structurally nonzero coupling
/// of the Hamiltonian (pump on) or any collapse operator.
pub fn reachable_states(params: &SystemParams, space: &HilbertSpace) -> BTreeSet<usize> {
    let h = static_hamiltonian(params, space) + drive_operator(space);
    let ls = lindblad_set(params, space);
    let mut seen = BTreeSet::new();
    let mut stack = vec![space.index(Level::Metastable, 0).unwrap()];
    while let Some(j) = stack.pop() {
        if !seen.insert(j) {
            continue;
        }
        for i in 0..space.dim() {
            let coupled = h[(i, j)] != C64::new(0.0, 0.0) || ls.iter().any(|l| l.matrix[(i, j)] != C64::new(0.0, 0.0));
            if coupled && !seen.contains(&i) {
                stack.push(i);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn space() -> HilbertSpace {
        HilbertSpace::new(2).unwrap()
    }

    #[test]
    fn basis_dimensions() {
        assert_eq!(enumerate_basis(2).unwrap().dim(), 12);
        assert_eq!(enumerate_basis(3).unwrap().dim(), 16);
        assert!(matches!(enumerate_basis(1), Err(Error::CutoffTooSmall(1))));
    }

    #[test]
    fn basis_lookup_is_injective() {
        let s = space();
        let y1 = s.index(Level::Exciton, 1).unwrap();
        let y0 = s.index(Level::Exciton, 0).unwrap();
        assert_ne!(y1, y0);
        let all: BTreeSet<_> = s.basis().iter().map(|&(l, n)| s.index(l, n).unwrap()).collect();
        assert_eq!(all.len(), s.dim());
        for (i, &(l, n)) in s.basis().iter().enumerate() {
            assert_eq!(s.index(l, n), Some(i));
            assert_eq!(s.state(i), (l, n));
        }
        assert_eq!(s.index(Level::Ground, 3), None);
    }

    #[test]
    fn envelope_at_pulse_peaks() {
        let p = PulsePair::default();
        let tp = p.tau_p;
        assert_abs_diff_eq!(p.envelope(2.0 * tp), 0.74, epsilon = 1e-12);
        assert_abs_diff_eq!(p.envelope(9.5 * tp), 3.0, epsilon = 1e-12);
        assert!(p.envelope(p.center1 - 100.0 * tp) < 1e-300);
    }

    #[test]
    fn bare_detunings_on_diagonal() {
        let params = SystemParams {
            g1: 0.0,
            g2: 0.0,
            ..SystemParams::default()
        };
        let s = space();
        let h = build_hamiltonian(&params, &PulsePair::zero(), 0.0, &s);
        for (i, &(l, _)) in s.basis().iter().enumerate() {
            let expect = match l {
                Level::Metastable => params.delta_p,
                Level::Biexciton => 0.0,
                Level::Exciton => params.delta1,
                Level::Ground => params.delta1 + params.delta2,
            };
            for j in 0..s.dim() {
                let want = if i == j { expect } else { 0.0 };
                assert_eq!(h[(i, j)], real(want));
            }
        }
    }

    #[test]
    fn cavity_matrix_elements() {
        let s = space();
        let p = SystemParams::default();
        let h = build_hamiltonian(&p, &PulsePair::default(), 3.0, &s);
        let u0 = s.index(Level::Biexciton, 0).unwrap();
        let y1 = s.index(Level::Exciton, 1).unwrap();
        let g2 = s.index(Level::Ground, 2).unwrap();
        assert_abs_diff_eq!(h[(u0, y1)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(y1, g2)].re, 2f64.sqrt(), epsilon = 1e-15);
        assert!(hermiticity_defect(&h) < 1e-12);
    }

    #[test]
    fn only_listed_couplings_are_nonzero() {
        let s = space();
        let h = build_hamiltonian(&SystemParams::default(), &PulsePair::default(), 12.0, &s);
        let allowed = |a: (Level, usize), b: (Level, usize)| {
            use Level::*;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            matches!(
                (lo.0, hi.0),
                (Metastable, Biexciton) if lo.1 == hi.1
            ) || matches!((lo.0, hi.0), (Biexciton, Exciton) if hi.1 == lo.1 + 1)
                || matches!((lo.0, hi.0), (Exciton, Ground) if hi.1 == lo.1 + 1)
        };
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                if i != j && !allowed(s.state(i), s.state(j)) {
                    assert_eq!(h[(i, j)], real(0.0), "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn collapse_operators() {
        let s = space();
        let zero = SystemParams {
            kappa: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            gamma_d: 0.0,
            ..SystemParams::default()
        };
        let ls = lindblad_set(&zero, &s);
        assert_eq!(ls.len(), 7);
        assert!(ls.iter().all(|l| l.matrix.iter().all(|z| z.norm() == 0.0)));

        let ls = lindblad_set(&SystemParams::default(), &s);
        let mu = &ls[0].matrix;
        assert_eq!(ls[0].channel, Channel::BiexcitonToMetastable);
        for n in 0..=2 {
            let m = s.index(Level::Metastable, n).unwrap();
            let u = s.index(Level::Biexciton, n).unwrap();
            assert_abs_diff_eq!(mu[(m, u)].re, 1e-3f64.sqrt(), epsilon = 1e-15);
        }
        assert_eq!(mu.iter().filter(|z| z.norm() != 0.0).count(), 3);

        let cav = &ls[6].matrix;
        let g2 = s.index(Level::Ground, 2).unwrap();
        let g1 = s.index(Level::Ground, 1).unwrap();
        assert_abs_diff_eq!(cav[(g1, g2)].re, (2.5f64 * 2.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn reachable_set_is_the_cascade() {
        let s = space();
        let reach = reachable_states(&SystemParams::default(), &s);
        let cascade: BTreeSet<_> = CascadeState::ALL.iter().map(|&c| s.cascade_index(c)).collect();
        assert_eq!(reach, cascade);
        let s3 = HilbertSpace::new(3).unwrap();
        let reach3 = reachable_states(&SystemParams::default(), &s3);
        assert_eq!(reach3.len(), 7);
    }

    #[test]
    fn validation_rejects_negative_rates() {
        let p = SystemParams {
            kappa: -1.0,
            ..SystemParams::default()
        };
        assert!(p.validate().is_err());
        assert!(SystemParams::default().validate().is_ok());
        let bad = PulsePair {
            center2: 0.0,
            ..PulsePair::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn envelope_translation_invariant(t in -50.0f64..150.0, shift in -100.0f64..100.0) {
            let p = PulsePair::default();
            let q = PulsePair { center1: p.center1 + shift, center2: p.center2 + shift, ..p.clone() };
            let a = p.envelope(t);
            let b = q.envelope(t + shift);
            proptest::prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
        }

        #[test]
        fn hamiltonian_is_hermitian(t in -20.0f64..120.0) {
            let s = HilbertSpace::new(2).unwrap();
            let h = build_hamiltonian(&SystemParams::default(), &PulsePair::default(), t, &s);
            proptest::prop_assert!(hermiticity_defect(&h) < 1e-12);
        }
    }
}
