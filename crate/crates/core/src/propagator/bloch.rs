//! Element-wise equations of motion on the seven-state cascade.
//!
//! Two closed sets are covered. The physical set holds the populations and
//! the coherences reachable from |m,0><m,0|; coherences are stored once and
//! their transposes are implied by Hermiticity. The shifted set holds the
//! (A, B), (A, g) and (B, g) blocks, where A = {m, u, Y, G'} and B = {y, G},
//! which is where the adjoints of the regression operands live. That set is
//! not Hermitian, so it is linear over the complex numbers with no implied
//! conjugates.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use super::density::DensityMatrix;
use super::liouvillian::Flow;
use crate::error::{Error, Result};
use crate::model::{CascadeState, HilbertSpace, PulsePair, SystemParams, C64};

use CascadeState::{GOne as Gs, GTwo as Gp, GZero as G0, YOne as Ys, YZero as Y0, M, U};

pub const ELEMENT_COUNT: usize = 14;

pub type ElementPair = (CascadeState, CascadeState);

pub const PHYSICAL: [ElementPair; ELEMENT_COUNT] = [
    (M, M),
    (U, U),
    (Ys, Ys),
    (Gp, Gp),
    (Gs, Gs),
    (Y0, Y0),
    (G0, G0),
    (U, M),
    (U, Ys),
    (Ys, Gp),
    (M, Ys),
    (U, Gp),
    (M, Gp),
    (Y0, Gs),
];

pub const SHIFTED: [ElementPair; ELEMENT_COUNT] = [
    (Ys, Y0),
    (Gp, Gs),
    (Gs, G0),
    (U, Y0),
    (Gp, Y0),
    (Ys, Gs),
    (Y0, G0),
    (M, Y0),
    (U, Gs),
    (M, Gs),
    (Gp, G0),
    (Ys, G0),
    (U, G0),
    (M, G0),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementSet {
    Physical,
    Shifted,
}

impl ElementSet {
    pub fn elements(self) -> &'static [ElementPair; ELEMENT_COUNT] {
        match self {
            ElementSet::Physical => &PHYSICAL,
            ElementSet::Shifted => &SHIFTED,
        }
    }

    fn implies_conjugates(self) -> bool {
        self == ElementSet::Physical
    }

    /// Slot of (row, col) and whether it is stored conjugated.
    pub fn locate(self, row: CascadeState, col: CascadeState) -> Option<(usize, bool)> {
        let els = self.elements();
        if let Some(k) = els.iter().position(|&p| p == (row, col)) {
            return Some((k, false));
        }
        if self.implies_conjugates() {
            if let Some(k) = els.iter().position(|&p| p == (col, row)) {
                return Some((k, true));
            }
        }
        None
    }
}

pub fn element_label(row: CascadeState, col: CascadeState) -> String {
    format!("{}{}", row.label(), col.label())
}

/// Values of one element set, addressable by cascade pair or label.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochState {
    set: ElementSet,
    values: [C64; ELEMENT_COUNT],
}

impl BlochState {
    pub fn zero(set: ElementSet) -> Self {
        Self {
            set,
            values: [C64::new(0.0, 0.0); ELEMENT_COUNT],
        }
    }

    pub fn set(&self) -> ElementSet {
        self.set
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn get(&self, row: CascadeState, col: CascadeState) -> Option<C64> {
        self.set
            .locate(row, col)
            .map(|(k, c)| if c { self.values[k].conj() } else { self.values[k] })
    }

    /// Every label of the set must be present; unknown labels are rejected.
    pub fn from_labels(set: ElementSet, map: &BTreeMap<String, C64>) -> Result<Self> {
        let mut out = Self::zero(set);
        for (k, &(r, c)) in set.elements().iter().enumerate() {
            let label = element_label(r, c);
            out.values[k] = *map.get(&label).ok_or(Error::MissingElement(label))?;
        }
        if let Some(extra) = map
            .keys()
            .find(|l| !set.elements().iter().any(|&(r, c)| element_label(r, c) == **l))
        {
            return Err(Error::MissingElement(format!("unknown element label {extra}")));
        }
        Ok(out)
    }

    pub fn to_labels(&self) -> BTreeMap<String, C64> {
        self.set
            .elements()
            .iter()
            .zip(&self.values)
            .map(|(&(r, c), &v)| (element_label(r, c), v))
            .collect()
    }

    /// Reads the set from a full matrix. Any nonzero entry the set cannot
    /// represent is an error.
    pub fn from_density(set: ElementSet, rho: &DensityMatrix) -> Result<Self> {
        let space = rho.space();
        let mut out = Self::zero(set);
        for (k, &(r, c)) in set.elements().iter().enumerate() {
            out.values[k] = rho.get(space.cascade_index(r), space.cascade_index(c));
        }
        let idx: Vec<(usize, CascadeState)> = CascadeState::ALL.iter().map(|&s| (space.cascade_index(s), s)).collect();
        let lookup = |i: usize| idx.iter().find(|p| p.0 == i).map(|p| p.1);
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                let v = rho.get(i, j);
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let representable = match (lookup(i), lookup(j)) {
                    (Some(a), Some(b)) => set.locate(a, b).is_some(),
                    _ => false,
                };
                if !representable {
                    let (li, ni) = space.state(i);
                    let (lj, nj) = space.state(j);
                    return Err(Error::MissingElement(format!(
                        "|{}{}><{}{}| = {v} lies outside the element set",
                        li.label(),
                        ni,
                        lj.label(),
                        nj
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn to_density(&self, space: &HilbertSpace) -> DensityMatrix {
        let d = space.dim();
        let mut m = crate::model::OperatorMatrix::zeros(d, d);
        for (&(r, c), &v) in self.set.elements().iter().zip(&self.values) {
            let (i, j) = (space.cascade_index(r), space.cascade_index(c));
            m[(i, j)] = v;
            if self.set.implies_conjugates() && i != j {
                m[(j, i)] = v.conj();
            }
        }
        DensityMatrix::new(space.clone(), m, self.set.implies_conjugates()).expect("built from the space dimension")
    }
}

const I: C64 = C64::new(0.0, 1.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Equations of motion of the physical set.
#[derive(Clone, Debug)]
pub struct PhysicalBloch {
    pub params: SystemParams,
}

impl Flow for PhysicalBloch {
    fn len(&self) -> usize {
        ELEMENT_COUNT
    }

    fn derivative(&self, omega: f64, y: &[C64], dy: &mut [C64]) {
        let p = &self.params;
        let (g1, g2, k) = (p.g1, p.g2 * SQRT_2, p.kappa);
        let (c1, c2, gd) = (p.gamma1, p.gamma2, p.gamma_d);
        let [mm, uu, yy1, gpgp, gg1, yy0, _gg0, um, uy, ygp, my, ugp, mgp, yg] =
            <[C64; ELEMENT_COUNT]>::try_from(y).expect("14 physical elements");
        let (mu, yu, gpy, ym) = (um.conj(), uy.conj(), ygp.conj(), my.conj());
        let gy = yg.conj();
        let w = re(omega);

        dy[0] = I * w * mu - I * w * um + re(c1) * uu;
        dy[1] = -I * w * mu + I * w * um - I * g1 * yu + I * g1 * uy - re(2.0 * c1) * uu;
        dy[2] = I * g1 * yu - I * g1 * uy - I * g2 * gpy + I * g2 * ygp - re(c2 + k) * yy1;
        dy[3] = I * g2 * gpy - I * g2 * ygp - re(2.0 * k) * gpgp;
        dy[4] = I * p.g2 * gy - I * p.g2 * yg + re(c2) * yy1 + re(2.0 * k) * gpgp - re(k) * gg1;
        dy[5] = -I * p.g2 * gy + I * p.g2 * yg + re(c1) * uu - re(c2) * yy0 + re(k) * yy1;
        dy[6] = re(c2) * yy0 + re(k) * gg1;
        dy[7] = -I * w * mm + I * w * uu - I * g1 * ym + C64::new(-c1 - 1.5 * gd, p.delta_p) * um;
        dy[8] = -I * w * my - I * g1 * yy1
            + I * g1 * uu
            + I * g2 * ugp
            + C64::new(-c1 - 0.5 * c2 - 1.5 * gd - 0.5 * k, p.delta1) * uy;
        dy[9] = -I * g1 * ugp - I * g2 * gpgp + I * g2 * yy1 + C64::new(-0.5 * c2 - 0.5 * gd - 1.5 * k, p.delta2) * ygp;
        dy[10] =
            -I * w * uy + I * g1 * mu + I * g2 * mgp + C64::new(-0.5 * c2 - gd - 0.5 * k, p.delta1 - p.delta_p) * my;
        dy[11] = -I * w * mgp - I * g1 * ygp + I * g2 * uy + C64::new(-c1 - gd - k, p.delta1 + p.delta2) * ugp;
        dy[12] = -I * w * ugp + I * g2 * my + C64::new(-0.5 * gd - k, p.delta1 + p.delta2 - p.delta_p) * mgp;
        dy[13] = -I * p.g2 * gg1
            + I * p.g2 * yy0
            + re(SQRT_2 * k) * ygp
            + C64::new(-0.5 * c2 - 0.5 * gd - 0.5 * k, p.delta2) * yg;
    }
}

/// Equations of motion of the shifted set.
#[derive(Clone, Debug)]
pub struct ShiftedBloch {
    pub params: SystemParams,
}

impl Flow for ShiftedBloch {
    fn len(&self) -> usize {
        ELEMENT_COUNT
    }

    fn derivative(&self, omega: f64, y: &[C64], dy: &mut [C64]) {
        let p = &self.params;
        let (g1, g2, s2g2, k) = (p.g1, p.g2, p.g2 * SQRT_2, p.kappa);
        let (c1, c2, gd) = (p.gamma1, p.gamma2, p.gamma_d);
        let [yy, gpg, gg, uy, gpy, yg, y0g, my, ug, mg, gpg0, yg0, ug0, mg0] =
            <[C64; ELEMENT_COUNT]>::try_from(y).expect("14 shifted elements");
        let w = re(omega);
        let (d1, d2, dp) = (p.delta1, p.delta2, p.delta_p);

        dy[0] = -I * g1 * uy - I * s2g2 * gpy + I * g2 * yg - re(c2 + 0.5 * k) * yy;
        dy[1] = I * g2 * gpy - I * s2g2 * yg - re(1.5 * k) * gpg;
        dy[2] = -I * g2 * y0g + re(c2) * yy + re(SQRT_2 * k) * gpg - re(0.5 * k) * gg;
        dy[3] = -I * w * my - I * g1 * yy + I * g2 * ug + C64::new(-c1 - 0.5 * c2 - 1.5 * gd, d1) * uy;
        dy[4] = I * g2 * gpg - I * s2g2 * yy + C64::new(-0.5 * c2 - 0.5 * gd - k, -d2) * gpy;
        dy[5] = -I * g1 * ug - I * s2g2 * gpg + I * g2 * yy + C64::new(-0.5 * c2 - 0.5 * gd - k, d2) * yg;
        dy[6] = -I * g2 * gg + re(k) * yg + C64::new(-0.5 * c2 - 0.5 * gd, d2) * y0g;
        dy[7] = -I * w * uy + I * g2 * mg + C64::new(-0.5 * c2 - gd, d1 - dp) * my;
        dy[8] = -I * w * mg - I * g1 * yg + I * g2 * uy + C64::new(-c1 - gd - 0.5 * k, d1 + d2) * ug;
        dy[9] = -I * w * ug + I * g2 * my + C64::new(-0.5 * gd - 0.5 * k, d1 + d2 - dp) * mg;
        dy[10] = -I * s2g2 * yg0 - re(k) * gpg0;
        dy[11] = -I * g1 * ug0 - I * s2g2 * gpg0 + C64::new(-0.5 * c2 - 0.5 * gd - 0.5 * k, d2) * yg0;
        dy[12] = -I * w * mg0 - I * g1 * yg0 + C64::new(-c1 - gd, d1 + d2) * ug0;
        dy[13] = -I * w * ug0 + C64::new(-0.5 * gd, d1 + d2 - dp) * mg0;
    }
}

impl BlochState {
    /// Equations of motion matching this state's element set.
    pub fn flow(&self, params: &SystemParams) -> Box<dyn Flow + Send + Sync> {
        match self.set {
            ElementSet::Physical => Box::new(PhysicalBloch { params: params.clone() }),
            ElementSet::Shifted => Box::new(ShiftedBloch { params: params.clone() }),
        }
    }
}

/// Time derivative of the physical set at `t`, keyed by element label.
pub fn bloch_rhs_truncated(
    state: &BTreeMap<String, C64>,
    t: f64,
    params: &SystemParams,
    pulses: &PulsePair,
) -> Result<BTreeMap<String, C64>> {
    let s = BlochState::from_labels(ElementSet::Physical, state)?;
    let mut d = BlochState::zero(ElementSet::Physical);
    PhysicalBloch { params: params.clone() }.derivative(pulses.envelope(t), &s.values, &mut d.values);
    Ok(d.to_labels())
}
