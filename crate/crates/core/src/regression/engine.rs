//! Correlators on a uniform time lattice with memoised baseline evolution.
//!
//! All event times are lattice nodes t_k = k h. Each interval is integrated
//! with a fixed number of RK4 substeps whose pump samples come from one shared
//! table, so every chain that crosses interval k performs the same arithmetic
//! there no matter where it started.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::{Mode, ModeOperator};
use crate::error::{Error, Result};
use crate::model::{CascadeState, HilbertSpace, OperatorMatrix, PulsePair, SystemParams, C64};
use crate::propagator::{rk4_step, Flow, Generator, Liouvillian, Rk4Workspace, Support};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Uniform lattice of nodes with the pump sampled at every RK4 stage.
#[derive(Clone, Debug)]
pub struct Lattice {
    step: f64,
    substeps: usize,
    dt: f64,
    intervals: usize,
    drives: Vec<[f64; 3]>,
}

impl Lattice {
    /// Lattice of `intervals` intervals of length `step`, each split into the
    /// fewest substeps no longer than `max_dt`.
    pub fn new(pulses: &PulsePair, step: f64, max_dt: f64, intervals: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Grid(format!("lattice step must be positive, got {step}")));
        }
        if !(max_dt > 0.0) {
            return Err(Error::Grid(format!("substep must be positive, got {max_dt}")));
        }
        let substeps = (step / max_dt - 1e-9).ceil().max(1.0) as usize;
        let dt = step / substeps as f64;
        let mut drives = Vec::with_capacity(intervals * substeps);
        for k in 0..intervals {
            for j in 0..substeps {
                let t = k as f64 * step + j as f64 * dt;
                drives.push([
                    pulses.envelope(t),
                    pulses.envelope(t + 0.5 * dt),
                    pulses.envelope(t + dt),
                ]);
            }
        }
        Ok(Self {
            step,
            substeps,
            dt,
            intervals,
            drives,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Advances `y` from node `k0` to node `k1`.
    pub fn advance<F: Flow + ?Sized>(
        &self,
        flow: &F,
        y: &mut [C64],
        k0: usize,
        k1: usize,
        ws: &mut Rk4Workspace,
    ) -> Result<()> {
        if k1 > self.intervals {
            return Err(Error::Grid(format!(
                "node {k1} beyond the lattice end {}",
                self.intervals
            )));
        }
        for k in k0..k1 {
            for j in 0..self.substeps {
                rk4_step(flow, y, self.drives[k * self.substeps + j], self.dt, ws);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineOptions {
    /// Keep the baseline state at every node instead of recomputing it from t = 0.
    pub cache_baseline: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self { cache_baseline: true }
    }
}

/// Two- and four-time correlators of the cascade photons on a lattice.
pub struct CorrelatorEngine {
    space: HilbertSpace,
    liouvillian: Liouvillian,
    lattice: Lattice,
    a1: OperatorMatrix,
    a2: OperatorMatrix,
    base: Arc<Generator>,
    rho0: Vec<C64>,
    checkpoints: Option<Vec<Vec<C64>>>,
    generators: RwLock<HashMap<Support, Arc<Generator>>>,
}

impl CorrelatorEngine {
    pub fn new(space: &HilbertSpace, params: &SystemParams, lattice: Lattice, options: EngineOptions) -> Result<Self> {
        params.validate()?;
        let liouvillian = Liouvillian::new(params, space);
        let m0 = space.cascade_index(CascadeState::M);
        let start = space.unit(m0, m0);
        let base = Arc::new(liouvillian.restrict(&liouvillian.closure(&Support::of_matrix(&start))));
        let rho0 = base.gather(&start);
        let mut engine = Self {
            space: space.clone(),
            liouvillian,
            lattice,
            a1: ModeOperator::new(Mode::A1, space).matrix,
            a2: ModeOperator::new(Mode::A2, space).matrix,
            base,
            rho0,
            checkpoints: None,
            generators: RwLock::new(HashMap::new()),
        };
        if options.cache_baseline {
            let mut y = engine.rho0.clone();
            let mut ws = Rk4Workspace::new(y.len());
            let mut store = Vec::with_capacity(engine.lattice.intervals + 1);
            store.push(y.clone());
            for k in 0..engine.lattice.intervals {
                engine
                    .lattice
                    .advance(engine.base.as_ref(), &mut y, k, k + 1, &mut ws)?;
                store.push(y.clone());
            }
            engine.checkpoints = Some(store);
        }
        Ok(engine)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Physical state at node `k`.
    pub fn baseline(&self, k: usize) -> Result<OperatorMatrix> {
        if k > self.lattice.intervals {
            return Err(Error::Grid(format!(
                "node {k} beyond the lattice end {}",
                self.lattice.intervals
            )));
        }
        match &self.checkpoints {
            Some(store) => Ok(self.base.scatter(&store[k])),
            None => {
                let mut y = self.rho0.clone();
                let mut ws = Rk4Workspace::new(y.len());
                for i in 0..k {
                    self.lattice.advance(self.base.as_ref(), &mut y, i, i + 1, &mut ws)?;
                }
                Ok(self.base.scatter(&y))
            }
        }
    }

    fn generator(&self, x: &OperatorMatrix) -> Arc<Generator> {
        let seed = Support::of_matrix(x);
        if let Some(g) = self.generators.read().expect("generator cache").get(&seed) {
            return g.clone();
        }
        let g = Arc::new(self.liouvillian.restrict(&self.liouvillian.closure(&seed)));
        self.generators
            .write()
            .expect("generator cache")
            .entry(seed)
            .or_insert(g)
            .clone()
    }

    /// Evolves an operand from node `k0` to node `k1`.
    pub fn propagate(&self, x: &OperatorMatrix, k0: usize, k1: usize) -> Result<OperatorMatrix> {
        if k1 < k0 {
            return Err(Error::TimeOrdering(format!("node {k1} precedes node {k0}")));
        }
        if k0 == k1 || x.iter().all(|&z| z == ZERO) {
            return Ok(x.clone());
        }
        let gen = self.generator(x);
        let mut y = gen.gather(x);
        let mut ws = Rk4Workspace::new(y.len());
        self.lattice.advance(gen.as_ref(), &mut y, k0, k1, &mut ws)?;
        Ok(gen.scatter(&y))
    }

    /// Evolves `x` node by node from `k0` for `n` intervals and evaluates
    /// Tr{x obs} at each of the n + 1 nodes.
    fn observe_row(&self, x: &OperatorMatrix, obs: &OperatorMatrix, k0: usize, n: usize) -> Result<Vec<C64>> {
        if x.iter().all(|&z| z == ZERO) {
            return Ok(vec![ZERO; n + 1]);
        }
        let gen = self.generator(x);
        let probe: Vec<(usize, C64)> = gen
            .support()
            .pairs()
            .enumerate()
            .filter_map(|(p, (i, j))| {
                let c = obs[(j, i)];
                (c != ZERO).then_some((p, c))
            })
            .collect();
        let mut y = gen.gather(x);
        let mut ws = Rk4Workspace::new(y.len());
        let mut out = Vec::with_capacity(n + 1);
        let eval = |y: &[C64]| probe.iter().map(|&(p, c)| c * y[p]).sum::<C64>();
        out.push(eval(&y));
        for k in k0..k0 + n {
            self.lattice.advance(gen.as_ref(), &mut y, k, k + 1, &mut ws)?;
            out.push(eval(&y));
        }
        Ok(out)
    }

    /// D(s, j) = <a1†(t_s) a2†(t_s + j h) a2(t_s + j h) a1(t_s)> for j = 0..=n.
    pub fn g2_row(&self, s: usize, n: usize) -> Result<Vec<C64>> {
        let rho = self.baseline(s)?;
        let x = &self.a1 * rho * self.a1.adjoint();
        let obs = self.a2.adjoint() * &self.a2;
        self.observe_row(&x, &obs, s, n)
    }

    /// Entry j is <a2†(t_r) a1†(t_r + j h) a1(t_r + j h) a2(t_r)>, the
    /// correlator with the second photon detected first, for j = 0..=n.
    pub fn reverse_g2_row(&self, r: usize, n: usize) -> Result<Vec<C64>> {
        let rho = self.baseline(r)?;
        let x = &self.a2 * rho * self.a2.adjoint();
        let obs = self.a1.adjoint() * &self.a1;
        self.observe_row(&x, &obs, r, n)
    }

    /// C(s, j) = <a1†(t_s) a2†(t_s + j h) a2(t_s - T + j h) a1(t_s - T)> with
    /// T = `delay` h, for j = 0..=n. Entries whose first event precedes t = 0
    /// vanish.
    pub fn cross_row(&self, s: usize, delay: usize, n: usize) -> Result<Vec<C64>> {
        if n > delay {
            return Err(Error::Grid(format!(
                "inner delay of {n} nodes exceeds T = {delay} nodes"
            )));
        }
        let mut out = vec![ZERO; n + 1];
        let Some(r) = s.checked_sub(delay) else {
            return Ok(out);
        };
        let rho = self.baseline(r)?;
        let mut x1 = &self.a1 * rho;
        if x1.iter().all(|&z| z == ZERO) {
            return Ok(out);
        }
        let gen1 = self.generator(&x1);
        let mut y1 = gen1.gather(&x1);
        let mut ws = Rk4Workspace::new(y1.len());
        let a2_dag = self.a2.adjoint();
        let a1_dag = self.a1.adjoint();
        for (j, slot) in out.iter_mut().enumerate() {
            if j > 0 {
                self.lattice
                    .advance(gen1.as_ref(), &mut y1, r + j - 1, r + j, &mut ws)?;
                x1 = gen1.scatter(&y1);
            }
            let x2 = &self.a2 * &x1;
            let x2 = self.propagate(&x2, r + j, s)?;
            let x3 = self.propagate(&(x2 * &a1_dag), s, s + j)?;
            *slot = (x3 * &a2_dag).trace();
        }
        Ok(out)
    }

    /// The cross correlator at negative inner delay, time ordered:
    /// <a1†(t_s) a2†(t_s - j h) a1(t_s - T) a2(t_s - T - j h)> for j = 0..=n.
    pub fn reverse_cross_row(&self, s: usize, delay: usize, n: usize) -> Result<Vec<C64>> {
        let mut out = vec![ZERO; n + 1];
        let a1_dag = self.a1.adjoint();
        let a2_dag = self.a2.adjoint();
        for (j, slot) in out.iter_mut().enumerate() {
            let Some(r) = s.checked_sub(delay + j) else {
                continue;
            };
            let x = &self.a2 * self.baseline(r)?;
            let x = self.propagate(&x, r, r + j)?;
            let x = &self.a1 * x;
            let x = self.propagate(&x, r + j, s - j)?;
            let x = x * &a2_dag;
            let x = self.propagate(&x, s - j, s)?;
            *slot = (x * &a1_dag).trace();
        }
        Ok(out)
    }
}
