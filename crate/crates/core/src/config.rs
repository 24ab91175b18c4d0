//! Run configuration, read from sectioned TOML. Every key is optional and
//! falls back to the reference two-pulse configuration; unknown keys are
//! errors.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{HilbertSpace, PulsePair, SystemParams, REFERENCE_TAU_P};
use crate::propagator::StepperConfig;
use crate::quadrature::Quadrature;
use crate::regression::{Branch, EngineOptions, G3Request, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HilbertConfig {
    pub max_photons: usize,
}

impl Default for HilbertConfig {
    fn default() -> Self {
        Self { max_photons: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct G3Config {
    /// Interferometer delay T.
    pub delay: f64,
    pub t_bin: f64,
    pub phi: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Grid spacing of t′, τ′ and τ.
    pub step: f64,
    /// Spacing used with `--fast`.
    pub fast_step: f64,
    /// Defaults to the first pulse center ± 3 τ_p, clipped at 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tprime_window: Option<[f64; 2]>,
    pub quadrature: Quadrature,
    pub branch: Branch,
    pub cache_baseline: bool,
}

impl Default for G3Config {
    fn default() -> Self {
        let t_bin = 3.0 * REFERENCE_TAU_P;
        let delay = 14.0 * PI;
        Self {
            delay,
            t_bin,
            phi: 0.0,
            tau_min: -t_bin,
            tau_max: 2.0 * delay + t_bin,
            step: REFERENCE_TAU_P / 8.0,
            fast_step: REFERENCE_TAU_P / 4.0,
            tprime_window: None,
            quadrature: Quadrature::Trapezoid,
            branch: Branch::Full,
            cache_baseline: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub phi_points: usize,
    pub gamma_d_values: Vec<f64>,
    pub delay_candidates: Vec<f64>,
    /// End of the population run.
    pub horizon: f64,
    /// |dρ_mm/dt| below which ρ_mm counts as flat.
    pub plateau_threshold: f64,
    pub biexciton_bound: f64,
    /// Bound on max ρ_G'G' for the photon cutoff to count as sufficient.
    pub g_two_bound: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            phi_points: 13,
            gamma_d_values: (0..=10).map(|i| 0.005 * i as f64).collect(),
            delay_candidates: (0..=8).map(|i| (12.0 + 0.5 * i as f64) * PI).collect(),
            horizon: 16.0 * REFERENCE_TAU_P,
            plateau_threshold: 1e-4,
            biexciton_bound: 0.1,
            g_two_bound: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemParams,
    pub pulses: PulsePair,
    pub stepper: StepperConfig,
    pub hilbert: HilbertConfig,
    pub g3: G3Config,
    pub analysis: AnalysisConfig,
    pub run: RunSection,
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Canonical form: every key written out, in declaration order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Canonical form without the [run] section, which only says where and
    /// how fast to compute.
    pub fn physics_toml(&self) -> String {
        let mut v = toml::Table::try_from(self).expect("config serializes");
        v.remove("run");
        toml::to_string(&v).expect("config serializes")
    }

    /// SHA-256 of [`Self::physics_toml`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.physics_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.pulses.validate()?;
        self.stepper.validate()?;
        HilbertSpace::new(self.hilbert.max_photons)?;
        self.request(false)?.validate()?;
        self.request(true)?.validate()?;
        let a = &self.analysis;
        if a.phi_points < 4 {
            return Err(Error::param(
                "analysis.phi_points",
                format!("need at least 4, got {}", a.phi_points),
            ));
        }
        if a.gamma_d_values.iter().any(|&g| !(g >= 0.0)) || a.gamma_d_values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("analysis.gamma_d_values", "must be >= 0 and ascending"));
        }
        if a.delay_candidates.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::param("analysis.delay_candidates", "must be positive"));
        }
        if !(a.horizon > self.pulses.center2) {
            return Err(Error::param("analysis.horizon", "must lie after the second pulse"));
        }
        for (name, v) in [
            ("analysis.plateau_threshold", a.plateau_threshold),
            ("analysis.biexciton_bound", a.biexciton_bound),
            ("analysis.g_two_bound", a.g_two_bound),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn step(&self, fast: bool) -> f64 {
        if fast {
            self.g3.fast_step
        } else {
            self.g3.step
        }
    }

    /// The G³ request on the chosen grid; the t′ window is shrunk to the
    /// nearest lattice nodes.
    pub fn request(&self, fast: bool) -> Result<G3Request> {
        let step = self.step(fast);
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::param("g3.step", format!("must be > 0, got {step}")));
        }
        let mut req = G3Request::around_pulses(&self.pulses, self.g3.delay, step);
        if let Some([a, b]) = self.g3.tprime_window {
            req.tprime_window = [(a / step - 1e-6).ceil() * step, (b / step + 1e-6).floor() * step];
        }
        req.t_bin = self.g3.t_bin;
        req.phi = self.g3.phi;
        req.quadrature = self.g3.quadrature;
        req.branch = self.g3.branch;
        req.tau_grid = req.lattice_range(self.g3.tau_min, self.g3.tau_max);
        Ok(req)
    }

    pub fn scenario(&self, fast: bool) -> Result<Scenario> {
        Ok(Scenario {
            max_photons: self.hilbert.max_photons,
            params: self.system.clone(),
            pulses: self.pulses.clone(),
            stepper: self.stepper.clone(),
            request: self.request(fast)?,
            engine: EngineOptions {
                cache_baseline: self.g3.cache_baseline,
            },
        })
    }

    /// Comment lines for output files: the hash, then the physics config.
    pub fn header_lines(&self, fast: bool) -> Vec<String> {
        let mut out = vec![format!("config_hash = {}", self.hash()), format!("fast = {fast}")];
        let mut section = String::new();
        for line in self.physics_toml().lines().map(str::trim).filter(|l| !l.is_empty()) {
            if line.starts_with('[') {
                section = line.trim_matches(|c| c == '[' || c == ']').to_string();
            } else {
                out.push(format!("{section}.{line}"));
            }
        }
        out
    }
}
