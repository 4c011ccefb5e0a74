//! Run configuration: one JSON file drives every pipeline stage.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use fhsim_core::model::{FockState, HubbardParams, ModelConfig};
use fhsim_core::ppp::TruncationPolicy;
use fhsim_core::statevector::NoiseModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub backend: Backend,
    /// Shots per recorded step; absent means exact expectation values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    /// Stochastic trajectories used when gate noise is active.
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSection>,
    #[serde(default)]
    pub mitigation: MitigationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

fn default_trajectories() -> usize {
    64
}

fn default_out_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Statevector,
    Ppp,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSection {
    #[serde(default)]
    pub p_dep2q: f64,
    #[serde(default)]
    pub p10: f64,
    #[serde(default)]
    pub p01: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationSection {
    pub mw: u32,
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mw_xy: Option<u32>,
}

fn default_delta_min() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MitigationSection {
    #[serde(default)]
    pub rem: bool,
    /// Confidence parameter for decay recovery; absent disables the stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_recovery: Option<f64>,
    #[serde(default)]
    pub postselect: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnalysisSection {
    pub sigma: f64,
    pub p: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection { sigma: 1.0, p: 0.3 }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).context("parsing config JSON")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.params()?;
        self.initial_state()?;
        if self.dt <= 0.0 {
            bail!("dt must be positive");
        }
        if let Some(n) = &self.noise {
            self.noise_model(n).validate()?;
        }
        if let Some(t) = &self.truncation {
            self.truncation_policy_from(t).validate()?;
        }
        if let Some(c) = self.mitigation.decay_recovery {
            if !(0.0..=1.0).contains(&c) {
                bail!("decay_recovery confidence must be in [0, 1]");
            }
        }
        if !(0.0 < self.analysis.p && self.analysis.p < 1.0) {
            bail!("analysis threshold p must be in (0, 1)");
        }
        Ok(())
    }

    pub fn params(&self) -> anyhow::Result<HubbardParams> {
        Ok(self.model.params()?)
    }

    pub fn initial_state(&self) -> anyhow::Result<FockState> {
        Ok(self.model.initial_state()?)
    }

    fn noise_model(&self, section: &NoiseSection) -> NoiseModel {
        NoiseModel {
            p_dep2q: section.p_dep2q,
            p10: section.p10,
            p01: section.p01,
            seed: self.seed,
        }
    }

    pub fn noise(&self) -> NoiseModel {
        match &self.noise {
            Some(section) => self.noise_model(section),
            None => NoiseModel::noiseless(self.seed),
        }
    }

    fn truncation_policy_from(&self, t: &TruncationSection) -> TruncationPolicy {
        TruncationPolicy {
            mw: t.mw,
            delta_min: t.delta_min,
            mw_xy: t.mw_xy,
        }
    }

    pub fn truncation_policy(&self) -> TruncationPolicy {
        match &self.truncation {
            Some(t) => self.truncation_policy_from(t),
            None => TruncationPolicy::disabled(),
        }
    }

    /// Canonical JSON used for hashing in manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
