//! Campaign configuration: a JSON file, then `ETUQ_*` environment variables,
//! then command-line flags, each overriding the previous.

use crate::error::CliError;
use etuq::fit::{desk, EtModel, ModelDef};
use etuq::sparse_grid::Growth;
use etuq::tensor_train::GreedyOptions;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Mc,
    Sg,
    Tt,
    Compare,
}

impl FromStr for MethodChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "mc" => Ok(MethodChoice::Mc),
            "sg" => Ok(MethodChoice::Sg),
            "tt" => Ok(MethodChoice::Tt),
            "compare" => Ok(MethodChoice::Compare),
            other => Err(CliError::Config(format!("unknown method '{other}' (mc, sg, tt, compare)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 20_000, seed: 20_240_917 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgConfig {
    pub levels: Vec<u32>,
    pub growth: Growth,
}

impl Default for SgConfig {
    fn default() -> Self {
        SgConfig { levels: vec![1, 2], growth: Growth::Smolyak }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TtConfig {
    pub levels: Vec<u32>,
    /// Sweep budgets; each level runs once with the largest and reports every listed budget.
    pub sweeps: Vec<usize>,
    pub tol: f64,
    pub rank_cap: usize,
    pub decimation_tol: f64,
    pub seed: u64,
}

impl Default for TtConfig {
    fn default() -> Self {
        let g = GreedyOptions::default();
        TtConfig {
            levels: vec![1],
            sweeps: (1..=10).collect(),
            tol: g.tol,
            rank_cap: g.rank_cap,
            decimation_tol: g.decimation_tol,
            seed: g.seed,
        }
    }
}

impl TtConfig {
    pub fn greedy_options(&self) -> GreedyOptions {
        GreedyOptions {
            sweeps: self.sweeps.iter().copied().max().unwrap_or(1),
            tol: self.tol,
            rank_cap: self.rank_cap,
            decimation_tol: self.decimation_tol,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    /// Model definition file; the built-in desk model when absent.
    pub model: Option<PathBuf>,
    pub method: MethodChoice,
    pub mc: McConfig,
    pub sg: SgConfig,
    pub tt: TtConfig,
    pub out: PathBuf,
    pub threads: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            model: None,
            method: MethodChoice::Compare,
            mc: McConfig::default(),
            sg: SgConfig::default(),
            tt: TtConfig::default(),
            out: PathBuf::from("etuq-out"),
            threads: 1,
        }
    }
}

/// Values given on the command line or in the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub model: Option<PathBuf>,
    pub method: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub samples: Option<usize>,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies overrides; `seed` sets the Monte Carlo seed.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(m) = &o.model {
            self.model = Some(m.clone());
        }
        if let Some(m) = &o.method {
            self.method = m.parse()?;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(s) = o.seed {
            self.mc.seed = s;
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(n) = o.samples {
            self.mc.samples = n;
        }
        Ok(())
    }

    pub fn runs_mc(&self) -> bool {
        matches!(self.method, MethodChoice::Mc | MethodChoice::Compare)
    }

    pub fn runs_sg(&self) -> bool {
        matches!(self.method, MethodChoice::Sg | MethodChoice::Compare)
    }

    pub fn runs_tt(&self) -> bool {
        matches!(self.method, MethodChoice::Tt | MethodChoice::Compare)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.threads == 0 {
            return bad("thread budget must be at least 1".into());
        }
        if let Some(p) = &self.model {
            if !p.is_file() {
                return bad(format!("model file {} does not exist", p.display()));
            }
        }
        if self.runs_mc() && self.mc.samples < 2 {
            return bad(format!("mc.samples must be at least 2, got {}", self.mc.samples));
        }
        if self.runs_sg() && self.sg.levels.is_empty() {
            return bad("sg.levels is empty".into());
        }
        if self.runs_tt() {
            if self.tt.levels.is_empty() || self.tt.sweeps.is_empty() {
                return bad("tt.levels and tt.sweeps must be non-empty".into());
            }
            if self.tt.levels.contains(&0) || self.tt.sweeps.contains(&0) {
                return bad("tt levels and sweep budgets start at 1".into());
            }
            if self.tt.rank_cap == 0 || !(self.tt.tol >= 0.0) || !(self.tt.decimation_tol >= 0.0) {
                return bad("tt.tol and tt.decimation_tol must be >= 0 and tt.rank_cap >= 1".into());
            }
        }
        Ok(())
    }

    pub fn model_def(&self) -> Result<ModelDef, CliError> {
        match &self.model {
            Some(p) => ModelDef::load(p).map_err(|e| CliError::Config(format!("model {}: {e}", p.display()))),
            None => Ok(desk::default_desk_def()),
        }
    }

    pub fn build_model(&self) -> Result<EtModel, CliError> {
        EtModel::new(self.model_def()?).map_err(|e| CliError::Config(format!("model: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let c = CampaignConfig::from_json(r#"{"method": "sg", "sg": {"levels": [1]}}"#).unwrap();
        assert_eq!(c.method, MethodChoice::Sg);
        assert_eq!(c.sg.levels, vec![1]);
        assert_eq!(c.sg.growth, Growth::Smolyak);
        assert_eq!(c.mc, McConfig::default());
        assert!(CampaignConfig::from_json(r#"{"methd": "sg"}"#).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = CampaignConfig::default();
        c.apply(&Overrides { method: Some("mc".into()), seed: Some(5), threads: Some(3), ..Default::default() })
            .unwrap();
        assert_eq!((c.method, c.mc.seed, c.threads), (MethodChoice::Mc, 5, 3));
        assert!(c.apply(&Overrides { method: Some("qmc".into()), ..Default::default() }).is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = CampaignConfig { method: MethodChoice::Mc, ..Default::default() };
        c.mc.samples = 0;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        c.mc.samples = 10;
        c.threads = 0;
        assert!(c.validate().is_err());
        c.threads = 1;
        c.validate().unwrap();
        c.method = MethodChoice::Tt;
        c.tt.sweeps.clear();
        assert!(c.validate().is_err());
        c.tt.sweeps = vec![2];
        c.model = Some("/nonexistent/model.json".into());
        assert!(c.validate().is_err());
    }
}
