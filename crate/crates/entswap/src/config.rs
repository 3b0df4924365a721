//! TOML run configuration. Every section is optional; command-line flags
//! override whatever is set here.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use entswap_core::mixture::{EmConfig, Family};
use entswap_core::swap::Role;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::formats;
use crate::provider::ProviderConfig;
use crate::rules::RuleSpec;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker cap; 0 or absent means the rayon default.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub mixture: MixtureSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub select: SelectSection,
    /// Roles of categories outside the swapped subset: F or C.
    #[serde(default)]
    pub roles: BTreeMap<String, Role>,
    #[serde(default)]
    pub suppress: Vec<RuleSpec>,
    #[serde(default)]
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    /// Breakpoint percentile; when set, input records are sentences and are
    /// merged into chunks per document.
    #[serde(default)]
    pub chunk_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    pub family: Family,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MixtureSection {
    fn default() -> Self {
        let em = EmConfig::new(Family::SCauchy, 10);
        MixtureSection {
            family: em.family,
            k: em.k,
            eps: em.eps,
            tol: em.tol,
            max_iter: em.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub eligible: Vec<String>,
    pub subset_size: usize,
    pub max_swaps: usize,
    #[serde(rename = "N")]
    pub n_pops: Vec<f64>,
    pub same_cluster: bool,
    /// Monte Carlo draws per release when a release is scored on its own.
    #[serde(rename = "M")]
    pub m: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eligible: Vec::new(),
            subset_size: 2,
            max_swaps: 30,
            n_pops: vec![1e10],
            same_cluster: true,
            m: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectSection {
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub risk_cap: Option<f64>,
    #[serde(default, rename = "N")]
    pub n_pop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub ingest_report: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
    pub sweep_report: Option<PathBuf>,
    pub release: Option<PathBuf>,
    pub swapped: Option<PathBuf>,
    pub swap_log: Option<PathBuf>,
    pub eval_report: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| AppError::parse(origin, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config = RunConfig::parse(&formats::read_to_string(path)?, path)?;
        // relative paths in the file resolve against its directory
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(config.rebase(base))
    }

    fn rebase(mut self, base: &Path) -> Self {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.input,
            &mut p.corpus,
            &mut p.ingest_report,
            &mut p.model,
            &mut p.trace,
            &mut p.sweep,
            &mut p.sweep_report,
            &mut p.release,
            &mut p.swapped,
            &mut p.swap_log,
            &mut p.eval_report,
        ] {
            fix(slot);
        }
        fix(&mut self.provider.cache_path);
        self
    }

    /// Checks the parts that do not depend on the corpus.
    pub fn validate(&self) -> Result<()> {
        self.provider.validate()?;
        let m = &self.mixture;
        if m.k == 0 {
            return Err(AppError::Config("mixture.K must be positive".into()));
        }
        if !(m.eps > 0.0 && m.eps * m.k as f64 <= 1.0) {
            return Err(AppError::Config(format!("mixture.eps {} infeasible for K = {}", m.eps, m.k)));
        }
        if !(m.tol > 0.0) || m.max_iter == 0 {
            return Err(AppError::Config("mixture.tol and mixture.max_iter must be positive".into()));
        }
        let s = &self.sweep;
        if s.subset_size == 0 || s.m == 0 {
            return Err(AppError::Config("sweep.subset_size and sweep.M must be positive".into()));
        }
        if s.n_pops.is_empty() || s.n_pops.iter().any(|n| !(n.is_finite() && *n >= 1.0)) {
            return Err(AppError::Config("sweep.N must list finite population sizes ≥ 1".into()));
        }
        for (cat, role) in &self.roles {
            if matches!(role, Role::S) {
                return Err(AppError::Config(format!(
                    "roles.{cat}: S is assigned by the sweep, configure eligible categories instead"
                )));
            }
        }
        if let Some(t) = self.ingest.chunk_threshold {
            if !(0.0..=100.0).contains(&t) {
                return Err(AppError::Config(format!("ingest.chunk_threshold {t} outside [0, 100]")));
            }
        }
        if let Some(a) = self.select.a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(AppError::Config(format!("select.a {a} must be positive")));
            }
        }
        if let Some(cap) = self.select.risk_cap {
            if !(0.0..=1.0).contains(&cap) {
                return Err(AppError::Config(format!("select.risk_cap {cap} outside [0, 1]")));
            }
        }
        for rule in &self.suppress {
            crate::rules::Rule::from_spec(rule)?;
        }
        Ok(())
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            family: self.mixture.family,
            k: self.mixture.k,
            eps: self.mixture.eps,
            tol: self.mixture.tol,
            max_iter: self.mixture.max_iter,
            seed: self.seed,
        }
    }
}
