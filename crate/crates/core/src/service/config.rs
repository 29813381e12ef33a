use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::svm::SvmConfig;
use crate::vector::FeatureSetMask;

/// Input files. Relative paths are resolved against the config file's
/// directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub logs: Option<PathBuf>,
    pub pages: Option<PathBuf>,
    pub registrations: Option<PathBuf>,
    pub geo: Option<PathBuf>,
    pub devices: Option<PathBuf>,
    pub engines: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizerSettings {
    pub mask: FeatureSetMask,
    pub min_token_count: usize,
}

impl Default for VectorizerSettings {
    fn default() -> Self {
        Self {
            mask: FeatureSetMask::ALL,
            min_token_count: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerSettings {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub class_weight_pos: f64,
    pub neg_ratio: f64,
    pub min_visits: usize,
}

impl Default for TrainerSettings {
    fn default() -> Self {
        let svm = SvmConfig::default();
        Self {
            lambda: svm.lambda,
            epochs: svm.epochs,
            seed: svm.seed,
            tolerance: svm.tolerance,
            class_weight_pos: svm.class_weight_pos,
            neg_ratio: 1.0,
            min_visits: 1,
        }
    }
}

impl TrainerSettings {
    pub fn svm(&self) -> SvmConfig {
        SvmConfig {
            lambda: self.lambda,
            epochs: self.epochs,
            seed: self.seed,
            tolerance: self.tolerance,
            class_weight_pos: self.class_weight_pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluatorSettings {
    pub k: usize,
    pub seed: u64,
}

impl Default for EvaluatorSettings {
    fn default() -> Self {
        Self { k: 5, seed: 0 }
    }
}

/// Everything the command-line pipeline reads from its config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub timezone: String,
    pub paths: Paths,
    pub vectorizer: VectorizerSettings,
    pub trainer: TrainerSettings,
    pub evaluator: EvaluatorSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            timezone: "UTC".into(),
            paths: Paths::default(),
            vectorizer: VectorizerSettings::default(),
            trainer: TrainerSettings::default(),
            evaluator: EvaluatorSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, resolves relative paths against its directory
    /// and checks that every referenced input exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.paths.resolve_against(dir);
        }
        cfg.check_paths()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.vectorizer.min_token_count == 0 {
            return bad("vectorizer.min_token_count must be at least 1".into());
        }
        if !(self.trainer.neg_ratio.is_finite() && self.trainer.neg_ratio > 0.0) {
            return bad("trainer.neg_ratio must be positive".into());
        }
        if self.trainer.min_visits == 0 {
            return bad("trainer.min_visits must be at least 1".into());
        }
        if self.evaluator.k < 2 {
            return bad("evaluator.k must be at least 2".into());
        }
        if self.timezone.parse::<chrono_tz::Tz>().is_err() {
            return bad(format!("unknown timezone {:?}", self.timezone));
        }
        self.trainer.svm().validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Every input path that is set must exist; the workspace is created on
    /// demand and is exempt.
    pub fn check_paths(&self) -> Result<(), PipelineError> {
        let p = &self.paths;
        for (name, path) in [
            ("logs", &p.logs),
            ("pages", &p.pages),
            ("registrations", &p.registrations),
            ("geo", &p.geo),
            ("devices", &p.devices),
            ("engines", &p.engines),
            ("stoplist", &p.stoplist),
            ("gazetteer", &p.gazetteer),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(PipelineError::Config(format!("paths.{name}: {} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }
}

impl Paths {
    fn resolve_against(&mut self, dir: &Path) {
        for p in [
            &mut self.logs,
            &mut self.pages,
            &mut self.registrations,
            &mut self.geo,
            &mut self.devices,
            &mut self.engines,
            &mut self.stoplist,
            &mut self.gazetteer,
            &mut self.workspace,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_defaults() {
        let cfg = PipelineConfig::from_toml(
            r#"
timezone = "Europe/Ljubljana"
[paths]
logs = "logs.jsonl"
[vectorizer]
mask = "all_content"
[trainer]
lambda = 0.001
neg_ratio = 2.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.vectorizer.mask, FeatureSetMask::ALL_CONTENT);
        assert_eq!(cfg.vectorizer.min_token_count, 2);
        assert_eq!(cfg.trainer.lambda, 0.001);
        assert_eq!(cfg.trainer.epochs, 50);
        assert_eq!(cfg.evaluator.k, 5);
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[trainer]\nlambda = -1.0",
            "[evaluator]\nk = 1",
            "[vectorizer]\nmask = \"colour\"",
            "timezone = \"Mars/Olympus\"",
            "[trainer]\nbogus = 1",
        ] {
            assert!(PipelineConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn missing_paths_are_reported() {
        let mut cfg = PipelineConfig::default();
        cfg.paths.logs = Some("/definitely/not/here.jsonl".into());
        assert!(matches!(cfg.check_paths(), Err(PipelineError::Config(_))));
    }
}
