use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use rex_core::info::{IcMode, Normalization};
use rex_core::pathfinder::{PolicyConfig, TrainConfig};
use rex_core::seed::derive;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyFiles {
    /// `child<TAB>parent` lines.
    pub class_edges: PathBuf,
    /// `entity<TAB>class` lines.
    pub annotations: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcSection {
    pub mode: IcMode,
    pub normalization: Normalization,
}

impl Default for IcSection {
    fn default() -> Self {
        Self {
            mode: IcMode::CicByRelation,
            normalization: Normalization::MaxSurprisal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    /// `None` is ceil(10% of the entity count).
    pub k: Option<usize>,
    /// `None` derives the seed from the top-level seed.
    pub seed: Option<u64>,
    pub max_iters: usize,
    /// Use degree-profile embeddings when no embedding file is given.
    pub fallback_embeddings: bool,
    pub fallback_dim: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self {
            k: None,
            seed: None,
            max_iters: 100,
            fallback_embeddings: true,
            fallback_dim: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub beam_width: usize,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self { beam_width: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Independent train + evaluate runs per ablation variant.
    pub runs: usize,
    pub histogram_bins: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            runs: 5,
            histogram_bins: 10,
        }
    }
}

/// One experiment. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub triples: PathBuf,
    #[serde(default)]
    pub entity_types: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub ontology: Option<OntologyFiles>,
    #[serde(default)]
    pub train_split: Option<PathBuf>,
    #[serde(default)]
    pub test_split: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth_metapaths: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub add_inverse_edges: bool,
    #[serde(default)]
    pub ic: IcSection,
    #[serde(default)]
    pub clustering: ClusterSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub policy: PolicyConfig,
    /// `training.seed` is replaced by a stream derived from `seed`.
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub beam: BeamSection,
    #[serde(default)]
    pub evaluation: EvalSection,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_true() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// `dotted.key=value`; the value is JSON, or a bare string.
    pub set: Vec<String>,
}

fn apply_set(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set `{assignment}`: expected key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("--set `{assignment}`: empty key segment")));
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("--set `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn check_file(what: &str, p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} `{}` does not exist", p.display())))
    }
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        for s in &overrides.set {
            apply_set(&mut doc, s)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Config(format!("config: {e}")))?;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.output_dir = out.clone();
        }
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.triples);
        fix(&mut self.output_dir);
        for p in [
            &mut self.entity_types,
            &mut self.embeddings,
            &mut self.train_split,
            &mut self.test_split,
            &mut self.ground_truth_metapaths,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(o) = &mut self.ontology {
            fix(&mut o.class_edges);
            fix(&mut o.annotations);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_file("triples", &self.triples)?;
        let optional = [
            ("entity_types", &self.entity_types),
            ("embeddings", &self.embeddings),
            ("train_split", &self.train_split),
            ("test_split", &self.test_split),
            ("ground_truth_metapaths", &self.ground_truth_metapaths),
        ];
        for (what, p) in optional {
            if let Some(p) = p {
                check_file(what, p)?;
            }
        }
        if let Some(o) = &self.ontology {
            check_file("ontology.class_edges", &o.class_edges)?;
            check_file("ontology.annotations", &o.annotations)?;
        }
        if self.embeddings.is_none() && !self.clustering.fallback_embeddings {
            return Err(CliError::Config(
                "no embedding file given and clustering.fallback_embeddings is false".into(),
            ));
        }
        let c = &self.clustering;
        if c.k == Some(0) || c.max_iters == 0 || c.fallback_dim < 2 {
            return Err(CliError::Config(
                "clustering: k and max_iters must be positive, fallback_dim at least 2".into(),
            ));
        }
        let p = &self.policy;
        if [p.entity_dim, p.relation_dim, p.hidden_dim, p.mlp_dim].contains(&0) {
            return Err(CliError::Config("policy dimensions must be positive".into()));
        }
        self.training.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.beam.beam_width == 0 {
            return Err(CliError::Config("beam.beam_width must be positive".into()));
        }
        if self.evaluation.runs == 0 || self.evaluation.histogram_bins == 0 {
            return Err(CliError::Config(
                "evaluation.runs and evaluation.histogram_bins must be positive".into(),
            ));
        }
        if let Normalization::Fixed(z) = self.ic.normalization {
            if !(z.is_finite() && z >= 0.0) {
                return Err(CliError::Config("ic.normalization fixed value must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, what: &str, p: &'a Option<PathBuf>) -> Result<&'a Path, CliError> {
        p.as_deref()
            .ok_or_else(|| CliError::Config(format!("this command needs `{what}` in the config")))
    }

    pub fn cluster_seed(&self) -> u64 {
        self.clustering.seed.unwrap_or_else(|| derive(self.seed, "clusters"))
    }

    pub fn embedding_seed(&self) -> u64 {
        derive(self.seed, "embeddings")
    }

    /// Training configuration with its stream seed derived from `seed`.
    pub fn training_for(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed: derive(seed, "train"),
            ..self.training.clone()
        }
    }

    pub fn policy_seed(&self, seed: u64) -> u64 {
        derive(seed, "policy-init")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("kg.tsv"), "a\tr\tb\n").unwrap();
        dir
    }

    #[test]
    fn minimal_config_gets_defaults_and_resolves_paths() {
        let dir = base();
        let cfg = RunConfig::parse(r#"{"triples": "kg.tsv"}"#, dir.path(), &Overrides::default())
            .unwrap();
        assert_eq!(cfg.triples, dir.path().join("kg.tsv"));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
        assert_eq!(cfg.ic.mode, IcMode::CicByRelation);
        assert_eq!(cfg.training, TrainConfig::default());
        assert!(cfg.add_inverse_edges);
    }

    #[test]
    fn set_and_seed_overrides() {
        let dir = base();
        let o = Overrides {
            seed: Some(9),
            out: Some(PathBuf::from("/tmp/x")),
            set: vec![
                "training.epochs=3".into(),
                "ic.mode=ic".into(),
                "clustering.k=4".into(),
            ],
        };
        let cfg = RunConfig::parse(r#"{"triples": "kg.tsv", "seed": 1}"#, dir.path(), &o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.training.epochs, 3);
        assert_eq!(cfg.ic.mode, IcMode::Ic);
        assert_eq!(cfg.clustering.k, Some(4));
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = base();
        let none = Overrides::default();
        for bad in [
            r#"{"triples": "missing.tsv"}"#,
            r#"{"triples": "kg.tsv", "colour": 1}"#,
            r#"{"triples": "kg.tsv", "training": {"rollouts": 0}}"#,
            r#"{"triples": "kg.tsv", "clustering": {"fallback_embeddings": false}}"#,
            r#"{"triples": "kg.tsv", "beam": {"beam_width": 0}}"#,
            r#"{"triples": "kg.tsv", "embeddings": "nope.tsv"}"#,
            r#"not json"#,
        ] {
            let err = RunConfig::parse(bad, dir.path(), &none).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
        let o = Overrides {
            set: vec!["novalue".into()],
            ..Overrides::default()
        };
        assert!(RunConfig::parse(r#"{"triples": "kg.tsv"}"#, dir.path(), &o).is_err());
    }

    #[test]
    fn derived_seeds_differ_per_phase() {
        let dir = base();
        let cfg = RunConfig::parse(r#"{"triples": "kg.tsv"}"#, dir.path(), &Overrides::default())
            .unwrap();
        let seeds = [
            cfg.cluster_seed(),
            cfg.embedding_seed(),
            cfg.training_for(0).seed,
            cfg.policy_seed(0),
        ];
        let distinct: std::collections::HashSet<_> = seeds.iter().collect();
        assert_eq!(distinct.len(), 4);
    }
}
