//! Merges the JSON config file with command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, ValueEnum};
use gunet::training::k_specs_for_depth;
use gunet::{GraphUNetConfig, KSpec, SkipMode, SplitSizes, TrainConfig};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SkipArg {
    Add,
    Concat,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// JSON file with GraphUNetConfig / TrainConfig fields and dataset paths.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dataset_content: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dataset_cites: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub depth: Option<usize>,
    /// Absolute nodes kept per level, e.g. `2000,1000,500,200`.
    #[arg(long, value_name = "LIST", value_delimiter = ',', conflicts_with = "ratios")]
    pub ks: Option<Vec<usize>>,
    /// Fractions kept per level, e.g. `0.9,0.7,0.6,0.5`.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long)]
    pub no_pool: bool,
    #[arg(long, value_enum)]
    pub skip: Option<SkipArg>,
    #[arg(long, value_name = "W")]
    pub self_loop_weight: Option<f64>,
    #[arg(long, value_name = "N")]
    pub hidden_dim: Option<usize>,
    /// Labeled training nodes per class.
    #[arg(long, value_name = "N")]
    pub train_per_class: Option<usize>,
    #[arg(long, value_name = "N")]
    pub val_size: Option<usize>,
    #[arg(long, value_name = "N")]
    pub test_size: Option<usize>,
    #[arg(long, value_name = "N")]
    pub max_epochs: Option<usize>,
    #[arg(long, value_name = "N")]
    pub patience: Option<usize>,
    #[arg(long, value_name = "LR")]
    pub learning_rate: Option<f64>,
    /// Seeds, one run each, e.g. `1,2,3`.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub seed: Option<Vec<u64>>,
    #[arg(long, value_name = "DIR", default_value = "gunet-out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub model: GraphUNetConfig,
    pub train: TrainConfig,
    pub dataset_content: Option<PathBuf>,
    pub dataset_cites: Option<PathBuf>,
    pub split: SplitSizes,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

fn field_names<T: serde::Serialize>(value: &T) -> BTreeSet<String> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

/// Splits a flat config object into its model and training parts.
pub fn parse_config(text: &str, base: &Path) -> anyhow::Result<Settings> {
    let root: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    let Value::Object(root) = root else {
        bail!("config must be a JSON object");
    };
    let model_keys = field_names(&GraphUNetConfig::default());
    let train_keys = field_names(&TrainConfig::default());
    let mut model = Map::new();
    let mut train = Map::new();
    let mut settings = Settings {
        model: GraphUNetConfig::default(),
        train: TrainConfig::default(),
        dataset_content: None,
        dataset_cites: None,
        split: SplitSizes::default(),
        seeds: Vec::new(),
        out: PathBuf::new(),
    };
    for (key, value) in root {
        match key.as_str() {
            "dataset_content" | "dataset_cites" => {
                let s = value.as_str().ok_or_else(|| anyhow!("{key} must be a string"))?;
                let path = base.join(s);
                if key == "dataset_content" {
                    settings.dataset_content = Some(path);
                } else {
                    settings.dataset_cites = Some(path);
                }
            }
            k if model_keys.contains(k) => {
                model.insert(key, value);
            }
            k if train_keys.contains(k) => {
                train.insert(key, value);
            }
            _ => bail!("unknown config field `{key}`"),
        }
    }
    let model_given_depth = model.contains_key("depth");
    let model_given_ks = model.contains_key("k_specs");
    settings.model = serde_json::from_value(Value::Object(model)).context("invalid model config")?;
    settings.train = serde_json::from_value(Value::Object(train)).context("invalid training config")?;
    if model_given_depth && !model_given_ks {
        settings.model.k_specs = k_specs_for_depth(&GraphUNetConfig::default().k_specs, settings.model.depth);
    }
    Ok(settings)
}

impl ModelArgs {
    pub fn resolve(&self) -> anyhow::Result<Settings> {
        let mut s = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new("."));
                parse_config(&text, base).with_context(|| format!("in {}", path.display()))?
            }
            None => parse_config("{}", Path::new("."))?,
        };
        if let Some(p) = &self.dataset_content {
            s.dataset_content = Some(p.clone());
        }
        if let Some(p) = &self.dataset_cites {
            s.dataset_cites = Some(p.clone());
        }
        let m = &mut s.model;
        let explicit: Option<Vec<KSpec>> = match (&self.ks, &self.ratios) {
            (Some(ks), _) => Some(ks.iter().map(|&k| KSpec::Count(k)).collect()),
            (None, Some(rs)) => Some(rs.iter().map(|&r| KSpec::Ratio(r)).collect()),
            (None, None) => None,
        };
        match (self.depth, explicit) {
            (Some(d), Some(ks)) => {
                if ks.len() != d {
                    bail!("--depth {d} needs {d} pooling sizes, got {}", ks.len());
                }
                m.depth = d;
                m.k_specs = ks;
            }
            (Some(d), None) => {
                m.k_specs = k_specs_for_depth(&m.k_specs, d);
                m.depth = d;
            }
            (None, Some(ks)) => {
                m.depth = ks.len();
                m.k_specs = ks;
            }
            (None, None) => {}
        }
        if self.no_augment {
            m.augment = false;
        }
        if self.no_pool {
            m.pool = false;
        }
        if let Some(skip) = self.skip {
            m.skip_mode = match skip {
                SkipArg::Add => SkipMode::Add,
                SkipArg::Concat => SkipMode::Concat,
            };
        }
        if let Some(w) = self.self_loop_weight {
            m.self_loop_weight = w;
        }
        if let Some(h) = self.hidden_dim {
            m.hidden_dim = h;
        }
        if let Some(n) = self.train_per_class {
            s.split.train_per_class = n;
        }
        if let Some(n) = self.val_size {
            s.split.val = n;
        }
        if let Some(n) = self.test_size {
            s.split.test = n;
        }
        let t = &mut s.train;
        if let Some(e) = self.max_epochs {
            t.max_epochs = e;
        }
        if let Some(p) = self.patience {
            t.patience = p;
        }
        if let Some(lr) = self.learning_rate {
            t.learning_rate = lr;
        }
        t.validate()?;
        s.seeds = match &self.seed {
            Some(seeds) if !seeds.is_empty() => seeds.clone(),
            _ => vec![s.train.seed],
        };
        s.out = self.out.clone();
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_fields() {
        let s = parse_config(
            r#"{"depth": 2, "hidden_dim": 16, "learning_rate": 0.05, "dataset_content": "a.content"}"#,
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(s.model.depth, 2);
        assert_eq!(s.model.k_specs, vec![KSpec::Count(2000), KSpec::Count(1000)]);
        assert_eq!(s.model.hidden_dim, 16);
        assert_eq!(s.train.learning_rate, 0.05);
        assert_eq!(s.dataset_content, Some(PathBuf::from("/data/a.content")));
    }

    #[test]
    fn integer_and_float_k_specs() {
        let s = parse_config(r#"{"depth": 2, "k_specs": [10, 0.5]}"#, Path::new(".")).unwrap();
        assert_eq!(s.model.k_specs, vec![KSpec::Count(10), KSpec::Ratio(0.5)]);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = parse_config(r#"{"hiden_dim": 3}"#, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("hiden_dim"));
    }

    #[test]
    fn flags_override_file() {
        let args = ModelArgs {
            ratios: Some(vec![0.9, 0.5]),
            no_augment: true,
            seed: Some(vec![4, 5]),
            ..Default::default()
        };
        let s = args.resolve().unwrap();
        assert_eq!(s.model.depth, 2);
        assert!(!s.model.augment);
        assert_eq!(s.seeds, vec![4, 5]);
    }

    #[test]
    fn depth_and_list_must_agree() {
        let args = ModelArgs {
            depth: Some(3),
            ks: Some(vec![4, 2]),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
    }
}
