//! Full-batch semi-supervised node classification, plus the depth-sweep
//! and ablation drivers built on it.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::layers::KSpec;
use crate::model::{Dropout, GraphUNet, GraphUNetConfig};
use crate::optim::Adam;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub adjacency_keep: f64,
    pub feature_keep: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            l2_lambda: 0.001,
            max_epochs: 400,
            patience: 100,
            seed: 0,
            adjacency_keep: 0.8,
            feature_keep: 0.08,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be non-negative, got {}", self.learning_rate)));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::Config("l2_lambda must be non-negative".into()));
        }
        for (name, keep) in [("adjacency_keep", self.adjacency_keep), ("feature_keep", self.feature_keep)] {
            if !(keep > 0.0 && keep <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {keep}")));
            }
        }
        Ok(())
    }

    fn dropout(&self) -> Dropout {
        Dropout {
            adjacency_keep: self.adjacency_keep,
            feature_keep: self.feature_keep,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub depth: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub epochs_run: usize,
    /// Latest epoch (1-based) reaching `best_val_accuracy`; 0 means the
    /// initial parameters.
    pub best_epoch: usize,
    pub loss_curve: Vec<f64>,
    pub wall_seconds: f64,
}

/// A finished run together with the best-validation parameters.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub result: RunResult,
    pub model: GraphUNet,
}

/// `lambda / 2 * sum |W|^2` over `params`.
pub fn l2_penalty(tape: &mut Tape, params: &[Var], lambda: f64) -> Result<Var> {
    let mut total = tape.constant(Tensor::scalar(0.0));
    for &p in params {
        let sq = tape.sum_squares(p);
        total = tape.add(total, sq)?;
    }
    Ok(tape.scale(total, lambda / 2.0))
}

/// Row-wise argmax, ties to the lowest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of masked rows whose argmax matches the label.
pub fn accuracy(logits: &Tensor, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let pred = argmax_rows(logits);
    let mut total = 0usize;
    let mut correct = 0usize;
    for i in (0..labels.len()).filter(|&i| mask[i]) {
        total += 1;
        if pred[i] == labels[i] {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoLabeledNodes);
    }
    Ok(correct as f64 / total as f64)
}

pub fn evaluate(model: &GraphUNet, dataset: &Dataset, mask: &[bool]) -> Result<f64> {
    let logits = model.predict(&dataset.adjacency, &dataset.features)?;
    accuracy(&logits, &dataset.labels, mask)
}

/// Copies the dataset's input width and class count into `config`.
pub fn fit_config_to(config: &GraphUNetConfig, dataset: &Dataset) -> GraphUNetConfig {
    let mut c = config.clone();
    c.input_dim = dataset.num_features();
    c.num_classes = dataset.num_classes();
    c
}

pub fn train_node_classification(
    dataset: &Dataset,
    model_config: &GraphUNetConfig,
    train_config: &TrainConfig,
) -> Result<TrainedRun> {
    train_config.validate()?;
    dataset.validate()?;
    let start = Instant::now();
    let config = fit_config_to(model_config, dataset);
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut model = GraphUNet::build(&config, &mut rng)?;
    let targets = dataset.targets(&dataset.train_mask);
    if targets.is_empty() {
        return Err(Error::NoLabeledNodes);
    }
    let mut opt = Adam::new(train_config.learning_rate);
    let dropout = train_config.dropout();

    let mut best_val = evaluate(&model, dataset, &dataset.val_mask)?;
    let mut best_params = model.parameter_values();
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut loss_curve = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=train_config.max_epochs {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &dataset.adjacency, &dataset.features, Some(dropout), &mut rng)?;
        let data_loss = tape.softmax_cross_entropy(out.logits, &targets)?;
        let penalty = l2_penalty(&mut tape, &out.params, train_config.l2_lambda)?;
        let loss = tape.add(data_loss, penalty)?;
        let loss_value = tape.value(loss).get(0, 0);
        if !loss_value.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: loss_value,
            });
        }
        loss_curve.push(loss_value);
        let grads = tape.backward(loss)?;
        let grad_refs: Vec<&Tensor> = out.params.iter().map(|&v| grads.wrt(v)).collect();
        opt.step(&mut model.parameters_mut(), &grad_refs);
        epochs_run = epoch;

        let val = evaluate(&model, dataset, &dataset.val_mask)?;
        // Ties move the checkpoint forward but do not reset patience.
        if val >= best_val {
            since_best = if val > best_val { 0 } else { since_best + 1 };
            best_val = val;
            best_params = model.parameter_values();
            best_epoch = epoch;
        } else {
            since_best += 1;
        }
        if since_best >= train_config.patience {
            break;
        }
    }

    model.set_parameters(&best_params)?;
    let test = evaluate(&model, dataset, &dataset.test_mask)?;
    Ok(TrainedRun {
        result: RunResult {
            seed: train_config.seed,
            depth: config.depth,
            best_val_accuracy: best_val,
            test_accuracy: test,
            epochs_run,
            best_epoch,
            loss_curve,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
        model,
    })
}

/// Trains one run per seed, in parallel, returning runs in seed order.
pub fn train_runs(
    dataset: &Dataset,
    model_config: &GraphUNetConfig,
    train_config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<TrainedRun>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let tc = TrainConfig {
                seed,
                ..train_config.clone()
            };
            train_node_classification(dataset, model_config, &tc)
        })
        .collect()
}

/// As [`train_runs`], keeping only the results.
pub fn train_seeds(
    dataset: &Dataset,
    model_config: &GraphUNetConfig,
    train_config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<RunResult>> {
    Ok(train_runs(dataset, model_config, train_config, seeds)?
        .into_iter()
        .map(|r| r.result)
        .collect())
}

/// Sample mean and standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// The first `depth` entries of `base`; a shorter list is extended by
/// halving the last absolute count (ratios repeat).
pub fn k_specs_for_depth(base: &[KSpec], depth: usize) -> Vec<KSpec> {
    let mut out: Vec<KSpec> = base.iter().copied().take(depth).collect();
    while out.len() < depth {
        let next = match out.last() {
            Some(KSpec::Count(k)) => KSpec::Count((k / 2).max(1)),
            Some(&r @ KSpec::Ratio(_)) => r,
            None => KSpec::Ratio(0.5),
        };
        out.push(next);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub depth: usize,
    pub runs: Vec<RunResult>,
    pub mean_test: f64,
    pub std_test: f64,
}

pub fn run_depth_sweep(
    dataset: &Dataset,
    depths: &[usize],
    model_config: &GraphUNetConfig,
    train_config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    depths
        .iter()
        .map(|&depth| {
            let config = GraphUNetConfig {
                depth,
                k_specs: k_specs_for_depth(&model_config.k_specs, depth),
                ..model_config.clone()
            };
            let runs = train_seeds(dataset, &config, train_config, seeds)?;
            let tests: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
            let (mean_test, std_test) = mean_std(&tests);
            Ok(SweepRow {
                depth,
                runs,
                mean_test,
                std_test,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantResult {
    pub name: String,
    pub runs: Vec<RunResult>,
    pub mean_test: f64,
    pub std_test: f64,
    /// Mean over seeds of `full - variant` test accuracy; 0 for the full
    /// model itself.
    pub paired_delta: f64,
}

/// Trains the full model and its no-pool and no-augmentation variants on
/// the same seeds.
pub fn run_ablations(
    dataset: &Dataset,
    model_config: &GraphUNetConfig,
    train_config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<VariantResult>> {
    let variants = [
        ("full", model_config.clone()),
        (
            "no_pool",
            GraphUNetConfig {
                pool: false,
                ..model_config.clone()
            },
        ),
        (
            "no_augment",
            GraphUNetConfig {
                augment: false,
                ..model_config.clone()
            },
        ),
    ];
    compare_variants(dataset, &variants, train_config, seeds)
}

/// Trains each named config on every seed; the first entry is the
/// reference for the paired deltas.
pub fn compare_variants(
    dataset: &Dataset,
    variants: &[(&str, GraphUNetConfig)],
    train_config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<VariantResult>> {
    let mut out: Vec<VariantResult> = Vec::with_capacity(variants.len());
    for (name, config) in variants {
        let runs = train_seeds(dataset, config, train_config, seeds)?;
        let tests: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
        let (mean_test, std_test) = mean_std(&tests);
        let paired_delta = match out.first() {
            Some(reference) => {
                let d: Vec<f64> = reference
                    .runs
                    .iter()
                    .zip(&runs)
                    .map(|(a, b)| a.test_accuracy - b.test_accuracy)
                    .collect();
                mean_std(&d).0
            }
            None => 0.0,
        };
        out.push(VariantResult {
            name: name.to_string(),
            runs,
            mean_test,
            std_test,
            paired_delta,
        });
    }
    Ok(out)
}

/// One `key=value` line per run.
pub fn format_result_line(r: &RunResult) -> String {
    format!(
        "seed={} depth={} best_val={:.6} test_acc={:.6} epochs={} wall_seconds={:.3}",
        r.seed, r.depth, r.best_val_accuracy, r.test_accuracy, r.epochs_run, r.wall_seconds
    )
}

/// Run lines followed by a mean/std footer.
pub fn format_results(runs: &[RunResult]) -> String {
    let mut s = String::new();
    for r in runs {
        s.push_str(&format_result_line(r));
        s.push('\n');
    }
    let tests: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let (mean, std) = mean_std(&tests);
    let _ = writeln!(s, "runs={} mean_test_acc={mean:.6} std_test_acc={std:.6}", runs.len());
    s
}

/// Run lines of every depth followed by one summary line per depth.
pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    for row in rows {
        for r in &row.runs {
            s.push_str(&format_result_line(r));
            s.push('\n');
        }
    }
    for row in rows {
        let _ = writeln!(
            s,
            "depth={} runs={} mean_test_acc={:.6} std_test_acc={:.6}",
            row.depth,
            row.runs.len(),
            row.mean_test,
            row.std_test
        );
    }
    s
}

/// Run lines prefixed by variant, then one summary line per variant.
pub fn format_ablation(rows: &[VariantResult]) -> String {
    let mut s = String::new();
    for row in rows {
        for r in &row.runs {
            let _ = writeln!(s, "variant={} {}", row.name, format_result_line(r));
        }
    }
    for row in rows {
        let _ = writeln!(
            s,
            "variant={} runs={} mean_test_acc={:.6} std_test_acc={:.6} full_minus_variant={:+.6}",
            row.name,
            row.runs.len(),
            row.mean_test,
            row.std_test,
            row.paired_delta
        );
    }
    s
}

pub fn write_results_file(path: &Path, runs: &[RunResult]) -> Result<()> {
    std::fs::write(path, format_results(runs))?;
    Ok(())
}

pub fn write_loss_curve(path: &Path, r: &RunResult) -> Result<()> {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in r.loss_curve.iter().enumerate() {
        let _ = writeln!(s, "{},{l:.10}", i + 1);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Drops `wall_seconds=...` fields so results files can be compared
/// byte for byte.
pub fn strip_timing(results: &str) -> String {
    results
        .lines()
        .map(|line| {
            line.split(' ')
                .filter(|field| !field.starts_with("wall_seconds="))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::separable_two_class;

    fn tiny_model_config() -> GraphUNetConfig {
        GraphUNetConfig {
            depth: 2,
            hidden_dim: 8,
            k_specs: vec![KSpec::Ratio(0.8), KSpec::Ratio(0.6)],
            ..Default::default()
        }
    }

    #[test]
    fn l2_examples() {
        let mut tape = Tape::new();
        let z = tape.param(Tensor::zeros(2, 3));
        let p = l2_penalty(&mut tape, &[z], 0.001).unwrap();
        assert_eq!(tape.value(p).get(0, 0), 0.0);

        let mut tape = Tape::new();
        let w = tape.param(Tensor::from_rows(&[[2.0]]));
        let p = l2_penalty(&mut tape, &[w], 0.001).unwrap();
        assert!((tape.value(p).get(0, 0) - 0.002).abs() < 1e-15);

        let mut tape = Tape::new();
        let wv = Tensor::from_rows(&[[0.5, -1.5], [3.0, 0.25]]);
        let w = tape.param(wv.clone());
        let p = l2_penalty(&mut tape, &[w], 0.01).unwrap();
        let g = tape.backward(p).unwrap();
        assert!(g.wrt(w).max_abs_diff(&wv.map(|v| 0.01 * v)) < 1e-15);
    }

    #[test]
    fn accuracy_examples() {
        let logits = Tensor::from_rows(&[[2.0, 1.0], [0.0, 3.0], [1.0, 1.0]]);
        assert_eq!(accuracy(&logits, &[0, 1, 0], &[true, true, true]).unwrap(), 1.0);
        let uniform = Tensor::zeros(4, 3);
        let labels = [0, 2, 0, 1];
        assert_eq!(accuracy(&uniform, &labels, &[true; 4]).unwrap(), 0.5);
        assert!(matches!(accuracy(&uniform, &labels, &[false; 4]), Err(Error::NoLabeledNodes)));
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn k_specs_extend() {
        let base = [KSpec::Count(2000), KSpec::Count(1000), KSpec::Count(500), KSpec::Count(200)];
        assert_eq!(k_specs_for_depth(&base, 2), vec![KSpec::Count(2000), KSpec::Count(1000)]);
        assert_eq!(k_specs_for_depth(&base, 5)[4], KSpec::Count(100));
        assert_eq!(k_specs_for_depth(&[KSpec::Ratio(0.5)], 3), vec![KSpec::Ratio(0.5); 3]);
    }

    #[test]
    fn separable_fixture_is_learned() {
        let ds = separable_two_class(0).unwrap();
        let tc = TrainConfig {
            max_epochs: 200,
            patience: 200,
            feature_keep: 1.0,
            adjacency_keep: 1.0,
            ..Default::default()
        };
        let run = train_node_classification(&ds, &tiny_model_config(), &tc).unwrap();
        assert!(run.result.test_accuracy >= 0.95, "{:?}", run.result);
        assert!(run.result.loss_curve.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn zero_learning_rate_keeps_initial_model() {
        let ds = separable_two_class(1).unwrap();
        let tc = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 5,
            ..Default::default()
        };
        let run = train_node_classification(&ds, &tiny_model_config(), &tc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        let init = GraphUNet::build(&fit_config_to(&tiny_model_config(), &ds), &mut rng).unwrap();
        assert_eq!(run.model.parameter_values(), init.parameter_values());
        assert_eq!(run.result.test_accuracy, evaluate(&init, &ds, &ds.test_mask).unwrap());
    }

    #[test]
    fn runs_are_reproducible() {
        let ds = separable_two_class(2).unwrap();
        let tc = TrainConfig {
            max_epochs: 30,
            seed: 5,
            ..Default::default()
        };
        let a = train_node_classification(&ds, &tiny_model_config(), &tc).unwrap().result;
        let b = train_node_classification(&ds, &tiny_model_config(), &tc).unwrap().result;
        assert_eq!(strip_timing(&format_result_line(&a)), strip_timing(&format_result_line(&b)));
        assert_eq!(a.loss_curve, b.loss_curve);
    }

    #[test]
    fn pure_penalty_shrinks_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut w = Tensor::uniform(3, 3, -1.0, 1.0, &mut rng);
        let mut opt = Adam::new(0.01);
        let mut last = w.norm();
        for _ in 0..100 {
            let mut tape = Tape::new();
            let v = tape.param(w.clone());
            let p = l2_penalty(&mut tape, &[v], 0.5).unwrap();
            let g = tape.backward(p).unwrap();
            opt.step(&mut [&mut w], &[g.wrt(v)]);
            let now = w.norm();
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn invalid_train_config() {
        let bad = TrainConfig {
            feature_keep: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn results_format_and_strip() {
        let r = RunResult {
            seed: 3,
            depth: 4,
            best_val_accuracy: 0.5,
            test_accuracy: 0.25,
            epochs_run: 10,
            best_epoch: 2,
            loss_curve: vec![1.0],
            wall_seconds: 1.5,
        };
        let s = format_results(&[r.clone(), r]);
        assert!(s.starts_with("seed=3 depth=4 best_val=0.500000 test_acc=0.250000 epochs=10 wall_seconds=1.500\n"));
        assert!(s.ends_with("runs=2 mean_test_acc=0.250000 std_test_acc=0.000000\n"));
        assert!(!strip_timing(&s).contains("wall_seconds"));
    }

    #[test]
    fn identical_variants_have_zero_delta() {
        let ds = separable_two_class(3).unwrap();
        let tc = TrainConfig {
            max_epochs: 10,
            ..Default::default()
        };
        let cfg = tiny_model_config();
        let rows = compare_variants(&ds, &[("a", cfg.clone()), ("b", cfg)], &tc, &[1, 2]).unwrap();
        assert_eq!(rows[1].paired_delta, 0.0);
        assert_eq!(rows[0].mean_test, rows[1].mean_test);
    }
}
