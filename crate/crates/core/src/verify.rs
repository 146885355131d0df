//! Finite-difference verification of every differentiable building block
//! and of a small end-to-end model, on random 8-node graphs.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::gradcheck::check_params_with;
use crate::graph::{AdjacencyMatrix, PowerMode};
use crate::layers::{gcn_forward, gpool_forward, gunpool_forward, top_k_rank, Activation, KSpec};
use crate::model::{selection_margin, GraphUNet, GraphUNetConfig, SkipMode};
use crate::synthetic::random_graph;
use crate::tensor::Tensor;
use crate::training::l2_penalty;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

const NODES: usize = 8;
const CHANNELS: usize = 5;
const HIDDEN: usize = 4;
const CLASSES: usize = 3;
/// Smallest score gap between kept and dropped nodes, and smallest
/// |pre-activation| under ReLU, accepted for a check point.
const MIN_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckOptions {
    pub eps: f64,
    pub seeds: Vec<u64>,
    pub tolerance: f64,
    #[doc(hidden)]
    pub fault: Option<&'static str>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            seeds: vec![0, 1, 2],
            tolerance: TOLERANCE,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    /// `check/parameter`, e.g. `gpool/p`.
    pub name: String,
    /// Worst relative error over all seeds and entries.
    pub worst_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<ParamCheck>,
    pub tolerance: f64,
    pub eps: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.worst_error < self.tolerance)
    }

    pub fn failures(&self) -> Vec<&ParamCheck> {
        self.checks
            .iter()
            .filter(|c| !(c.worst_error < self.tolerance))
            .collect()
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().map(|c| c.worst_error).fold(0.0, f64::max)
    }

    fn merge(&mut self, name: String, err: f64) {
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => c.worst_error = c.worst_error.max(err),
            None => self.checks.push(ParamCheck { name, worst_error: err }),
        }
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.worst_error < self.tolerance { "ok" } else { "FAIL" };
            writeln!(f, "{:<40} {:>12.3e}  {status}", c.name, c.worst_error)?;
        }
        write!(
            f,
            "worst relative error {:.3e} (tolerance {:.0e}, eps {:.0e})",
            self.worst(),
            self.tolerance,
            self.eps
        )
    }
}

fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(rows, cols, -1.0, 1.0, rng)
}

/// `sum(out * weights)` with a fixed random weight matrix, so every output
/// entry contributes a distinct amount.
fn weighted_sum(tape: &mut Tape, out: Var, weights: &Tensor) -> Result<Var> {
    let w = tape.constant(weights.clone());
    let prod = tape.elem_mul(out, w)?;
    Ok(tape.sum(prod))
}

fn connected_graph(rng: &mut ChaCha8Rng) -> AdjacencyMatrix {
    loop {
        let a = random_graph(NODES, 0.35, rng);
        if (0..NODES).all(|i| (0..NODES).any(|j| a.has_edge(i, j))) {
            return a;
        }
    }
}

struct Case<'a> {
    report: &'a mut GradcheckReport,
    opts: &'a GradcheckOptions,
}

impl Case<'_> {
    fn run<F>(&mut self, check: &str, names: &[&str], params: &[Tensor], build: F) -> Result<()>
    where
        F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    {
        let errs = check_params_with(build, params, self.opts.eps, self.opts.fault)?;
        for (name, err) in names.iter().zip(errs) {
            self.report.merge(format!("{check}/{name}"), err);
        }
        Ok(())
    }
}

fn scores(x: &Tensor, p: &Tensor) -> Result<Tensor> {
    let norm = p.norm();
    Ok(x.matmul(p)?.map(|v| v / norm))
}

fn pool_margin(x: &Tensor, p: &Tensor, k: usize) -> Result<f64> {
    let s = scores(x, p)?;
    Ok(selection_margin(s.data(), &top_k_rank(s.data(), k)))
}

fn check_seed(seed: u64, case: &mut Case<'_>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = connected_graph(&mut rng);
    let a_norm = a.normalized(2.0)?;

    // GCN, linear and rectified.
    let x = random_tensor(NODES, CHANNELS, &mut rng);
    let w = random_tensor(CHANNELS, HIDDEN, &mut rng);
    let r = random_tensor(NODES, HIDDEN, &mut rng);
    case.run("gcn", &["x", "w"], &[x.clone(), w.clone()], |t, v| {
        let an = t.constant(a_norm.clone());
        let out = gcn_forward(t, an, v[0], v[1], Activation::Identity)?;
        weighted_sum(t, out, &r)
    })?;
    let (x_relu, w_relu) = loop {
        let x = random_tensor(NODES, CHANNELS, &mut rng);
        let w = random_tensor(CHANNELS, HIDDEN, &mut rng);
        let pre = a_norm.matmul(&x)?.matmul(&w)?;
        if pre.data().iter().all(|v| v.abs() > MIN_MARGIN) {
            break (x, w);
        }
    };
    case.run("gcn_relu", &["x", "w"], &[x_relu, w_relu], |t, v| {
        let an = t.constant(a_norm.clone());
        let out = gcn_forward(t, an, v[0], v[1], Activation::Relu)?;
        weighted_sum(t, out, &r)
    })?;

    // gPool, with and without augmentation, on a fixed selection whose
    // ranking is stable under the perturbation.
    let k = 5;
    let (xp, p) = loop {
        let x = random_tensor(NODES, CHANNELS, &mut rng);
        let p = random_tensor(CHANNELS, 1, &mut rng);
        if pool_margin(&x, &p, k)? > MIN_MARGIN {
            break (x, p);
        }
    };
    let idx = top_k_rank(scores(&xp, &p)?.data(), k);
    let rp = random_tensor(k, CHANNELS, &mut rng);
    for (check, augment) in [("gpool", Some(PowerMode::Union)), ("gpool_plain", None)] {
        case.run(check, &["x", "p"], &[xp.clone(), p.clone()], |t, v| {
            let out = gpool_forward(t, &a, v[0], v[1], KSpec::Count(k), augment, Some(&idx))?;
            // Route the pooled graph into the loss as well.
            let an = t.constant(out.adjacency.normalized(2.0)?);
            let prop = t.matmul(an, out.features)?;
            weighted_sum(t, prop, &rp)
        })?;
    }

    // gUnpool of a pooled matrix, then propagation on the full graph.
    let pooled = random_tensor(k, CHANNELS, &mut rng);
    let ru = random_tensor(NODES, CHANNELS, &mut rng);
    let record = {
        let mut t = Tape::new();
        let xv = t.constant(xp.clone());
        let pv = t.constant(p.clone());
        gpool_forward(&mut t, &a, xv, pv, KSpec::Count(k), Some(PowerMode::Union), None)?.record
    };
    case.run("gunpool", &["x"], &[pooled], |t, v| {
        let up = gunpool_forward(t, v[0], &record)?;
        let an = t.constant(a_norm.clone());
        let out = t.matmul(an, up)?;
        weighted_sum(t, out, &ru)
    })?;

    // Skip fusion feeding a GCN.
    let up = random_tensor(NODES, HIDDEN, &mut rng);
    let skip = random_tensor(NODES, HIDDEN, &mut rng);
    let w_add = random_tensor(HIDDEN, HIDDEN, &mut rng);
    let w_cat = random_tensor(2 * HIDDEN, HIDDEN, &mut rng);
    let rs = random_tensor(NODES, HIDDEN, &mut rng);
    for (check, mode, w) in [("skip_add", SkipMode::Add, &w_add), ("skip_concat", SkipMode::Concat, &w_cat)] {
        case.run(check, &["up", "skip", "w"], &[up.clone(), skip.clone(), w.clone()], |t, v| {
            let fused = match mode {
                SkipMode::Add => t.add(v[0], v[1])?,
                SkipMode::Concat => t.concat_cols(v[0], v[1])?,
            };
            let an = t.constant(a_norm.clone());
            let out = gcn_forward(t, an, fused, v[2], Activation::Identity)?;
            weighted_sum(t, out, &rs)
        })?;
    }

    // Masked cross-entropy and the weight penalty.
    let logits = random_tensor(NODES, CLASSES, &mut rng).map(|v| 3.0 * v);
    let targets: Vec<(usize, usize)> = (0..NODES).step_by(2).map(|i| (i, rng.gen_range(0..CLASSES))).collect();
    case.run("loss", &["logits"], &[logits], |t, v| t.softmax_cross_entropy(v[0], &targets))?;
    let w1 = random_tensor(CHANNELS, HIDDEN, &mut rng);
    let w2 = random_tensor(HIDDEN, 1, &mut rng);
    case.run("l2", &["w1", "w2"], &[w1, w2], |t, v| l2_penalty(t, v, 0.01))?;

    // Depth-2 model end to end, for both skip modes.
    let features = random_tensor(NODES, CHANNELS, &mut rng);
    let labels: Vec<(usize, usize)> = (0..NODES).map(|i| (i, rng.gen_range(0..CLASSES))).collect();
    for (check, skip_mode) in [("model_add", SkipMode::Add), ("model_concat", SkipMode::Concat)] {
        let config = GraphUNetConfig {
            depth: 2,
            input_dim: CHANNELS,
            hidden_dim: HIDDEN,
            num_classes: CLASSES,
            k_specs: vec![KSpec::Ratio(0.75), KSpec::Ratio(0.5)],
            skip_mode,
            ..Default::default()
        };
        let (model, selection) = loop {
            let model = GraphUNet::build(&config, &mut rng)?;
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &a, &features, None, &mut rng)?;
            if out.pool_margins.iter().all(|&m| m > MIN_MARGIN) {
                let sel: Vec<Vec<usize>> = out.records.iter().map(|r| r.idx.clone()).collect();
                break (model, sel);
            }
        };
        let named = model.parameters();
        let names: Vec<&str> = named.iter().map(|(n, _)| n.as_str()).collect();
        let values: Vec<Tensor> = named.iter().map(|(_, t)| (*t).clone()).collect();
        case.run(check, &names, &values, |t, v| {
            let mut rng = rand::rngs::mock::StepRng::new(0, 0);
            let out = model.forward_with(t, v, &a, &features, None, &mut rng, Some(&selection))?;
            let ce = t.softmax_cross_entropy(out.logits, &labels)?;
            let pen = l2_penalty(t, v, 0.001)?;
            t.add(ce, pen)
        })?;
    }
    Ok(())
}

/// Runs every check for every seed and keeps the worst error per
/// parameter.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut report = GradcheckReport {
        checks: Vec::new(),
        tolerance: opts.tolerance,
        eps: opts.eps,
    };
    for &seed in &opts.seeds {
        let mut case = Case {
            report: &mut report,
            opts,
        };
        check_seed(seed, &mut case)?;
    }
    Ok(report)
}
