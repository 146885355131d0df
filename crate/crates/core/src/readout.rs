//! Graph-level classification: the encoder-decoder as a node embedder,
//! a mean-over-nodes readout and a linear head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{Activation, KSpec};
use crate::model::{GraphUNet, GraphUNetConfig};
use crate::optim::Adam;
use crate::synthetic::LabeledGraph;
use crate::tensor::Tensor;
use crate::training::{argmax_rows, l2_penalty};

#[derive(Clone, Debug)]
pub struct GraphClassifier {
    pub body: GraphUNet,
    /// `embedding_dim x num_classes`.
    pub head: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutTrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ReadoutTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            l2_lambda: 0.0,
            epochs: 150,
            seed: 0,
        }
    }
}

/// Inductive defaults: four ratio-pooled levels at 90/70/60/50%.
pub fn inductive_config(input_dim: usize, embedding_dim: usize) -> GraphUNetConfig {
    GraphUNetConfig {
        depth: 4,
        input_dim,
        hidden_dim: embedding_dim,
        num_classes: embedding_dim,
        k_specs: vec![KSpec::Ratio(0.9), KSpec::Ratio(0.7), KSpec::Ratio(0.6), KSpec::Ratio(0.5)],
        activation: Activation::Relu,
        ..Default::default()
    }
}

impl GraphClassifier {
    /// `body_config.num_classes` is the embedding width fed to the head.
    pub fn build<R: Rng + ?Sized>(body_config: &GraphUNetConfig, num_classes: usize, rng: &mut R) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        let body = GraphUNet::build(body_config, rng)?;
        let head = Tensor::glorot_uniform(body_config.num_classes, num_classes, rng);
        Ok(Self { body, head })
    }

    fn record(&self, tape: &mut Tape, body: &[Var], head: Var, g: &LabeledGraph) -> Result<Var> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let out = self
            .body
            .forward_with(tape, body, &g.adjacency, &g.features, None, &mut rng, None)?;
        let pooled = tape.mean_rows(out.logits)?;
        tape.matmul(pooled, head)
    }

    /// `1 x num_classes` logits for one graph of any size.
    pub fn logits(&self, g: &LabeledGraph) -> Result<Tensor> {
        let mut tape = Tape::new();
        let body = self.body.bind(&mut tape);
        let head = tape.constant(self.head.clone());
        let out = self.record(&mut tape, &body, head, g)?;
        Ok(tape.value(out).clone())
    }

    pub fn predict(&self, g: &LabeledGraph) -> Result<usize> {
        Ok(argmax_rows(&self.logits(g)?)[0])
    }

    pub fn accuracy(&self, graphs: &[LabeledGraph]) -> Result<f64> {
        if graphs.is_empty() {
            return Err(Error::NoLabeledNodes);
        }
        let mut correct = 0;
        for g in graphs {
            if self.predict(g)? == g.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / graphs.len() as f64)
    }

    /// Full-batch Adam on the mean per-graph cross-entropy. Returns the
    /// loss curve.
    pub fn fit(&mut self, graphs: &[LabeledGraph], config: &ReadoutTrainConfig) -> Result<Vec<f64>> {
        if graphs.is_empty() {
            return Err(Error::NoLabeledNodes);
        }
        let mut opt = Adam::new(config.learning_rate);
        let mut curve = Vec::with_capacity(config.epochs);
        for epoch in 1..=config.epochs {
            let mut tape = Tape::new();
            let body = self.body.bind(&mut tape);
            let head = tape.param(self.head.clone());
            let mut total = tape.constant(Tensor::scalar(0.0));
            for g in graphs {
                let logits = self.record(&mut tape, &body, head, g)?;
                let ce = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
                total = tape.add(total, ce)?;
            }
            let data = tape.scale(total, 1.0 / graphs.len() as f64);
            let mut all = body.clone();
            all.push(head);
            let penalty = l2_penalty(&mut tape, &all, config.l2_lambda)?;
            let loss = tape.add(data, penalty)?;
            let value = tape.value(loss).get(0, 0);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, loss: value });
            }
            curve.push(value);
            let grads = tape.backward(loss)?;
            let g: Vec<&Tensor> = all.iter().map(|&v| grads.wrt(v)).collect();
            let mut params = self.body.parameters_mut();
            params.push(&mut self.head);
            opt.step(&mut params, &g);
        }
        Ok(curve)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutDemo {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub loss_curve: Vec<f64>,
}

/// Trains a classifier on `train` and scores it on `test`.
pub fn graph_readout_demo(
    train: &[LabeledGraph],
    test: &[LabeledGraph],
    body_config: &GraphUNetConfig,
    num_classes: usize,
    config: &ReadoutTrainConfig,
) -> Result<ReadoutDemo> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut clf = GraphClassifier::build(body_config, num_classes, &mut rng)?;
    let loss_curve = clf.fit(train, config)?;
    Ok(ReadoutDemo {
        train_accuracy: clf.accuracy(train)?,
        test_accuracy: clf.accuracy(test)?,
        loss_curve,
    })
}
