//! The graph U-Net encoder-decoder.
//!
//! ```text
//! embed GCN
//!   -> depth x (gPool -> GCN)          encoder, stashing pre-pool features
//!   -> depth x (gUnpool -> skip -> GCN) decoder, deepest level first
//!   -> output GCN
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{dropout_adjacency, AdjacencyMatrix, PowerMode};
use crate::layers::{dropout_features_var, gunpool_forward, Activation, GPoolLayer, GcnLayer, KSpec, PoolRecord};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    #[default]
    Add,
    Concat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphUNetConfig {
    pub depth: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub k_specs: Vec<KSpec>,
    pub skip_mode: SkipMode,
    pub self_loop_weight: f64,
    pub augment: bool,
    pub power_mode: PowerMode,
    pub activation: Activation,
    /// `false` replaces every gPool/gUnpool pair by the identity.
    pub pool: bool,
}

impl Default for GraphUNetConfig {
    /// The four-level transductive setup; `input_dim` and `num_classes`
    /// are filled in from the dataset.
    fn default() -> Self {
        Self {
            depth: 4,
            input_dim: 0,
            hidden_dim: 48,
            num_classes: 0,
            k_specs: vec![
                KSpec::Count(2000),
                KSpec::Count(1000),
                KSpec::Count(500),
                KSpec::Count(200),
            ],
            skip_mode: SkipMode::Add,
            self_loop_weight: 2.0,
            augment: true,
            power_mode: PowerMode::Union,
            activation: Activation::Identity,
            pool: true,
        }
    }
}

impl GraphUNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.k_specs.len() != self.depth {
            return Err(Error::Config(format!(
                "expected {} k_specs for depth {}, got {}",
                self.depth,
                self.depth,
                self.k_specs.len()
            )));
        }
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_classes", self.num_classes),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for k in &self.k_specs {
            k.validate()?;
        }
        let counts: Vec<usize> = self
            .k_specs
            .iter()
            .filter_map(|k| match k {
                KSpec::Count(c) => Some(*c),
                KSpec::Ratio(_) => None,
            })
            .collect();
        if counts.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("absolute k_specs must be non-increasing".into()));
        }
        if !(self.self_loop_weight > 0.0) {
            return Err(Error::Config("self_loop_weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderBlock {
    pub pool: Option<GPoolLayer>,
    pub gcn: GcnLayer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphUNet {
    pub config: GraphUNetConfig,
    pub embed: GcnLayer,
    pub encoder: Vec<EncoderBlock>,
    /// Applied deepest level first.
    pub decoder: Vec<GcnLayer>,
    pub output: GcnLayer,
}

/// Dropout keep rates for a training-mode forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub adjacency_keep: f64,
    pub feature_keep: f64,
}

#[derive(Debug)]
pub struct ForwardOutput {
    pub logits: Var,
    /// Parameter vars, in [`GraphUNet::parameters`] order.
    pub params: Vec<Var>,
    pub records: Vec<PoolRecord>,
    /// Node count entering each encoder level, then the pooled count of the
    /// deepest level.
    pub level_sizes: Vec<usize>,
    /// Per pooling level, lowest kept score minus highest dropped score
    /// (infinite when nothing is dropped).
    pub pool_margins: Vec<f64>,
}

impl GraphUNet {
    pub fn build<R: Rng + ?Sized>(config: &GraphUNetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let act = config.activation;
        let embed = GcnLayer::new(config.input_dim, h, act, rng);
        let encoder = config
            .k_specs
            .iter()
            .map(|&k| {
                let pool = config.pool.then(|| {
                    let mut p = GPoolLayer::new(h, k, config.augment, rng);
                    p.power_mode = config.power_mode;
                    p
                });
                EncoderBlock {
                    pool,
                    gcn: GcnLayer::new(h, h, act, rng),
                }
            })
            .collect();
        let dec_in = match config.skip_mode {
            SkipMode::Add => h,
            SkipMode::Concat => 2 * h,
        };
        let decoder = (0..config.depth).map(|_| GcnLayer::new(dec_in, h, act, rng)).collect();
        let output = GcnLayer::new(h, config.num_classes, act, rng);
        Ok(Self {
            config: config.clone(),
            embed,
            encoder,
            decoder,
            output,
        })
    }

    /// Same GCN stack and skips with every gPool/gUnpool removed.
    pub fn build_no_pool_variant<R: Rng + ?Sized>(config: &GraphUNetConfig, rng: &mut R) -> Result<Self> {
        let mut c = config.clone();
        c.pool = false;
        Self::build(&c, rng)
    }

    /// Named trainable tensors in construction order.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embed.weight".to_string(), &self.embed.weight)];
        for (i, b) in self.encoder.iter().enumerate() {
            if let Some(p) = &b.pool {
                out.push((format!("encoder.{i}.pool.projection"), &p.projection));
            }
            out.push((format!("encoder.{i}.gcn.weight"), &b.gcn.weight));
        }
        for (i, d) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{i}.gcn.weight"), &d.weight));
        }
        out.push(("output.weight".to_string(), &self.output.weight));
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embed.weight];
        for b in self.encoder.iter_mut() {
            if let Some(p) = &mut b.pool {
                out.push(&mut p.projection);
            }
            out.push(&mut b.gcn.weight);
        }
        for d in self.decoder.iter_mut() {
            out.push(&mut d.weight);
        }
        out.push(&mut self.output.weight);
        out
    }

    pub fn parameter_values(&self) -> Vec<Tensor> {
        self.parameters().into_iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn set_parameters(&mut self, values: &[Tensor]) -> Result<()> {
        let mut slots = self.parameters_mut();
        if slots.len() != values.len() {
            return Err(Error::Validation(format!(
                "model has {} parameters, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(Error::Shape {
                    op: "set_parameters",
                    left: slot.shape(),
                    right: v.shape(),
                });
            }
        }
        for (slot, v) in slots.into_iter().zip(values) {
            *slot = v.clone();
        }
        Ok(())
    }

    /// `(total, pool)` trainable entry counts.
    pub fn parameter_count(&self) -> (usize, usize) {
        let total = self.parameters().iter().map(|(_, t)| t.len()).sum();
        let pool = self
            .encoder
            .iter()
            .filter_map(|b| b.pool.as_ref())
            .map(|p| p.projection.len())
            .sum();
        (total, pool)
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.parameters()
            .into_iter()
            .map(|(_, t)| tape.param(t.clone()))
            .collect()
    }

    /// Records a full forward pass on `tape`. `dropout = None` is
    /// evaluation mode.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        a: &AdjacencyMatrix,
        x: &Tensor,
        dropout: Option<Dropout>,
        rng: &mut R,
    ) -> Result<ForwardOutput> {
        let params = self.bind(tape);
        self.forward_with(tape, &params, a, x, dropout, rng, None)
    }

    /// Forward pass over caller-bound parameter vars. `selection`, when
    /// given, fixes the kept indices of every pooling level.
    #[allow(clippy::too_many_arguments)]
    pub fn forward_with<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        params: &[Var],
        a: &AdjacencyMatrix,
        x: &Tensor,
        dropout: Option<Dropout>,
        rng: &mut R,
        selection: Option<&[Vec<usize>]>,
    ) -> Result<ForwardOutput> {
        if x.rows() != a.n() {
            return Err(Error::Shape {
                op: "forward",
                left: (a.n(), a.n()),
                right: x.shape(),
            });
        }
        if x.cols() != self.config.input_dim {
            return Err(Error::Shape {
                op: "forward",
                left: x.shape(),
                right: (self.config.input_dim, self.config.hidden_dim),
            });
        }
        let expected = self.parameters().len();
        if params.len() != expected {
            return Err(Error::Validation(format!("expected {expected} parameter vars, got {}", params.len())));
        }
        let w = self.config.self_loop_weight;
        let mut next = params.iter().copied();
        let mut take = move || next.next().expect("parameter count checked");

        let mut gcn = |tape: &mut Tape, layer: &GcnLayer, weight: Var, a_norm: &Tensor, h: Var| -> Result<Var> {
            let (a_d, h_d) = match dropout {
                Some(d) => (
                    dropout_adjacency(a_norm, d.adjacency_keep, true, rng)?,
                    dropout_features_var(tape, h, d.feature_keep, true, rng)?,
                ),
                None => (a_norm.clone(), h),
            };
            let a_var = tape.constant(a_d);
            layer.forward(tape, weight, a_var, h_d)
        };

        let top_norm = a.normalized(w)?;
        let x_var = tape.constant(x.clone());
        let mut h = gcn(tape, &self.embed, take(), &top_norm, x_var)?;

        let mut skips: Vec<(Var, Tensor)> = Vec::with_capacity(self.config.depth);
        let mut records = Vec::new();
        let mut level_sizes = vec![a.n()];
        let mut pool_margins = Vec::new();
        let mut cur_adj = a.clone();
        let mut cur_norm = top_norm.clone();
        for (level, block) in self.encoder.iter().enumerate() {
            skips.push((h, cur_norm.clone()));
            if let Some(pool) = &block.pool {
                let fixed = selection.map(|s| s[level].as_slice());
                let out = pool.forward(tape, take(), &cur_adj, h, fixed)?;
                pool_margins.push(selection_margin(tape.value(out.scores).data(), &out.record.idx));
                cur_adj = out.adjacency;
                cur_norm = cur_adj.normalized(w)?;
                h = out.features;
                records.push(out.record);
            }
            level_sizes.push(cur_adj.n());
            h = gcn(tape, &block.gcn, take(), &cur_norm, h)?;
        }

        for (i, layer) in self.decoder.iter().enumerate() {
            let level = self.config.depth - 1 - i;
            if self.config.pool {
                h = gunpool_forward(tape, h, &records[level])?;
            }
            let (skip_h, skip_norm) = &skips[level];
            h = match self.config.skip_mode {
                SkipMode::Add => tape.add(h, *skip_h)?,
                SkipMode::Concat => tape.concat_cols(h, *skip_h)?,
            };
            h = gcn(tape, layer, take(), skip_norm, h)?;
        }
        let logits = gcn(tape, &self.output, take(), &top_norm, h)?;
        Ok(ForwardOutput {
            logits,
            params: params.to_vec(),
            records,
            level_sizes,
            pool_margins,
        })
    }

    /// Evaluation-mode logits as a plain tensor.
    pub fn predict(&self, a: &AdjacencyMatrix, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let out = self.forward(&mut tape, a, x, None, &mut rng)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Writes parameters as a flat sequence of records:
    /// `u32 name length, UTF-8 name, u64 rows, u64 cols, rows*cols f64`,
    /// all little-endian, in [`parameters`](Self::parameters) order.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_checkpoint(&mut w, &self.parameters())?;
        w.flush()?;
        Ok(())
    }

    /// Loads values written by [`save_checkpoint`](Self::save_checkpoint);
    /// names and shapes must match this model.
    pub fn load_checkpoint(&mut self, path: &Path) -> Result<()> {
        let named = read_checkpoint(&mut BufReader::new(File::open(path)?))?;
        let mine: Vec<(String, (usize, usize))> = self
            .parameters()
            .into_iter()
            .map(|(n, t)| (n, t.shape()))
            .collect();
        if named.len() != mine.len() {
            return Err(Error::Validation(format!(
                "checkpoint has {} tensors, model has {}",
                named.len(),
                mine.len()
            )));
        }
        for ((name, t), (want, shape)) in named.iter().zip(&mine) {
            if name != want || t.shape() != *shape {
                return Err(Error::Validation(format!(
                    "checkpoint tensor {name} {:?} does not match {want} {shape:?}",
                    t.shape()
                )));
            }
        }
        let values: Vec<Tensor> = named.into_iter().map(|(_, t)| t).collect();
        self.set_parameters(&values)
    }
}

pub(crate) fn selection_margin(scores: &[f64], idx: &[usize]) -> f64 {
    let mut kept = vec![false; scores.len()];
    idx.iter().for_each(|&i| kept[i] = true);
    let lowest_kept = idx.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
    let highest_dropped = scores
        .iter()
        .zip(&kept)
        .filter(|(_, &k)| !k)
        .map(|(&s, _)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    lowest_kept - highest_dropped
}

pub fn write_checkpoint<W: Write>(w: &mut W, params: &[(String, &Tensor)]) -> Result<()> {
    for (name, t) in params {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(t.rows() as u64).to_le_bytes())?;
        w.write_all(&(t.cols() as u64).to_le_bytes())?;
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut out = Vec::new();
    loop {
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Validation("checkpoint name is not UTF-8".into()))?;
        let mut dims = [0u8; 16];
        r.read_exact(&mut dims)?;
        let rows = u64::from_le_bytes(dims[..8].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(dims[8..].try_into().unwrap()) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push((name, Tensor::new(rows, cols, data)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config(depth: usize) -> GraphUNetConfig {
        GraphUNetConfig {
            depth,
            input_dim: 3,
            hidden_dim: 4,
            num_classes: 2,
            k_specs: vec![KSpec::Ratio(0.6); depth],
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_config(2);
        assert!(c.validate().is_ok());
        c.k_specs.pop();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = small_config(2);
        c.k_specs = vec![KSpec::Count(3), KSpec::Count(5)];
        assert!(c.validate().is_err());
        let mut c = small_config(1);
        c.depth = 0;
        c.k_specs.clear();
        assert!(c.validate().is_err());
        let mut c = small_config(1);
        c.hidden_dim = 0;
        assert!(GraphUNet::build(&c, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn topology_matches_depth() {
        let m = GraphUNet::build(&small_config(2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.encoder.len(), 2);
        assert_eq!(m.decoder.len(), 2);
        assert!(m.encoder.iter().all(|b| b.pool.is_some()));
        assert_eq!(m.embed.weight.shape(), (3, 4));
        assert_eq!(m.output.weight.shape(), (4, 2));
    }

    #[test]
    fn hand_parameter_count() {
        let m = GraphUNet::build(&small_config(1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.parameter_count(), (12 + 4 + 16 + 16 + 8, 4));
        let np = GraphUNet::build_no_pool_variant(&small_config(1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(np.parameter_count(), (52, 0));
    }

    #[test]
    fn concat_widens_decoder() {
        let mut c = small_config(2);
        c.skip_mode = SkipMode::Concat;
        let m = GraphUNet::build(&c, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(m.decoder.iter().all(|d| d.weight.shape() == (8, 4)));
    }

    #[test]
    fn build_is_deterministic() {
        let a = GraphUNet::build(&small_config(3), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = GraphUNet::build(&small_config(3), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_single_node() {
        let m = GraphUNet::build(&small_config(2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let a = AdjacencyMatrix::empty(1);
        let x = Tensor::from_rows(&[[0.5, -1.0, 2.0]]);
        let logits = m.predict(&a, &x).unwrap();
        assert_eq!(logits.shape(), (1, 2));
        assert!(logits.all_finite());
    }

    #[test]
    fn forward_shape_trace_on_seven_nodes() {
        let mut c = small_config(2);
        c.k_specs = vec![KSpec::Count(4), KSpec::Count(2)];
        let m = GraphUNet::build(&c, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let a = AdjacencyMatrix::from_edges(7, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 0)]).unwrap();
        let x = Tensor::uniform(7, 3, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(2));
        let mut tape = Tape::new();
        let out = m.forward(&mut tape, &a, &x, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.level_sizes, vec![7, 4, 2]);
        assert_eq!(out.records[0].original_n, 7);
        assert_eq!(out.records[1].original_n, 4);
        assert_eq!(tape.shape(out.logits), (7, 2));
    }

    #[test]
    fn zero_inputs_and_weights_give_zero_logits() {
        let mut m = GraphUNet::build(&small_config(2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for p in m.parameters_mut() {
            *p = Tensor::zeros(p.rows(), p.cols());
        }
        let a = AdjacencyMatrix::from_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let logits = m.predict(&a, &Tensor::zeros(5, 3)).unwrap();
        assert_eq!(logits, Tensor::zeros(5, 2));
    }

    #[test]
    fn eval_forward_is_deterministic_and_no_pool_keeps_shapes() {
        let a = AdjacencyMatrix::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let x = Tensor::uniform(6, 3, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let m = GraphUNet::build(&small_config(2), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(m.predict(&a, &x).unwrap(), m.predict(&a, &x).unwrap());
        let np = GraphUNet::build_no_pool_variant(&small_config(2), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(np.predict(&a, &x).unwrap().shape(), (6, 2));
        let (full, _) = m.parameter_count();
        let (nop, pool) = np.parameter_count();
        assert_eq!(pool, 0);
        assert_eq!(full - nop, 2 * 4);
    }

    #[test]
    fn augment_off_still_finite() {
        let mut c = small_config(2);
        c.augment = false;
        let m = GraphUNet::build(&c, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let a = AdjacencyMatrix::from_edges(8, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)]).unwrap();
        let x = Tensor::uniform(8, 3, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(6));
        assert!(m.predict(&a, &x).unwrap().all_finite());
    }

    #[test]
    fn training_forward_uses_dropout() {
        let m = GraphUNet::build(&small_config(1), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let a = AdjacencyMatrix::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let x = Tensor::ones(4, 3);
        let d = Some(Dropout {
            adjacency_keep: 0.8,
            feature_keep: 0.5,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t1 = Tape::new();
        let o1 = m.forward(&mut t1, &a, &x, d, &mut rng).unwrap();
        let mut t2 = Tape::new();
        let o2 = m.forward(&mut t2, &a, &x, d, &mut rng).unwrap();
        assert_ne!(t1.value(o1.logits), t2.value(o2.logits));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = GraphUNet::build(&small_config(2), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        m.save_checkpoint(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let name = b"embed.weight";
        assert_eq!(&bytes[..4], &(name.len() as u32).to_le_bytes());
        assert_eq!(&bytes[4..4 + name.len()], name);
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &4u64.to_le_bytes());
        assert_eq!(&bytes[32..40], &m.embed.weight.data()[0].to_le_bytes());

        let mut other = GraphUNet::build(&small_config(2), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_ne!(other, m);
        other.load_checkpoint(&path).unwrap();
        assert_eq!(other, m);

        let mut wrong = GraphUNet::build(&small_config(1), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert!(wrong.load_checkpoint(&path).is_err());
    }
}
