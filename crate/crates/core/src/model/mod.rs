//! Ensemble of feature extractors with per-pair label classifiers, an
//! extractor classifier and a final classifier over concatenated features.

mod checkpoint;

pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, to_checkpoint_string};

use crate::autodiff::{argmax, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_extractors: usize,
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
    pub n_classes: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_extractors == 0 {
            return Err(Error::invalid("n_extractors must be at least 1"));
        }
        if self.input_dim == 0
            || self.feature_dim == 0
            || self.n_classes == 0
            || self.hidden_dims.contains(&0)
        {
            return Err(Error::invalid("all model dimensions must be at least 1"));
        }
        Ok(())
    }

    /// Layer widths of one extractor, input first.
    fn extractor_widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_dims.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_dims);
        w.push(self.feature_dim);
        w
    }

    /// Width of the concatenated feature vector.
    pub fn concat_width(&self) -> usize {
        self.n_extractors * self.feature_dim
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        let n = self.n_extractors;
        let (f, c) = (self.feature_dim, self.n_classes);
        let extractor: usize = self.extractor_widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        n * extractor + n * (f * c + c) + (f * n + n) + (n * f * c + c)
    }
}

/// Dense layer `x ↦ x·W + b` with `W` of shape `[in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut SplitMix64) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.uniform(-limit, limit)).collect();
        Linear {
            weight: Tensor::new(vec![fan_in, fan_out], data).expect("consistent shape"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear { weight: Tensor::zeros(&[fan_in, fan_out]), bias: Tensor::zeros(&[fan_out]) }
    }

    fn bind(&self, g: &mut Graph, trainable: bool) -> LinearVars {
        LinearVars {
            weight: g.leaf(self.weight.clone(), trainable),
            bias: g.leaf(self.bias.clone(), trainable),
        }
    }
}

// Init stream tags, one per layer.
const TAG_PAIR: u64 = 1 << 32;
const TAG_EXTRACTOR_CLASSIFIER: u64 = 2 << 32;
const TAG_FINAL: u64 = 3 << 32;

/// Which parameters are trained together.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGroup {
    /// Extractors, pair classifiers and the extractor classifier.
    Stage1,
    /// The final classifier only.
    Final,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    config: ModelConfig,
    pub extractors: Vec<Vec<Linear>>,
    pub pair_classifiers: Vec<Linear>,
    pub extractor_classifier: Linear,
    pub final_classifier: Linear,
}

impl EnsembleModel {
    /// Glorot-uniform weights from the seeded stream, zero biases.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.init_seed;
        let widths = config.extractor_widths();
        let n = config.n_extractors;
        let extractors = (0..n)
            .map(|k| {
                widths
                    .windows(2)
                    .enumerate()
                    .map(|(j, w)| {
                        let tag = ((k as u64) << 16) | j as u64;
                        Linear::glorot(w[0], w[1], &mut SplitMix64::derive(seed, tag))
                    })
                    .collect()
            })
            .collect();
        let (f, c) = (config.feature_dim, config.n_classes);
        let pair_classifiers = (0..n)
            .map(|k| Linear::glorot(f, c, &mut SplitMix64::derive(seed, TAG_PAIR + k as u64)))
            .collect();
        let extractor_classifier =
            Linear::glorot(f, n, &mut SplitMix64::derive(seed, TAG_EXTRACTOR_CLASSIFIER));
        let final_classifier = Linear::glorot(n * f, c, &mut SplitMix64::derive(seed, TAG_FINAL));
        Ok(EnsembleModel { config, extractors, pair_classifiers, extractor_classifier, final_classifier })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_extractors(&self) -> usize {
        self.config.n_extractors
    }

    fn layers(&self) -> Vec<(String, &Linear)> {
        let mut out = Vec::new();
        for (k, ext) in self.extractors.iter().enumerate() {
            for (j, l) in ext.iter().enumerate() {
                out.push((format!("extractor{k}.layer{j}"), l));
            }
        }
        for (k, l) in self.pair_classifiers.iter().enumerate() {
            out.push((format!("pair{k}.classifier"), l));
        }
        out.push(("extractor_classifier".to_string(), &self.extractor_classifier));
        out.push(("final_classifier".to_string(), &self.final_classifier));
        out
    }

    /// Every parameter tensor with its name, in canonical order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.layers()
            .into_iter()
            .flat_map(|(name, l)| [(format!("{name}.weight"), &l.weight), (format!("{name}.bias"), &l.bias)])
            .collect()
    }

    /// Mutable parameters of a group, in the order of [`ModelVars::group`].
    pub fn params_mut(&mut self, group: ParamGroup) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        match group {
            ParamGroup::Stage1 => {
                for l in self.extractors.iter_mut().flatten() {
                    out.push(&mut l.weight);
                    out.push(&mut l.bias);
                }
                for l in &mut self.pair_classifiers {
                    out.push(&mut l.weight);
                    out.push(&mut l.bias);
                }
                out.push(&mut self.extractor_classifier.weight);
                out.push(&mut self.extractor_classifier.bias);
            }
            ParamGroup::Final => {
                out.push(&mut self.final_classifier.weight);
                out.push(&mut self.final_classifier.bias);
            }
        }
        out
    }

    /// Every parameter, stage-1 group first.
    pub fn all_params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in self
            .extractors
            .iter_mut()
            .flatten()
            .chain(self.pair_classifiers.iter_mut())
            .chain(std::iter::once(&mut self.extractor_classifier))
            .chain(std::iter::once(&mut self.final_classifier))
        {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    /// Registers parameters as graph leaves; only `trainable` receives gradients.
    pub fn bind(&self, g: &mut Graph, trainable: Option<ParamGroup>) -> ModelVars {
        let stage1 = trainable == Some(ParamGroup::Stage1);
        let fin = trainable == Some(ParamGroup::Final);
        ModelVars {
            extractors: self
                .extractors
                .iter()
                .map(|ext| ext.iter().map(|l| l.bind(g, stage1)).collect())
                .collect(),
            pairs: self.pair_classifiers.iter().map(|l| l.bind(g, stage1)).collect(),
            extractor_classifier: self.extractor_classifier.bind(g, stage1),
            final_classifier: self.final_classifier.bind(g, fin),
        }
    }

    /// Logits of the final classifier, without gradient tracking.
    pub fn final_logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, None);
        let xv = g.constant(x.clone());
        let logits = final_classify(&mut g, &vars, xv)?;
        Ok(g.value(logits).clone())
    }

    /// Concatenated extractor features, `[rows, n·feature_dim]`.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, None);
        let xv = g.constant(x.clone());
        let feat = concat_features(&mut g, &vars, xv)?;
        Ok(g.value(feat).clone())
    }

    /// Argmax of the final classifier; ties go to the lowest class.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.final_logits(x)?;
        Ok(predict_from_logits(&logits))
    }

    /// FNV-style hash over the bit patterns of every parameter except the
    /// final classifier.
    pub fn stage1_checksum(&self) -> u64 {
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for (name, t) in self.named_params() {
            if name.starts_with("final_classifier") {
                continue;
            }
            for v in t.data() {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
        h
    }
}

pub fn predict_from_logits(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows()).map(|r| argmax(logits.row(r))).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

fn apply_linear(g: &mut Graph, l: LinearVars, x: Var) -> Result<Var> {
    let xw = g.matmul(x, l.weight)?;
    g.add_bias(xw, l.bias)
}

/// Graph handles for every parameter of a bound model.
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub extractors: Vec<Vec<LinearVars>>,
    pub pairs: Vec<LinearVars>,
    pub extractor_classifier: LinearVars,
    pub final_classifier: LinearVars,
}

impl ModelVars {
    /// Handles of a parameter group, matching [`EnsembleModel::params_mut`].
    pub fn group(&self, group: ParamGroup) -> Vec<Var> {
        let pair = |l: &LinearVars| [l.weight, l.bias];
        match group {
            ParamGroup::Stage1 => self
                .extractors
                .iter()
                .flatten()
                .chain(&self.pairs)
                .chain(std::iter::once(&self.extractor_classifier))
                .flat_map(pair)
                .collect(),
            ParamGroup::Final => pair(&self.final_classifier).to_vec(),
        }
    }

    pub fn n_extractors(&self) -> usize {
        self.extractors.len()
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.extractors.len() {
            return Err(Error::invalid(format!(
                "extractor index {k} out of range for {} extractors",
                self.extractors.len()
            )));
        }
        Ok(())
    }
}

/// Forward pass through extractor `k` (0-based): relu hidden layers and a
/// linear feature output.
pub fn extract(g: &mut Graph, vars: &ModelVars, k: usize, x: Var) -> Result<Var> {
    vars.check_index(k)?;
    let layers = &vars.extractors[k];
    let mut h = x;
    for (j, &l) in layers.iter().enumerate() {
        h = apply_linear(g, l, h)?;
        if j + 1 < layers.len() {
            h = g.relu(h);
        }
    }
    Ok(h)
}

/// Logits of pair classifier `k` (0-based).
pub fn classify_pair(g: &mut Graph, vars: &ModelVars, k: usize, feat: Var) -> Result<Var> {
    vars.check_index(k)?;
    apply_linear(g, vars.pairs[k], feat)
}

/// Logits over extractor identities.
pub fn extractor_classify(g: &mut Graph, vars: &ModelVars, feat: Var) -> Result<Var> {
    apply_linear(g, vars.extractor_classifier, feat)
}

/// Concatenated features of all extractors.
pub fn concat_features(g: &mut Graph, vars: &ModelVars, x: Var) -> Result<Var> {
    let feats = (0..vars.n_extractors()).map(|k| extract(g, vars, k, x)).collect::<Result<Vec<_>>>()?;
    g.concat_cols(&feats)
}

pub fn final_classify(g: &mut Graph, vars: &ModelVars, x: Var) -> Result<Var> {
    let feat = concat_features(g, vars, x)?;
    apply_linear(g, vars.final_classifier, feat)
}
