//! Two-stage training, ablation variants and evaluation.
//!
//! Stage 1 trains the extractors, pair classifiers and the extractor
//! classifier on the combined loss. Stage 2 freezes them and fits the final
//! classifier on concatenated source features.

mod optim;
mod report;

pub use optim::{adam_step, sgd_step, AdamParams, AdamState, Optimizer, OptimizerConfig};
pub use report::{EpochRow, TrainingReport, METRICS_HEADER};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::autodiff::{argmax, softmax_rows, Graph, Tensor};
use crate::data::{check_homogeneous, Batcher, DomainDataset};
use crate::error::{Error, Result};
use crate::model::{classify_pair, extract, EnsembleModel, ModelConfig, ParamGroup};
use crate::objective::{final_lc_loss, total_loss, LossMode, LossWeights, Matching, SourceBatch, StepBatch};
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Full method: label-wise matching and feature diversification.
    EnMdap,
    /// Ensemble without the extractor classifier.
    EnMdapR,
    /// One pair, label-wise matching.
    Mdap,
    /// One pair, marginal (label-agnostic) matching.
    MdapL,
    /// Plain classification on pooled sources.
    SourceCombined,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::EnMdap, Variant::EnMdapR, Variant::Mdap, Variant::MdapL, Variant::SourceCombined];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::EnMdap => "ENMDAP",
            Variant::EnMdapR => "ENMDAP_R",
            Variant::Mdap => "MDAP",
            Variant::MdapL => "MDAP_L",
            Variant::SourceCombined => "SOURCE_COMBINED",
        }
    }

    /// Variants restricted to a single extractor.
    pub fn single_pair(self) -> bool {
        matches!(self, Variant::Mdap | Variant::MdapL | Variant::SourceCombined)
    }

    pub fn loss_mode(self) -> LossMode {
        match self {
            Variant::EnMdap | Variant::Mdap => LossMode::FULL,
            Variant::EnMdapR => LossMode { matching: Matching::LabelWise, diversify: false },
            Variant::MdapL => LossMode { matching: Matching::Marginal, diversify: true },
            Variant::SourceCombined => LossMode { matching: Matching::None, diversify: false },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.as_str().eq_ignore_ascii_case(s.trim())).ok_or_else(|| {
            Error::invalid(format!(
                "unknown variant `{s}` (expected one of ENMDAP, ENMDAP_R, MDAP, MDAP_L, SOURCE_COMBINED)"
            ))
        })
    }
}

/// Extractor shape shared by every variant of an experiment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture { hidden_dims: vec![32], feature_dim: 16 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub n_extractors: usize,
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::EnMdap,
            n_extractors: 2,
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::Adam(AdamParams::default()),
            epochs_stage1: 20,
            epochs_stage2: 20,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_extractors == 0 {
            return Err(Error::invalid("n_extractors must be at least 1"));
        }
        if self.variant.single_pair() && self.n_extractors != 1 {
            return Err(Error::invalid(format!(
                "variant {} requires n_extractors = 1, got {}",
                self.variant, self.n_extractors
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        self.weights.validate()?;
        self.optimizer.validate()
    }

    /// Loss weights after the variant's overrides.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.weights;
        match self.variant {
            Variant::EnMdapR => w.beta = 0.0,
            Variant::SourceCombined => {
                w.alpha = 0.0;
                w.beta = 0.0;
            }
            _ => {}
        }
        w
    }

    /// Copy configured for another variant; single-pair variants get one extractor.
    pub fn for_variant(&self, variant: Variant, n_extractors: usize) -> TrainConfig {
        TrainConfig {
            variant,
            n_extractors: if variant.single_pair() { 1 } else { n_extractors },
            ..self.clone()
        }
    }

    pub fn model_config(&self, arch: &Architecture, input_dim: usize, n_classes: usize) -> ModelConfig {
        ModelConfig {
            n_extractors: self.n_extractors,
            input_dim,
            hidden_dims: arch.hidden_dims.clone(),
            feature_dim: arch.feature_dim,
            n_classes,
            init_seed: self.seed,
        }
    }
}

// Batch stream tags.
const TAG_STAGE1: u64 = 0x5741_4745_0001;
const TAG_STAGE2: u64 = 0x5741_4745_0002;

/// Cycles through one domain's shuffled batches, reshuffling when a pass ends.
struct DomainStream {
    batcher: Batcher,
    epoch: u64,
    pass: u64,
    batches: Vec<Vec<usize>>,
    cursor: usize,
}

impl DomainStream {
    fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        DomainStream {
            batcher: Batcher::new(n, batch_size, seed),
            epoch: 0,
            pass: 0,
            batches: Vec::new(),
            cursor: 0,
        }
    }

    fn start_epoch(&mut self, epoch: u64) {
        self.epoch = epoch;
        self.pass = 0;
        self.reshuffle();
    }

    fn reshuffle(&mut self) {
        self.batches = self.batcher.epoch((self.epoch << 20) | self.pass);
        self.cursor = 0;
    }

    fn next_batch(&mut self) -> &[usize] {
        if self.cursor == self.batches.len() {
            self.pass += 1;
            self.reshuffle();
        }
        self.cursor += 1;
        &self.batches[self.cursor - 1]
    }
}

fn streams(domains: &[&DomainDataset], batch_size: usize, seed: u64, tag: u64) -> Vec<DomainStream> {
    domains
        .iter()
        .enumerate()
        .map(|(d, ds)| {
            let s = SplitMix64::derive(seed, tag + d as u64).next_u64();
            DomainStream::new(ds.len(), batch_size, s)
        })
        .collect()
}

/// Splits `datasets` into labeled sources and the target (last entry).
fn split_domains(datasets: &[DomainDataset]) -> Result<(&[DomainDataset], &DomainDataset)> {
    let (target, sources) = datasets.split_last().ok_or_else(|| Error::invalid("no datasets given"))?;
    if sources.is_empty() {
        return Err(Error::invalid("at least one source domain and one target domain are required"));
    }
    check_homogeneous(datasets)?;
    for d in datasets {
        if d.is_empty() {
            return Err(Error::invalid(format!("domain `{}` is empty", d.name())));
        }
    }
    if let Some(s) = sources.iter().find(|s| s.labels().is_none()) {
        return Err(Error::invalid(format!("source domain `{}` has no labels", s.name())));
    }
    Ok((sources, target))
}

fn check_model(model: &EnsembleModel, cfg: &TrainConfig, dataset: &DomainDataset) -> Result<()> {
    let mc = model.config();
    if mc.n_extractors != cfg.n_extractors {
        return Err(Error::invalid(format!(
            "model has {} extractors but the config asks for {}",
            mc.n_extractors, cfg.n_extractors
        )));
    }
    if mc.input_dim != dataset.dim() || mc.n_classes != dataset.n_classes() {
        return Err(Error::invalid("model input width or class count does not match the data"));
    }
    Ok(())
}

fn gradients(g: &Graph, vars: &[crate::autodiff::Var]) -> Vec<Tensor> {
    vars.iter().map(|&v| g.adjoint(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape()))).collect()
}

/// Stage 1: one batch from every domain per step; the epoch ends when the
/// largest domain has been seen once, smaller domains wrap with a reshuffle.
///
/// `datasets` holds the labeled sources followed by the target, whose labels
/// are never read. `eval_target`, when given, supplies labels for the
/// per-epoch accuracy of the averaged pair classifiers.
pub fn train_stage1(
    model: &mut EnsembleModel,
    datasets: &[DomainDataset],
    cfg: &TrainConfig,
    eval_target: Option<&DomainDataset>,
) -> Result<Vec<EpochRow>> {
    cfg.validate()?;
    let (sources, target) = split_domains(datasets)?;
    check_model(model, cfg, target)?;
    let weights = cfg.effective_weights();
    let mode = cfg.variant.loss_mode();
    let n = cfg.n_extractors;
    let n_classes = target.n_classes();

    let domains: Vec<&DomainDataset> = sources.iter().chain(std::iter::once(target)).collect();
    let mut streams = streams(&domains, cfg.batch_size, cfg.seed, TAG_STAGE1);
    let steps = domains.iter().map(|d| d.len().div_ceil(cfg.batch_size)).max().unwrap_or(0);
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut rows = Vec::with_capacity(cfg.epochs_stage1);

    for epoch in 0..cfg.epochs_stage1 {
        let started = Instant::now();
        streams.iter_mut().for_each(|s| s.start_epoch(epoch as u64));
        let mut sum_total = 0.0;
        let mut sum_lc = vec![0.0; n];
        let mut sum_lmm = vec![0.0; n];
        let mut sum_fd = 0.0;
        let mut pl_count = 0;
        let mut pl_seen = 0;

        for step in 0..steps {
            let mut batch_sources = Vec::with_capacity(sources.len());
            for (src, stream) in sources.iter().zip(streams.iter_mut()) {
                let (x, y) = src.gather(stream.next_batch());
                batch_sources.push(SourceBatch { x, y: y.expect("sources are labeled") });
            }
            let idx = streams.last_mut().expect("target stream").next_batch();
            let (target_x, _) = target.gather(idx);
            let batch = StepBatch { sources: batch_sources, target: target_x };

            let mut g = Graph::new();
            let vars = model.bind(&mut g, Some(ParamGroup::Stage1));
            let br = total_loss(&mut g, &vars, &batch, n_classes, &weights, mode)?;
            let total = g.value(br.total).item();
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, breakdown: br.describe() });
            }
            g.backward(br.total)?;
            let grads = gradients(&g, &vars.group(ParamGroup::Stage1));
            optimizer.step(&mut model.params_mut(ParamGroup::Stage1), &grads)?;

            sum_total += total;
            sum_lc.iter_mut().zip(&br.lc).for_each(|(a, b)| *a += b);
            sum_lmm.iter_mut().zip(&br.lmm).for_each(|(a, b)| *a += b);
            sum_fd += br.fd;
            if mode.matching == Matching::LabelWise {
                pl_count += br.pseudolabeled.iter().sum::<usize>();
                pl_seen += br.target_rows * n;
            }
        }

        let s = steps.max(1) as f64;
        rows.push(EpochRow {
            epoch,
            stage: 1,
            variant: cfg.variant,
            loss_total: sum_total / s,
            lc: sum_lc.iter().map(|v| v / s).collect(),
            lmm: sum_lmm.iter().map(|v| v / s).collect(),
            fd: sum_fd / s,
            pl_count,
            pl_rate: if pl_seen == 0 { 0.0 } else { pl_count as f64 / pl_seen as f64 },
            target_acc: eval_target.map(|t| evaluate_pairs(model, t)).transpose()?,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// Stage 2: fits the final classifier on concatenated source features. Every
/// other parameter is left bit-identical.
pub fn train_stage2(
    model: &mut EnsembleModel,
    datasets: &[DomainDataset],
    cfg: &TrainConfig,
    eval_target: Option<&DomainDataset>,
) -> Result<Vec<EpochRow>> {
    cfg.validate()?;
    let (sources, target) = split_domains(datasets)?;
    check_model(model, cfg, target)?;
    let domains: Vec<&DomainDataset> = sources.iter().collect();
    let mut streams = streams(&domains, cfg.batch_size, cfg.seed, TAG_STAGE2);
    let steps = domains.iter().map(|d| d.len().div_ceil(cfg.batch_size)).max().unwrap_or(0);
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut rows = Vec::with_capacity(cfg.epochs_stage2);

    for epoch in 0..cfg.epochs_stage2 {
        let started = Instant::now();
        streams.iter_mut().for_each(|s| s.start_epoch(epoch as u64));
        let mut sum = 0.0;
        for step in 0..steps {
            let batches: Vec<(Tensor, Vec<usize>)> = sources
                .iter()
                .zip(streams.iter_mut())
                .map(|(src, stream)| {
                    let (x, y) = src.gather(stream.next_batch());
                    (x, y.expect("sources are labeled"))
                })
                .collect();
            let mut g = Graph::new();
            let vars = model.bind(&mut g, Some(ParamGroup::Final));
            let xs: Vec<_> = batches.iter().map(|(x, _)| g.constant(x.clone())).collect();
            let pairs: Vec<_> = xs.iter().copied().zip(batches.iter().map(|(_, y)| y.as_slice())).collect();
            let loss = final_lc_loss(&mut g, &vars, &pairs)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, breakdown: format!("final_lc={value}") });
            }
            g.backward(loss)?;
            let grads = gradients(&g, &vars.group(ParamGroup::Final));
            optimizer.step(&mut model.params_mut(ParamGroup::Final), &grads)?;
            sum += value;
        }
        let mean = sum / steps.max(1) as f64;
        rows.push(EpochRow {
            epoch,
            stage: 2,
            variant: cfg.variant,
            loss_total: mean,
            lc: vec![mean],
            lmm: vec![0.0],
            fd: 0.0,
            pl_count: 0,
            pl_rate: 0.0,
            target_acc: eval_target.map(|t| evaluate(model, t)).transpose()?,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

fn labels_of(ds: &DomainDataset) -> Result<&[usize]> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::invalid(format!("domain `{}` has no labels to evaluate against", ds.name())))?;
    if labels.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    Ok(labels)
}

fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// Fraction of rows where the final classifier predicts the label.
pub fn evaluate(model: &EnsembleModel, labeled: &DomainDataset) -> Result<f64> {
    let labels = labels_of(labeled)?;
    let pred = model.predict(labeled.features())?;
    Ok(accuracy(&pred, labels))
}

/// Accuracy of the pair classifiers' averaged softmax, used before the final
/// classifier has been trained.
pub fn evaluate_pairs(model: &EnsembleModel, labeled: &DomainDataset) -> Result<f64> {
    let labels = labels_of(labeled)?;
    let mut g = Graph::new();
    let vars = model.bind(&mut g, None);
    let x = g.constant(labeled.features().clone());
    let mut avg = vec![0.0; labeled.len() * labeled.n_classes()];
    for k in 0..model.n_extractors() {
        let f = extract(&mut g, &vars, k, x)?;
        let logits = classify_pair(&mut g, &vars, k, f)?;
        for (a, p) in avg.iter_mut().zip(softmax_rows(g.value(logits)).data()) {
            *a += p;
        }
    }
    let c = labeled.n_classes();
    let pred: Vec<usize> = avg.chunks(c).map(argmax).collect();
    Ok(accuracy(&pred, labels))
}

/// Outcome of a full two-stage run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub model: EnsembleModel,
    pub report: TrainingReport,
    pub target_accuracy: f64,
    /// Pseudolabel inclusion rate of the last stage-1 epoch.
    pub pl_rate_final: f64,
    pub predictions: Vec<usize>,
}

/// Trains `cfg.variant` from scratch on `datasets` (labeled sources, then the
/// target) and evaluates on the target's labels, which are withheld from
/// training.
pub fn run_variant(datasets: &[DomainDataset], arch: &Architecture, cfg: &TrainConfig) -> Result<RunResult> {
    cfg.validate()?;
    let (sources, target) = split_domains(datasets)?;
    labels_of(target)?;

    let mut train_sets: Vec<DomainDataset> = if cfg.variant == Variant::SourceCombined {
        let refs: Vec<&DomainDataset> = sources.iter().collect();
        vec![DomainDataset::pool(&refs, "sources_pooled")?]
    } else {
        sources.to_vec()
    };
    train_sets.push(target.without_labels());

    let mut model = EnsembleModel::init(cfg.model_config(arch, target.dim(), target.n_classes()))?;
    let mut report = TrainingReport::default();
    report.rows.extend(train_stage1(&mut model, &train_sets, cfg, Some(target))?);
    let pl_rate_final = report.rows.last().map_or(0.0, |r| r.pl_rate);
    report.rows.extend(train_stage2(&mut model, &train_sets, cfg, Some(target))?);

    let predictions = model.predict(target.features())?;
    let target_accuracy = accuracy(&predictions, labels_of(target)?);
    Ok(RunResult { model, report, target_accuracy, pl_rate_final, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian_domains, SyntheticSpec};

    fn fixture() -> Vec<DomainDataset> {
        gen_gaussian_domains(&SyntheticSpec {
            n_domains: 3,
            n_classes: 2,
            dim: 3,
            samples_per_class: 20,
            class_separation: 3.0,
            domain_shift_scale: 0.5,
            noise_sigma: 0.5,
            seed: 4,
        })
        .unwrap()
    }

    fn small_cfg(variant: Variant, n: usize) -> TrainConfig {
        TrainConfig {
            variant,
            n_extractors: n,
            epochs_stage1: 2,
            epochs_stage2: 1,
            batch_size: 8,
            optimizer: OptimizerConfig::Adam(AdamParams { lr: 0.01, ..AdamParams::default() }),
            seed: 9,
            ..TrainConfig::default()
        }
    }

    fn arch() -> Architecture {
        Architecture { hidden_dims: vec![6], feature_dim: 4 }
    }

    fn stripped(ds: &[DomainDataset]) -> Vec<DomainDataset> {
        let mut v = ds.to_vec();
        let t = v.pop().unwrap();
        v.push(t.without_labels());
        v
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("NOPE".parse::<Variant>().is_err());
    }

    #[test]
    fn single_pair_variants_reject_ensembles() {
        for v in [Variant::Mdap, Variant::MdapL, Variant::SourceCombined] {
            assert!(small_cfg(v, 2).validate().is_err());
            assert!(small_cfg(v, 1).validate().is_ok());
        }
        assert!(small_cfg(Variant::EnMdap, 3).validate().is_ok());
    }

    #[test]
    fn stage1_reports_one_row_per_epoch() {
        let data = fixture();
        let cfg = small_cfg(Variant::EnMdap, 2);
        let mut model = EnsembleModel::init(cfg.model_config(&arch(), 3, 2)).unwrap();
        let rows = train_stage1(&mut model, &stripped(&data), &cfg, data.last()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.loss_total.is_finite() && r.stage == 1));
        assert!(rows.iter().all(|r| r.target_acc.is_some()));
    }

    #[test]
    fn source_combined_forces_plain_classification() {
        let cfg = small_cfg(Variant::SourceCombined, 1);
        let w = cfg.effective_weights();
        assert_eq!((w.alpha, w.beta), (0.0, 0.0));
        let run = run_variant(&fixture(), &arch(), &cfg).unwrap();
        for r in run.report.stage(1) {
            assert_eq!(r.lmm, vec![0.0]);
            assert_eq!(r.fd, 0.0);
            assert_eq!(r.pl_count, 0);
        }
    }

    #[test]
    fn enmdap_r_has_no_diversifying_term() {
        let run = run_variant(&fixture(), &arch(), &small_cfg(Variant::EnMdapR, 2)).unwrap();
        assert!(run.report.stage(1).all(|r| r.fd == 0.0));
        let full = run_variant(&fixture(), &arch(), &small_cfg(Variant::EnMdap, 2)).unwrap();
        assert!(full.report.stage(1).all(|r| r.fd > 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let data = fixture();
        let cfg = small_cfg(Variant::EnMdap, 2);
        let a = run_variant(&data, &arch(), &cfg).unwrap();
        let b = run_variant(&data, &arch(), &cfg).unwrap();
        assert_eq!(a.report.loss_trajectory(), b.report.loss_trajectory());
        assert_eq!(a.model, b.model);
        assert_eq!(a.predictions, b.predictions);
    }

    #[test]
    fn stage2_freezes_everything_but_the_final_classifier() {
        let data = fixture();
        let cfg = small_cfg(Variant::EnMdap, 2);
        let mut model = EnsembleModel::init(cfg.model_config(&arch(), 3, 2)).unwrap();
        let train = stripped(&data);
        train_stage1(&mut model, &train, &cfg, None).unwrap();
        let before = model.clone();
        let rows = train_stage2(&mut model, &train, &cfg, data.last()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(before.stage1_checksum(), model.stage1_checksum());
        assert_eq!(before.extractors, model.extractors);
        assert_eq!(before.pair_classifiers, model.pair_classifiers);
        assert_ne!(before.final_classifier, model.final_classifier);
    }

    #[test]
    fn stage2_loss_non_increasing_on_linear_problem() {
        // one extractor, no hidden layer: the final head solves a convex
        // problem over fixed features; full-batch steps with a small rate
        let data = fixture();
        let mut cfg = small_cfg(Variant::Mdap, 1);
        cfg.epochs_stage2 = 15;
        cfg.batch_size = 1000;
        cfg.optimizer = OptimizerConfig::Sgd { lr: 0.01 };
        let arch = Architecture { hidden_dims: vec![], feature_dim: 3 };
        let mut model = EnsembleModel::init(cfg.model_config(&arch, 3, 2)).unwrap();
        let rows = train_stage2(&mut model, &stripped(&data), &cfg, None).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].loss_total <= w[0].loss_total + 1e-15, "{} > {}", w[1].loss_total, w[0].loss_total);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = fixture();
        let cfg = small_cfg(Variant::EnMdap, 2);
        assert!(run_variant(&data[..1], &arch(), &cfg).is_err());
        let empty = DomainDataset::new(Tensor::zeros(&[0, 3]), Some(vec![]), 2, "e").unwrap();
        let mut with_empty = data.clone();
        with_empty[0] = empty;
        assert!(run_variant(&with_empty, &arch(), &cfg).is_err());
        // target without labels cannot be evaluated
        assert!(run_variant(&stripped(&data), &arch(), &cfg).is_err());
    }

    #[test]
    fn evaluate_cases() {
        let data = fixture();
        let cfg = small_cfg(Variant::Mdap, 1);
        let mut model = EnsembleModel::init(cfg.model_config(&arch(), 3, 2)).unwrap();
        // constant class-0 predictor: zero weights, bias favouring class 0
        for t in model.all_params_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        model.final_classifier.bias = Tensor::vector(vec![1.0, 0.0]);
        assert_eq!(evaluate(&model, &data[0]).unwrap(), 0.5);
        assert!(evaluate(&model, &data[0].without_labels()).is_err());
        let empty = DomainDataset::new(Tensor::zeros(&[0, 3]), Some(vec![]), 2, "e").unwrap();
        assert!(evaluate(&model, &empty).is_err());
    }

    #[test]
    fn evaluate_perfect_model() {
        // identity extractor on 2-D one-hot inputs with a matching head
        let ds = DomainDataset::new(
            Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]]).unwrap(),
            Some(vec![0, 1, 0]),
            2,
            "t",
        )
        .unwrap();
        let cfg = ModelConfig {
            n_extractors: 1,
            input_dim: 2,
            hidden_dims: vec![],
            feature_dim: 2,
            n_classes: 2,
            init_seed: 0,
        };
        let mut model = EnsembleModel::init(cfg).unwrap();
        model.extractors[0][0].weight = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        model.extractors[0][0].bias = Tensor::zeros(&[2]);
        model.final_classifier.weight = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(evaluate(&model, &ds).unwrap(), 1.0);
    }

    #[test]
    fn metrics_csv_has_expected_columns() {
        let run = run_variant(&fixture(), &arch(), &small_cfg(Variant::EnMdap, 2)).unwrap();
        let csv = run.report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER);
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 11);
        assert!(first.starts_with("0,1,ENMDAP,"));
        assert_eq!(csv.lines().count(), 1 + 3);
    }
}
