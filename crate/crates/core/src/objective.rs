//! Training losses: label-wise moment matching, label classification,
//! feature diversification, their weighted combination, and the
//! confidence-thresholded pseudolabel rule.

use crate::autodiff::{argmax, softmax_rows, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{classify_pair, extract, extractor_classify, final_classify, ModelVars};

/// Pseudolabels for one target batch.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudolabelAssignment {
    pub labels: Vec<usize>,
    pub included: Vec<bool>,
    pub confidences: Vec<f64>,
}

impl PseudolabelAssignment {
    pub fn included_count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }
}

/// Labels each row by its argmax; a row is included only when its softmax
/// confidence is strictly greater than `tau`.
pub fn assign_pseudolabels(logits: &Tensor, tau: f64) -> Result<PseudolabelAssignment> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau must lie in [0, 1], got {tau}")));
    }
    let probs = softmax_rows(logits);
    let mut out = PseudolabelAssignment {
        labels: Vec::with_capacity(probs.rows()),
        included: Vec::with_capacity(probs.rows()),
        confidences: Vec::with_capacity(probs.rows()),
    };
    for r in 0..probs.rows() {
        let row = probs.row(r);
        let label = argmax(row);
        let conf = row[label];
        out.labels.push(label);
        out.confidences.push(conf);
        out.included.push(conf > tau);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Weight of the summed moment-matching terms.
    pub alpha: f64,
    /// Weight of the feature diversifying loss.
    pub beta: f64,
    /// Highest moment order.
    pub k_max: u32,
    /// Pseudolabel confidence threshold.
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 0.1, beta: 1.0, k_max: 2, tau: 0.9 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be a finite non-negative number"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta must be a finite non-negative number"));
        }
        if self.k_max < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::invalid("tau must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Features of one domain with per-row labels and an inclusion mask.
#[derive(Clone, Copy, Debug)]
pub struct DomainFeatures<'a> {
    pub features: Var,
    pub labels: &'a [usize],
    pub included: &'a [bool],
}

fn binomial2(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

/// Label-wise moment matching over all unordered domain pairs.
///
/// Terms where either side has no included rows of a class are skipped; the
/// leading `1/C · binom(D, 2)⁻¹` normalization is not adjusted. Returns a
/// constant zero when every term is skipped.
pub fn lmm_loss(g: &mut Graph, domains: &[DomainFeatures<'_>], n_classes: usize, k_max: u32) -> Result<Var> {
    if domains.len() < 2 {
        return Err(Error::invalid("moment matching needs at least two domains"));
    }
    if k_max < 1 {
        return Err(Error::invalid("K must be at least 1"));
    }
    for d in domains {
        let rows = g.value(d.features).rows();
        if d.labels.len() != rows || d.included.len() != rows {
            return Err(Error::shape(
                "lmm_loss",
                format!("{rows} rows with {} labels and {} mask entries", d.labels.len(), d.included.len()),
            ));
        }
    }
    // masks[domain][class]
    let masks: Vec<Vec<Option<Vec<bool>>>> = domains
        .iter()
        .map(|d| {
            (0..n_classes)
                .map(|c| {
                    let m: Vec<bool> =
                        d.labels.iter().zip(d.included).map(|(&l, &inc)| inc && l == c).collect();
                    m.contains(&true).then_some(m)
                })
                .collect()
        })
        .collect();

    let mut terms = Vec::new();
    for k in 1..=k_max {
        // moment[domain][class]
        let mut moments: Vec<Vec<Option<Var>>> = Vec::with_capacity(domains.len());
        for (d, dm) in domains.iter().zip(&masks) {
            let powered = g.pow(d.features, k)?;
            let per_class = dm
                .iter()
                .map(|m| m.as_ref().map(|m| g.masked_mean_rows(powered, m)).transpose())
                .collect::<Result<Vec<_>>>()?;
            moments.push(per_class);
        }
        for a in 0..domains.len() {
            for b in a + 1..domains.len() {
                for (&ma, &mb) in moments[a].iter().zip(&moments[b]) {
                    if let (Some(ma), Some(mb)) = (ma, mb) {
                        terms.push(g.l2_norm_diff(ma, mb)?);
                    }
                }
            }
        }
    }
    let scale = 1.0 / (n_classes as f64 * binomial2(domains.len()));
    match g.add_all(&terms)? {
        Some(sum) => Ok(g.scale(sum, scale)),
        None => Ok(g.constant(Tensor::scalar(0.0))),
    }
}

/// Marginal moment matching: every row of every domain in one class, so the
/// normalization is `binom(D, 2)⁻¹` alone.
pub fn marginal_mm_loss(g: &mut Graph, features: &[Var], k_max: u32) -> Result<Var> {
    let rows: Vec<usize> = features.iter().map(|&f| g.value(f).rows()).collect();
    let zeros: Vec<Vec<usize>> = rows.iter().map(|&r| vec![0; r]).collect();
    let ones: Vec<Vec<bool>> = rows.iter().map(|&r| vec![true; r]).collect();
    let domains: Vec<DomainFeatures<'_>> = features
        .iter()
        .zip(zeros.iter().zip(&ones))
        .map(|(&features, (labels, included))| DomainFeatures { features, labels, included })
        .collect();
    lmm_loss(g, &domains, 1, k_max)
}

/// A labeled source mini-batch.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceBatch {
    pub x: Tensor,
    pub y: Vec<usize>,
}

/// One mini-batch per domain for a training step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepBatch {
    pub sources: Vec<SourceBatch>,
    pub target: Tensor,
}

fn mean_of(g: &mut Graph, terms: &[Var]) -> Result<Var> {
    let n = terms.len() as f64;
    let sum = g.add_all(terms)?.ok_or_else(|| Error::invalid("no terms to average"))?;
    Ok(g.scale(sum, 1.0 / n))
}

fn check_source_batches(sources: &[(Var, &[usize])], g: &Graph) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::invalid("label classification needs at least one source batch"));
    }
    if let Some(i) = sources.iter().position(|(x, _)| g.value(*x).rows() == 0) {
        return Err(Error::invalid(format!("source batch {i} is empty")));
    }
    Ok(())
}

fn lc_from_features(
    g: &mut Graph,
    vars: &ModelVars,
    k: usize,
    feats: &[Var],
    labels: &[&[usize]],
) -> Result<Var> {
    let per_domain = feats
        .iter()
        .zip(labels)
        .map(|(&f, y)| {
            let logits = classify_pair(g, vars, k, f)?;
            g.softmax_cross_entropy(logits, y)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_of(g, &per_domain)
}

/// Label classification loss of pair `k`: mean over sources of the batch-mean
/// cross-entropy.
pub fn lc_loss(g: &mut Graph, vars: &ModelVars, k: usize, sources: &[(Var, &[usize])]) -> Result<Var> {
    check_source_batches(sources, g)?;
    let feats = sources.iter().map(|(x, _)| extract(g, vars, k, *x)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<&[usize]> = sources.iter().map(|(_, y)| *y).collect();
    lc_from_features(g, vars, k, &feats, &labels)
}

/// `feats[k][d]` is extractor `k` applied to domain `d`.
fn fd_from_features(g: &mut Graph, vars: &ModelVars, feats: &[Vec<Var>]) -> Result<Var> {
    let n_domains = feats.first().map_or(0, Vec::len);
    let mut per_domain = Vec::with_capacity(n_domains);
    for d in 0..n_domains {
        let mut per_extractor = Vec::with_capacity(feats.len());
        for (k, fk) in feats.iter().enumerate() {
            let logits = extractor_classify(g, vars, fk[d])?;
            let rows = g.value(logits).rows();
            per_extractor.push(g.softmax_cross_entropy(logits, &vec![k; rows])?);
        }
        let sum = g.add_all(&per_extractor)?.expect("at least one extractor");
        per_domain.push(sum);
    }
    mean_of(g, &per_domain)
}

/// Feature diversifying loss over every domain batch (sources and target):
/// the extractor classifier must recognize which extractor produced a feature.
pub fn fd_loss(g: &mut Graph, vars: &ModelVars, domains: &[Var]) -> Result<Var> {
    if domains.is_empty() {
        return Err(Error::invalid("feature diversifying loss needs at least one domain"));
    }
    let feats = (0..vars.n_extractors())
        .map(|k| domains.iter().map(|&x| extract(g, vars, k, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    fd_from_features(g, vars, &feats)
}

/// Label classification of the final classifier on concatenated features.
/// Only the final classifier receives gradients when the model was bound with
/// [`ParamGroup::Final`](crate::model::ParamGroup::Final).
pub fn final_lc_loss(g: &mut Graph, vars: &ModelVars, sources: &[(Var, &[usize])]) -> Result<Var> {
    check_source_batches(sources, g)?;
    let per_domain = sources
        .iter()
        .map(|(x, y)| {
            let logits = final_classify(g, vars, *x)?;
            g.softmax_cross_entropy(logits, y)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_of(g, &per_domain)
}

/// How moments are matched across domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Matching {
    /// Per-class moments, target classes from pseudolabels.
    LabelWise,
    /// One moment per domain, labels ignored.
    Marginal,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossMode {
    pub matching: Matching,
    pub diversify: bool,
}

impl LossMode {
    pub const FULL: LossMode = LossMode { matching: Matching::LabelWise, diversify: true };
}

/// The combined stage-1 loss and its parts.
#[derive(Clone, Debug)]
pub struct LossBreakdown {
    pub total: Var,
    /// Label classification loss per pair.
    pub lc: Vec<f64>,
    /// Moment matching loss per pair (unweighted).
    pub lmm: Vec<f64>,
    /// Feature diversifying loss (unweighted).
    pub fd: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Target rows included by each pair's pseudolabels.
    pub pseudolabeled: Vec<usize>,
    pub target_rows: usize,
}

impl LossBreakdown {
    pub fn weighted_sum(&self) -> f64 {
        self.lc.iter().sum::<f64>() + self.alpha * self.lmm.iter().sum::<f64>() + self.beta * self.fd
    }

    pub fn describe(&self) -> String {
        format!("lc={:?} lmm={:?} fd={} alpha={} beta={}", self.lc, self.lmm, self.fd, self.alpha, self.beta)
    }
}

/// `Σ_k lc_k + α Σ_k lmm_k + β fd`, where pair `k` matches moments with its
/// own pseudolabels.
pub fn total_loss(
    g: &mut Graph,
    vars: &ModelVars,
    batch: &StepBatch,
    n_classes: usize,
    weights: &LossWeights,
    mode: LossMode,
) -> Result<LossBreakdown> {
    weights.validate()?;
    if batch.sources.is_empty() {
        return Err(Error::invalid("at least one source batch is required"));
    }
    let n = vars.n_extractors();
    let source_x: Vec<Var> = batch.sources.iter().map(|s| g.constant(s.x.clone())).collect();
    let source_y: Vec<&[usize]> = batch.sources.iter().map(|s| s.y.as_slice()).collect();
    let target_x = g.constant(batch.target.clone());
    let pairs: Vec<(Var, &[usize])> = source_x.iter().copied().zip(source_y.iter().copied()).collect();
    check_source_batches(&pairs, g)?;
    let target_rows = batch.target.rows();
    let all_x: Vec<Var> = source_x.iter().copied().chain(std::iter::once(target_x)).collect();

    // feats[k][d], target last
    let feats = (0..n)
        .map(|k| all_x.iter().map(|&x| extract(g, vars, k, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let mut terms = Vec::new();
    let mut lc = Vec::with_capacity(n);
    let mut lmm = Vec::with_capacity(n);
    let mut pseudolabeled = Vec::with_capacity(n);
    let mut lmm_vars = Vec::with_capacity(n);
    for (k, fk) in feats.iter().enumerate() {
        let l = lc_from_features(g, vars, k, &fk[..fk.len() - 1], &source_y)?;
        lc.push(g.value(l).item());
        terms.push(l);

        let m = match mode.matching {
            Matching::LabelWise => {
                let target_feat = fk[fk.len() - 1];
                let logits = classify_pair(g, vars, k, target_feat)?;
                let pl = assign_pseudolabels(g.value(logits), weights.tau)?;
                pseudolabeled.push(pl.included_count());
                let source_masks: Vec<Vec<bool>> = source_y.iter().map(|y| vec![true; y.len()]).collect();
                let mut domains: Vec<DomainFeatures<'_>> = source_y
                    .iter()
                    .zip(&source_masks)
                    .zip(fk)
                    .map(|((y, m), &f)| DomainFeatures { features: f, labels: y, included: m })
                    .collect();
                domains.push(DomainFeatures {
                    features: target_feat,
                    labels: &pl.labels,
                    included: &pl.included,
                });
                Some(lmm_loss(g, &domains, n_classes, weights.k_max)?)
            }
            Matching::Marginal => {
                pseudolabeled.push(0);
                Some(marginal_mm_loss(g, fk, weights.k_max)?)
            }
            Matching::None => {
                pseudolabeled.push(0);
                None
            }
        };
        lmm.push(m.map_or(0.0, |m| g.value(m).item()));
        lmm_vars.extend(m);
    }
    if let Some(sum) = g.add_all(&lmm_vars)? {
        terms.push(g.scale(sum, weights.alpha));
    }

    let fd = if mode.diversify {
        let f = fd_from_features(g, vars, &feats)?;
        let value = g.value(f).item();
        terms.push(g.scale(f, weights.beta));
        value
    } else {
        0.0
    };

    let total = g.add_all(&terms)?.expect("lc terms are always present");
    Ok(LossBreakdown {
        total,
        lc,
        lmm,
        fd,
        alpha: weights.alpha,
        beta: if mode.diversify { weights.beta } else { 0.0 },
        pseudolabeled,
        target_rows,
    })
}
