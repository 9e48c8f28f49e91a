//! Divergence and bound quantities computed on empirical samples.

use crate::autodiff::Tensor;
use crate::data::DomainDataset;
use crate::error::{Error, Result};

/// Largest exponent set the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Labeled points viewed as an empirical measure.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDomain {
    points: Tensor,
    labels: Vec<usize>,
    class_probs: Vec<f64>,
}

impl EmpiricalDomain {
    pub fn new(points: Tensor, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let (n, _) = points.require_matrix("EmpiricalDomain")?;
        if n == 0 {
            return Err(Error::invalid("empirical domain needs at least one point"));
        }
        if labels.len() != n {
            return Err(Error::shape("EmpiricalDomain", format!("{n} points but {} labels", labels.len())));
        }
        let mut counts = vec![0usize; n_classes];
        for (row, &label) in labels.iter().enumerate() {
            *counts.get_mut(label).ok_or(Error::Label { row, label, classes: n_classes })? += 1;
        }
        let class_probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Ok(EmpiricalDomain { points, labels, class_probs })
    }

    pub fn from_dataset(ds: &DomainDataset) -> Result<Self> {
        let labels =
            ds.labels().ok_or_else(|| Error::invalid(format!("domain `{}` has no labels", ds.name())))?;
        EmpiricalDomain::new(ds.features().clone(), labels.to_vec(), ds.n_classes())
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_probs(&self) -> &[f64] {
        &self.class_probs
    }

    pub fn n_classes(&self) -> usize {
        self.class_probs.len()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn check_pair(a: &EmpiricalDomain, b: &EmpiricalDomain, k: u32) -> Result<()> {
    if k < 1 {
        return Err(Error::invalid("moment order k must be at least 1"));
    }
    if a.dim() != b.dim() {
        return Err(Error::shape("lm_divergence", format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    if a.n_classes() != b.n_classes() {
        return Err(Error::shape(
            "lm_divergence",
            format!("class counts {} and {}", a.n_classes(), b.n_classes()),
        ));
    }
    Ok(())
}

/// Number of exponent tuples of length `dim` summing to `k`.
pub fn exponent_count(dim: usize, k: u32) -> u128 {
    // binom(dim + k - 1, k), kept exact while it fits
    let (n, r) = ((dim + k as usize).saturating_sub(1) as u128, k as u128);
    if dim == 0 {
        return u128::from(k == 0);
    }
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exponent tuples of length `dim` summing to `k`, in lexicographic order
/// with the largest leading exponent first: `(k,0,..)`, `(k-1,1,..)`, ...
pub fn exponent_tuples(dim: usize, k: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; dim];
    if dim == 0 {
        return out;
    }
    // iterative odometer over the first dim-1 coordinates
    cur[0] = k;
    loop {
        out.push(cur.clone());
        // find the rightmost coordinate (excluding the last) that can give one unit
        let Some(j) = (0..dim - 1).rev().find(|&j| cur[j] > 0) else { break };
        cur[j] -= 1;
        let rest: u32 = cur[j + 1..].iter().sum::<u32>() + 1;
        cur[j + 1..].iter_mut().for_each(|v| *v = 0);
        cur[j + 1] = rest;
    }
    out
}

/// Per-class sums of `Π x_j^{i_j}` for each tuple, scaled by 1/n.
fn weighted_moments(d: &EmpiricalDomain, tuples: &[Vec<u32>]) -> Vec<Vec<f64>> {
    let n = d.len() as f64;
    let mut acc = vec![vec![0.0; tuples.len()]; d.n_classes()];
    for (r, &c) in d.labels.iter().enumerate() {
        let x = d.points.row(r);
        for (t, tuple) in tuples.iter().enumerate() {
            let m: f64 = x.iter().zip(tuple).map(|(v, &e)| v.powi(e as i32)).product();
            acc[c][t] += m;
        }
    }
    acc.iter_mut().flatten().for_each(|v| *v /= n);
    acc
}

/// Empirical k-th order label-wise moment divergence: the L1 distance between
/// the class-probability-weighted moment vectors of the two domains.
pub fn lm_divergence(a: &EmpiricalDomain, b: &EmpiricalDomain, k: u32) -> Result<f64> {
    check_pair(a, b, k)?;
    let tuples = exponent_tuples(a.dim(), k);
    let ma = weighted_moments(a, &tuples);
    let mb = weighted_moments(b, &tuples);
    Ok(ma.iter().flatten().zip(mb.iter().flatten()).map(|(x, y)| (x - y).abs()).sum())
}

fn enumerate(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        prefix.push(left);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in 0..=left {
        prefix.push(e);
        enumerate(dim, left - e, prefix, out);
        prefix.pop();
    }
}

fn naive_moment(d: &EmpiricalDomain, class: usize, tuple: &[u32]) -> f64 {
    let members: Vec<usize> = (0..d.len()).filter(|&r| d.labels[r] == class).collect();
    if members.is_empty() {
        return 0.0;
    }
    let mut mean = 0.0;
    for &r in &members {
        let mut prod = 1.0;
        for (j, &e) in tuple.iter().enumerate() {
            for _ in 0..e {
                prod *= d.points.row(r)[j];
            }
        }
        mean += prod;
    }
    mean /= members.len() as f64;
    d.class_probs[class] * mean
}

/// Reference evaluation of [`lm_divergence`] by explicit enumeration.
pub fn lm_divergence_oracle(a: &EmpiricalDomain, b: &EmpiricalDomain, k: u32) -> Result<f64> {
    check_pair(a, b, k)?;
    let count = exponent_count(a.dim(), k);
    if count > ORACLE_LIMIT {
        return Err(Error::invalid(format!(
            "{count} exponent tuples exceed the enumeration limit of {ORACLE_LIMIT}"
        )));
    }
    let mut tuples = Vec::new();
    enumerate(a.dim(), k, &mut Vec::new(), &mut tuples);
    let mut total = 0.0;
    for tuple in tuples.iter().rev() {
        for c in (0..a.n_classes()).rev() {
            total += (naive_moment(a, c, tuple) - naive_moment(b, c, tuple)).abs();
        }
    }
    Ok(total)
}

/// Sample sizes and weights entering the finite-sample term of the bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub alpha: Vec<f64>,
    pub n_samples: Vec<usize>,
    pub vc_dim: usize,
    pub delta: f64,
}

fn check_simplex(alpha: &[f64]) -> Result<()> {
    if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::invalid("source weights must be finite and non-negative"));
    }
    let s: f64 = alpha.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("source weights sum to {s}, expected 1")));
    }
    Ok(())
}

impl BoundInputs {
    pub fn total_samples(&self) -> usize {
        self.n_samples.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.alpha.len() != self.n_samples.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} sources",
                self.alpha.len(),
                self.n_samples.len()
            )));
        }
        check_simplex(&self.alpha)?;
        if self.n_samples.contains(&0) {
            return Err(Error::invalid("every source needs at least one sample"));
        }
        if self.vc_dim == 0 {
            return Err(Error::invalid("VC dimension must be positive"));
        }
        if 2 * self.total_samples() <= self.vc_dim {
            return Err(Error::invalid("need 2m > d"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// `4 √((Σ α_i²/β_i)(2d(ln(2m/d) + 1) + 2 ln(4/δ)) / m)` with `β_i = n_i/m`.
pub fn eta_term(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let m = b.total_samples() as f64;
    let d = b.vc_dim as f64;
    let weight: f64 = b.alpha.iter().zip(&b.n_samples).map(|(a, &n)| a * a / (n as f64 / m)).sum();
    let capacity = 2.0 * d * ((2.0 * m / d).ln() + 1.0) + 2.0 * (4.0 / b.delta).ln();
    Ok(4.0 * (weight * capacity / m).sqrt())
}

fn mismatch_rate(pred: &[usize], labels: &[usize]) -> f64 {
    pred.iter().zip(labels).filter(|(p, y)| p != y).count() as f64 / labels.len() as f64
}

/// `Σ α_i · err_i` over sources.
pub fn weighted_empirical_error(predictions: &[&[usize]], labels: &[&[usize]], alpha: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.len() != alpha.len() {
        return Err(Error::invalid(format!(
            "{} prediction sets, {} label sets, {} weights",
            predictions.len(),
            labels.len(),
            alpha.len()
        )));
    }
    check_simplex(alpha)?;
    let mut total = 0.0;
    for (i, ((p, y), a)) in predictions.iter().zip(labels).zip(alpha).enumerate() {
        if p.len() != y.len() || y.is_empty() {
            return Err(Error::shape(
                "weighted_empirical_error",
                format!("source {i}: {} predictions for {} labels", p.len(), y.len()),
            ));
        }
        total += a * mismatch_rate(p, y);
    }
    Ok(total)
}

/// Fraction of positions where two hypotheses disagree.
pub fn disagreement_ratio(h1: &[usize], h2: &[usize]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::shape("disagreement_ratio", format!("lengths {} and {}", h1.len(), h2.len())));
    }
    if h1.is_empty() {
        return Err(Error::invalid("disagreement ratio of empty prediction vectors"));
    }
    Ok(mismatch_rate(h1, h2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dom(rows: &[&[f64]], labels: &[usize], classes: usize) -> EmpiricalDomain {
        EmpiricalDomain::new(Tensor::from_rows(rows).unwrap(), labels.to_vec(), classes).unwrap()
    }

    #[test]
    fn one_dimensional_hand_values() {
        let a = dom(&[&[0.0], &[2.0]], &[0, 0], 1);
        let b = dom(&[&[3.0]], &[0], 1);
        assert_eq!(lm_divergence(&a, &b, 1).unwrap(), 2.0);
        assert_eq!(lm_divergence(&a, &b, 2).unwrap(), 7.0);
        assert_eq!(lm_divergence_oracle(&a, &b, 2).unwrap(), 7.0);
    }

    #[test]
    fn two_dimensional_hand_value() {
        let a = dom(&[&[1.0, 2.0]], &[0], 1);
        let b = dom(&[&[0.0, 0.0]], &[0], 1);
        assert_eq!(lm_divergence(&a, &b, 1).unwrap(), 3.0);
    }

    #[test]
    fn identical_domains_have_zero_divergence() {
        let a = dom(&[&[1.0, -2.0], &[0.5, 3.0], &[2.0, 2.0]], &[0, 1, 1], 2);
        for k in 1..=4 {
            assert_eq!(lm_divergence(&a, &a, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn tuple_enumeration() {
        assert_eq!(exponent_tuples(2, 1), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(
            exponent_tuples(3, 2),
            vec![vec![2, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![0, 2, 0], vec![0, 1, 1], vec![0, 0, 2]]
        );
        assert_eq!(exponent_count(3, 2), 6);
        let mut rec = Vec::new();
        enumerate(3, 2, &mut Vec::new(), &mut rec);
        assert_eq!(rec.len(), 6);
        for (dim, k) in [(1, 5), (4, 3), (5, 4)] {
            assert_eq!(exponent_tuples(dim, k).len() as u128, exponent_count(dim, k));
        }
    }

    #[test]
    fn missing_class_contributes_present_side() {
        // class 1 only in a: |p̂_a(1)·x| = 0.5·4
        let a = dom(&[&[1.0], &[4.0]], &[0, 1], 2);
        let b = dom(&[&[1.0]], &[0], 2);
        let d = lm_divergence(&a, &b, 1).unwrap();
        assert!((d - (0.5 + 2.0)).abs() < 1e-15, "{d}");
        assert!((lm_divergence_oracle(&a, &b, 1).unwrap() - d).abs() < 1e-15);
    }

    #[test]
    fn balanced_classes_use_uniform_weights() {
        let a = dom(&[&[1.0], &[3.0], &[5.0], &[7.0]], &[0, 0, 1, 1], 2);
        let b = dom(&[&[0.0], &[0.0], &[0.0], &[0.0]], &[0, 0, 1, 1], 2);
        assert_eq!(a.class_probs(), &[0.5, 0.5]);
        // 0.5·2 + 0.5·6
        assert_eq!(lm_divergence(&a, &b, 1).unwrap(), 4.0);
    }

    #[test]
    fn single_point_domains_reduce_to_monomials() {
        let a = dom(&[&[2.0, -1.0, 0.5]], &[0], 1);
        let b = dom(&[&[1.0, 3.0, -2.0]], &[0], 1);
        let expect: f64 = exponent_tuples(3, 3)
            .iter()
            .map(|t| {
                let pa: f64 = a.points.row(0).iter().zip(t).map(|(x, &e)| x.powi(e as i32)).product();
                let pb: f64 = b.points.row(0).iter().zip(t).map(|(x, &e)| x.powi(e as i32)).product();
                (pa - pb).abs()
            })
            .sum();
        assert!((lm_divergence_oracle(&a, &b, 3).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        let a = dom(&[&[1.0]], &[0], 1);
        let b = dom(&[&[1.0, 2.0]], &[0], 1);
        let c = dom(&[&[1.0]], &[0], 2);
        assert!(lm_divergence(&a, &b, 1).is_err());
        assert!(lm_divergence(&a, &c, 1).is_err());
        assert!(lm_divergence(&a, &a, 0).is_err());
        assert!(EmpiricalDomain::new(Tensor::from_rows(&[[1.0]]).unwrap(), vec![3], 2).is_err());
        let wide = dom(&[&[0.0; 40]], &[0], 1);
        assert!(lm_divergence_oracle(&wide, &wide, 6).is_err());
    }

    #[test]
    fn eta_fixture() {
        let b = BoundInputs { alpha: vec![1.0], n_samples: vec![1000], vc_dim: 10, delta: 0.1 };
        let direct = 4.0 * ((20.0 * (200f64.ln() + 1.0) + 2.0 * 40f64.ln()) / 1000.0).sqrt();
        let eta = eta_term(&b).unwrap();
        assert!((eta - direct).abs() < 1e-12);
        assert!((eta - 1.4606).abs() < 1e-3, "{eta}");
    }

    #[test]
    fn eta_monotone() {
        let base = BoundInputs { alpha: vec![0.5, 0.5], n_samples: vec![500, 500], vc_dim: 10, delta: 0.1 };
        let doubled = BoundInputs { n_samples: vec![1000, 1000], ..base.clone() };
        assert!(eta_term(&doubled).unwrap() < eta_term(&base).unwrap());
        let tighter = BoundInputs { delta: 0.01, ..base.clone() };
        assert!(eta_term(&tighter).unwrap() > eta_term(&base).unwrap());
    }

    #[test]
    fn eta_minimized_at_alpha_equal_beta() {
        let n = vec![200, 500, 300];
        let beta: Vec<f64> = n.iter().map(|&v| v as f64 / 1000.0).collect();
        let eta = |alpha: Vec<f64>| {
            eta_term(&BoundInputs { alpha, n_samples: n.clone(), vc_dim: 5, delta: 0.05 }).unwrap()
        };
        let best = eta(beta.clone());
        let steps = 40;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let a = vec![
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ];
                assert!(eta(a) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn eta_rejects_bad_inputs() {
        let ok = BoundInputs { alpha: vec![1.0], n_samples: vec![10], vc_dim: 3, delta: 0.5 };
        assert!(eta_term(&ok).is_ok());
        assert!(eta_term(&BoundInputs { vc_dim: 20, ..ok.clone() }).is_err());
        assert!(eta_term(&BoundInputs { delta: 1.0, ..ok.clone() }).is_err());
        assert!(eta_term(&BoundInputs { alpha: vec![0.9], ..ok.clone() }).is_err());
        assert!(eta_term(&BoundInputs { alpha: vec![0.5, 0.5], ..ok }).is_err());
    }

    #[test]
    fn weighted_error_cases() {
        let y: &[usize] = &[0, 1, 0, 1, 1];
        assert_eq!(weighted_empirical_error(&[y], &[y], &[1.0]).unwrap(), 0.0);
        // errors 0.2 and 0.4
        let p1: &[usize] = &[1, 1, 0, 1, 1];
        let p2: &[usize] = &[1, 0, 0, 1, 1];
        let e = weighted_empirical_error(&[p1, p2], &[y, y], &[0.5, 0.5]).unwrap();
        assert!((e - 0.3).abs() < 1e-15);
        assert_eq!(weighted_empirical_error(&[p1, p2], &[y, y], &[1.0, 0.0]).unwrap(), 0.2);
        assert!(weighted_empirical_error(&[p1, p2], &[y, y], &[0.6, 0.6]).is_err());
        assert!(weighted_empirical_error(&[&p1[..3]], &[y], &[1.0]).is_err());
    }

    #[test]
    fn disagreement_cases() {
        let a = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        assert_eq!(disagreement_ratio(&a, &a).unwrap(), 0.0);
        let flip: Vec<usize> = a.iter().map(|v| 1 - v).collect();
        assert_eq!(disagreement_ratio(&a, &flip).unwrap(), 1.0);
        let mut three = a;
        three[..3].iter_mut().for_each(|v| *v = 1 - *v);
        assert_eq!(disagreement_ratio(&a, &three).unwrap(), 0.3);
        assert!(disagreement_ratio(&a, &a[..4]).is_err());
        assert!(disagreement_ratio(&[], &[]).is_err());
    }

    fn domain_strategy(dim: usize, classes: usize) -> impl Strategy<Value = EmpiricalDomain> {
        (1usize..=12).prop_flat_map(move |n| {
            (proptest::collection::vec(-2.0f64..2.0, n * dim), proptest::collection::vec(0..classes, n))
                .prop_map(move |(data, labels)| {
                    EmpiricalDomain::new(Tensor::new(vec![n, dim], data).unwrap(), labels, classes).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn oracle_agrees(
            (a, b, k) in (1usize..=3, 1usize..=3).prop_flat_map(|(dim, c)| {
                (domain_strategy(dim, c), domain_strategy(dim, c), 1u32..=3)
            })
        ) {
            let fast = lm_divergence(&a, &b, k).unwrap();
            let slow = lm_divergence_oracle(&a, &b, k).unwrap();
            prop_assert!((fast - slow).abs() < 1e-10 * (1.0 + fast.abs()));
            prop_assert!(fast >= 0.0);
            prop_assert!((fast - lm_divergence(&b, &a, k).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn triangle_inequality(
            (a, b, c, k) in (1usize..=3).prop_flat_map(|dim| {
                (domain_strategy(dim, 2), domain_strategy(dim, 2), domain_strategy(dim, 2), 1u32..=3)
            })
        ) {
            let ab = lm_divergence(&a, &b, k).unwrap();
            let bc = lm_divergence(&b, &c, k).unwrap();
            let ac = lm_divergence(&a, &c, k).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn disagreement_is_one_triangular(
            (h1, h2, h3) in (1usize..30).prop_flat_map(|n| {
                let v = || proptest::collection::vec(0usize..3, n);
                (v(), v(), v())
            })
        ) {
            let d12 = disagreement_ratio(&h1, &h2).unwrap();
            let d13 = disagreement_ratio(&h1, &h3).unwrap();
            let d32 = disagreement_ratio(&h3, &h2).unwrap();
            prop_assert!(d12 <= d13 + d32 + 1e-15);
        }
    }
}
