use super::dataset::DomainDataset;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

// Stream tags; each random quantity is drawn from its own derived stream.
const TAG_CLASS_MEANS: u64 = 1;
const TAG_DOMAIN_SHIFT: u64 = 1_000;
const TAG_DOMAIN_SAMPLES: u64 = 2_000;

/// Per-domain diagonal scale is `exp(SCALE_RATIO · shift · z)`, `z ~ N(0, 1)`.
pub const SCALE_RATIO: f64 = 0.1;

/// Parameters of a synthetic multi-domain benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_domains: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub class_separation: f64,
    pub domain_shift_scale: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::invalid(msg)) };
        check(self.n_domains >= 2, "n_domains must be at least 2")?;
        check(self.n_classes >= 2, "n_classes must be at least 2")?;
        check(self.dim >= 1, "dim must be at least 1")?;
        check(self.class_separation > 0.0, "class_separation must be positive")?;
        check(self.domain_shift_scale >= 0.0, "domain_shift_scale must be non-negative")?;
        check(self.noise_sigma > 0.0, "noise_sigma must be positive")?;
        Ok(())
    }
}

fn domain_name(i: usize, n: usize) -> String {
    if i + 1 == n {
        "target".to_string()
    } else {
        format!("source{}", i + 1)
    }
}

/// Gaussian class clusters with a per-domain affine shift of the class means.
///
/// Class `c` has base mean `class_separation · u_c` with `u_c` a random unit
/// vector. Domain `i` maps every mean through `μ ↦ s_i ⊙ μ + t_i` where
/// `t_i = shift · z` and `s_i = exp(SCALE_RATIO · shift · z')` elementwise.
/// The last domain is named `target`; all domains carry labels.
pub fn gen_gaussian_domains(spec: &SyntheticSpec) -> Result<Vec<DomainDataset>> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = SplitMix64::derive(spec.seed, TAG_CLASS_MEANS);
    let base_means: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| {
            let mut u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            u.iter_mut().for_each(|v| *v *= spec.class_separation / norm);
            u
        })
        .collect();

    (0..spec.n_domains)
        .map(|i| {
            let mut shift_rng = SplitMix64::derive(spec.seed, TAG_DOMAIN_SHIFT + i as u64);
            let shift = spec.domain_shift_scale;
            let translation: Vec<f64> = (0..d).map(|_| shift * shift_rng.normal()).collect();
            let scale: Vec<f64> = (0..d).map(|_| (SCALE_RATIO * shift * shift_rng.normal()).exp()).collect();

            let mut rng = SplitMix64::derive(spec.seed, TAG_DOMAIN_SAMPLES + i as u64);
            let rows = spec.n_classes * spec.samples_per_class;
            let mut data = Vec::with_capacity(rows * d);
            let mut labels = Vec::with_capacity(rows);
            for (c, mu) in base_means.iter().enumerate() {
                let mean: Vec<f64> = (0..d).map(|j| scale[j] * mu[j] + translation[j]).collect();
                for _ in 0..spec.samples_per_class {
                    data.extend(mean.iter().map(|m| m + spec.noise_sigma * rng.normal()));
                    labels.push(c);
                }
            }
            DomainDataset::new(
                Tensor::new(vec![rows, d], data)?,
                Some(labels),
                spec.n_classes,
                domain_name(i, spec.n_domains),
            )
        })
        .collect()
}

/// Two interleaved half circles; domain `i` is rotated about the origin by
/// `i · domain_shift_scale` radians.
///
/// Arc positions are evenly spaced and shared by all domains; only the noise
/// differs between domains.
pub fn gen_moons_domains(spec: &SyntheticSpec) -> Result<Vec<DomainDataset>> {
    spec.validate()?;
    if spec.n_classes != 2 || spec.dim != 2 {
        return Err(Error::invalid("moons generator requires n_classes = 2 and dim = 2"));
    }
    let n = spec.samples_per_class;
    let arc = |j: usize| {
        if n <= 1 {
            0.0
        } else {
            std::f64::consts::PI * j as f64 / (n - 1) as f64
        }
    };
    (0..spec.n_domains)
        .map(|i| {
            let angle = i as f64 * spec.domain_shift_scale;
            let (sin, cos) = angle.sin_cos();
            let mut rng = SplitMix64::derive(spec.seed, TAG_DOMAIN_SAMPLES + i as u64);
            let mut data = Vec::with_capacity(4 * n);
            let mut labels = Vec::with_capacity(2 * n);
            for c in 0..2 {
                for j in 0..n {
                    let t = arc(j);
                    let (x, y) = if c == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
                    let x = x + spec.noise_sigma * rng.normal();
                    let y = y + spec.noise_sigma * rng.normal();
                    data.push(cos * x - sin * y);
                    data.push(sin * x + cos * y);
                    labels.push(c);
                }
            }
            DomainDataset::new(
                Tensor::new(vec![2 * n, 2], data)?,
                Some(labels),
                2,
                domain_name(i, spec.n_domains),
            )
        })
        .collect()
}
