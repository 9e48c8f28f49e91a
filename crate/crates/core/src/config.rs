//! Experiment configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Unknown or repeated
//! keys are rejected. Relative paths resolve against the config file's
//! directory.
//!
//! ```text
//! # data
//! generator = gaussian          # gaussian | moons
//! n_domains = 4                 # last domain is the target
//! domain_shift_scale = 1.5
//! # or: domains = a.csv, b.csv, target.csv
//!
//! variant = ENMDAP
//! n_extractors = 2
//! alpha = 0.1
//! ablate = SOURCE_COMBINED, MDAP_L, MDAP, ENMDAP_R:2, ENMDAP:2
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::data::{gen_gaussian_domains, gen_moons_domains, load_csv, DomainDataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::objective::LossWeights;
use crate::trainer::{AdamParams, Architecture, OptimizerConfig, TrainConfig, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    Gaussian,
    Moons,
}

/// A variant together with its extractor count, as run by an ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AblationCell {
    pub variant: Variant,
    pub n_extractors: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub generator: Generator,
    pub synthetic: SyntheticSpec,
    /// Dataset files, target last. Overrides the generator when non-empty.
    pub domains: Vec<PathBuf>,
    pub arch: Architecture,
    pub train: TrainConfig,
    pub out_dir: Option<PathBuf>,
    pub ablate: Vec<AblationCell>,
}

/// Adam step size of the default configuration; the synthetic benchmark
/// converges within its epoch budget at this rate.
pub const SYNTHETIC_LR: f64 = 0.005;

/// Benchmark used by the default configuration: three sources and a target.
pub fn default_synthetic() -> SyntheticSpec {
    SyntheticSpec {
        n_domains: 4,
        n_classes: 4,
        dim: 8,
        samples_per_class: 500,
        class_separation: 3.0,
        domain_shift_scale: 1.5,
        noise_sigma: 1.0,
        seed: 0,
    }
}

pub fn default_ablation(n: usize) -> Vec<AblationCell> {
    [
        (Variant::SourceCombined, 1),
        (Variant::MdapL, 1),
        (Variant::Mdap, 1),
        (Variant::EnMdapR, n),
        (Variant::EnMdap, n),
    ]
    .into_iter()
    .map(|(variant, n_extractors)| AblationCell { variant, n_extractors })
    .collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            generator: Generator::Gaussian,
            synthetic: default_synthetic(),
            domains: Vec::new(),
            arch: Architecture::default(),
            train: TrainConfig {
                optimizer: OptimizerConfig::Adam(AdamParams { lr: SYNTHETIC_LR, ..AdamParams::default() }),
                ..TrainConfig::default()
            },
            out_dir: None,
            ablate: default_ablation(2),
        }
    }
}

impl RunConfig {
    /// Loads the configured domains, target last.
    pub fn datasets(&self) -> Result<Vec<DomainDataset>> {
        if !self.domains.is_empty() {
            return self.domains.iter().map(load_csv).collect();
        }
        match self.generator {
            Generator::Gaussian => gen_gaussian_domains(&self.synthetic),
            Generator::Moons => gen_moons_domains(&self.synthetic),
        }
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

const KEYS: &[&str] = &[
    "generator",
    "n_domains",
    "n_classes",
    "dim",
    "samples_per_class",
    "class_separation",
    "domain_shift_scale",
    "noise_sigma",
    "data_seed",
    "domains",
    "n_extractors",
    "hidden_dims",
    "feature_dim",
    "variant",
    "optimizer",
    "lr",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "epochs_stage1",
    "epochs_stage2",
    "batch_size",
    "seed",
    "alpha",
    "beta",
    "K",
    "tau",
    "out_dir",
    "ablate",
];

struct Entries {
    values: HashMap<&'static str, (usize, String)>,
}

impl Entries {
    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        let line = self.values.get(key).map_or(0, |(l, _)| *l);
        Error::Config { key: key.to_string(), line, msg: msg.into() }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T, what: &str) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.err(key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.parse(key, default, "a number")?;
        if !v.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        let v: usize = self.parse(key, default, "a non-negative integer")?;
        if v < min {
            return Err(self.err(key, format!("must be at least {min}")));
        }
        Ok(v)
    }

    fn check(&self, key: &str, ok: bool, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.err(key, msg))
        }
    }
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses config text; relative paths are joined onto `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let mut values = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            key: content.to_string(),
            line,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let canonical = if key == "k_max" { "K" } else { key };
        let known = KEYS.iter().find(|k| **k == canonical).ok_or_else(|| Error::Config {
            key: key.to_string(),
            line,
            msg: "unknown key".into(),
        })?;
        if values.insert(*known, (line, value.trim().to_string())).is_some() {
            return Err(Error::Config { key: key.to_string(), line, msg: "duplicate key".into() });
        }
    }
    let e = Entries { values };
    let d = RunConfig::default();

    let generator = match e.raw("generator").map(str::to_ascii_lowercase).as_deref() {
        None | Some("gaussian") => Generator::Gaussian,
        Some("moons") => Generator::Moons,
        Some(other) => return Err(e.err("generator", format!("expected gaussian or moons, got `{other}`"))),
    };
    let ds = &d.synthetic;
    let synthetic = SyntheticSpec {
        n_domains: e.count("n_domains", ds.n_domains, 2)?,
        n_classes: e.count("n_classes", ds.n_classes, 2)?,
        dim: e.count("dim", ds.dim, 1)?,
        samples_per_class: e.count("samples_per_class", ds.samples_per_class, 1)?,
        class_separation: e.real("class_separation", ds.class_separation)?,
        domain_shift_scale: e.real("domain_shift_scale", ds.domain_shift_scale)?,
        noise_sigma: e.real("noise_sigma", ds.noise_sigma)?,
        seed: e.parse("data_seed", ds.seed, "an unsigned integer")?,
    };
    e.check("class_separation", synthetic.class_separation > 0.0, "must be positive")?;
    e.check("domain_shift_scale", synthetic.domain_shift_scale >= 0.0, "must be non-negative")?;
    e.check("noise_sigma", synthetic.noise_sigma > 0.0, "must be positive")?;
    if generator == Generator::Moons {
        e.check("n_classes", synthetic.n_classes == 2, "the moons generator has exactly 2 classes")?;
        e.check("dim", synthetic.dim == 2, "the moons generator is 2-dimensional")?;
    }

    let domains: Vec<PathBuf> =
        e.raw("domains").map_or_else(Vec::new, |raw| split_list(raw).map(|p| base.join(p)).collect());
    if e.raw("domains").is_some() {
        e.check("domains", domains.len() >= 2, "need at least one source and one target file")?;
    }

    let hidden_dims = match e.raw("hidden_dims") {
        None => d.arch.hidden_dims.clone(),
        Some(raw) => split_list(raw)
            .map(|h| match h.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(e.err("hidden_dims", format!("bad layer width `{h}`"))),
            })
            .collect::<Result<_>>()?,
    };
    let arch = Architecture { hidden_dims, feature_dim: e.count("feature_dim", d.arch.feature_dim, 1)? };

    let variant = match e.raw("variant") {
        None => d.train.variant,
        Some(raw) => raw.parse().map_err(|err: Error| e.err("variant", err.to_string()))?,
    };
    let n_extractors = e.count("n_extractors", d.train.n_extractors, 1)?;
    if variant.single_pair() && n_extractors != 1 {
        let key = if e.raw("n_extractors").is_some() { "n_extractors" } else { "variant" };
        return Err(e.err(key, format!("variant {variant} requires n_extractors = 1, got {n_extractors}")));
    }

    let adam_default = AdamParams::default();
    let lr = e.real("lr", d.train.optimizer.lr())?;
    e.check("lr", lr > 0.0, "must be positive")?;
    let optimizer = match e.raw("optimizer").map(str::to_ascii_lowercase).as_deref() {
        None | Some("adam") => {
            let p = AdamParams {
                lr,
                beta1: e.real("adam_beta1", adam_default.beta1)?,
                beta2: e.real("adam_beta2", adam_default.beta2)?,
                eps: e.real("adam_eps", adam_default.eps)?,
            };
            e.check("adam_beta1", (0.0..1.0).contains(&p.beta1), "must lie in [0, 1)")?;
            e.check("adam_beta2", (0.0..1.0).contains(&p.beta2), "must lie in [0, 1)")?;
            e.check("adam_eps", p.eps > 0.0, "must be positive")?;
            OptimizerConfig::Adam(p)
        }
        Some("sgd") => {
            for key in ["adam_beta1", "adam_beta2", "adam_eps"] {
                e.check(key, e.raw(key).is_none(), "only applies to optimizer = adam")?;
            }
            OptimizerConfig::Sgd { lr }
        }
        Some(other) => return Err(e.err("optimizer", format!("expected adam or sgd, got `{other}`"))),
    };

    let dw = d.train.weights;
    let weights = LossWeights {
        alpha: e.real("alpha", dw.alpha)?,
        beta: e.real("beta", dw.beta)?,
        k_max: e.parse("K", dw.k_max, "a positive integer")?,
        tau: e.real("tau", dw.tau)?,
    };
    e.check("alpha", weights.alpha >= 0.0, "must be non-negative")?;
    e.check("beta", weights.beta >= 0.0, "must be non-negative")?;
    e.check("K", weights.k_max >= 1, "must be at least 1")?;
    e.check("tau", (0.0..=1.0).contains(&weights.tau), "must lie in [0, 1]")?;

    let train = TrainConfig {
        variant,
        n_extractors,
        weights,
        optimizer,
        epochs_stage1: e.count("epochs_stage1", d.train.epochs_stage1, 0)?,
        epochs_stage2: e.count("epochs_stage2", d.train.epochs_stage2, 0)?,
        batch_size: e.count("batch_size", d.train.batch_size, 1)?,
        seed: e.parse("seed", d.train.seed, "an unsigned integer")?,
    };

    let ablate = match e.raw("ablate") {
        None => default_ablation(if variant.single_pair() { 2 } else { n_extractors }),
        Some(raw) => {
            let cells = split_list(raw)
                .map(|item| parse_cell(item).map_err(|msg| e.err("ablate", msg)))
                .collect::<Result<Vec<_>>>()?;
            e.check("ablate", !cells.is_empty(), "needs at least one variant")?;
            cells
        }
    };

    let cfg = RunConfig {
        generator,
        synthetic,
        domains,
        arch,
        train,
        out_dir: e.raw("out_dir").map(|p| base.join(p)),
        ablate,
    };
    cfg.train.validate().map_err(|err| e.err("variant", err.to_string()))?;
    Ok(cfg)
}

/// `VARIANT` or `VARIANT:n`.
fn parse_cell(item: &str) -> std::result::Result<AblationCell, String> {
    let (name, n) = match item.split_once(':') {
        Some((name, n)) => {
            let n: usize = n.trim().parse().map_err(|_| format!("bad extractor count in `{item}`"))?;
            (name, Some(n))
        }
        None => (item, None),
    };
    let variant: Variant = name.parse().map_err(|e: Error| e.to_string())?;
    let n_extractors = match (variant.single_pair(), n) {
        (true, None | Some(1)) => 1,
        (true, Some(n)) => return Err(format!("variant {variant} requires n = 1, got {n}")),
        (false, Some(n)) if n >= 1 => n,
        (false, Some(_)) => return Err(format!("`{item}` needs at least one extractor")),
        (false, None) => 2,
    };
    Ok(AblationCell { variant, n_extractors })
}
