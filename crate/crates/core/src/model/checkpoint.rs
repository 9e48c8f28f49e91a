//! Line-oriented model checkpoints.
//!
//! ```text
//! n=<n>,input_dim=<d>,hidden=<h1;h2;...>,feature_dim=<f>,classes=<C>,init_seed=<s>
//! <name> <d1>x<d2> v1 v2 ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{EnsembleModel, ModelConfig};
use crate::data::fmt_f64;
use crate::error::{Error, Result};

pub fn to_checkpoint_string(model: &EnsembleModel) -> String {
    let c = model.config();
    let hidden: Vec<String> = c.hidden_dims.iter().map(usize::to_string).collect();
    let mut out = format!(
        "n={},input_dim={},hidden={},feature_dim={},classes={},init_seed={}\n",
        c.n_extractors,
        c.input_dim,
        hidden.join(";"),
        c.feature_dim,
        c.n_classes,
        c.init_seed
    );
    for (name, t) in model.named_params() {
        let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        let _ = write!(out, "{name} {}", shape.join("x"));
        for v in t.data() {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn save_checkpoint(model: &EnsembleModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_checkpoint_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, &path.display().to_string())
}

fn parse_header(line: &str, origin: &str) -> Result<ModelConfig> {
    let err = |msg: String| Error::Format { path: origin.into(), line: 1, msg };
    let mut fields = std::collections::HashMap::new();
    for part in line.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| err(format!("malformed header field `{part}`")))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| err(format!("missing `{key}`")));
    let num = |key: &str| -> Result<usize> {
        let raw = get(key)?;
        raw.parse().map_err(|_| err(format!("`{key}` is not an integer: `{raw}`")))
    };
    let hidden_raw = get("hidden")?;
    let hidden_dims = if hidden_raw.is_empty() {
        Vec::new()
    } else {
        hidden_raw
            .split(';')
            .map(|h| h.parse().map_err(|_| err(format!("bad hidden width `{h}`"))))
            .collect::<Result<_>>()?
    };
    let init_seed = match fields.get("init_seed") {
        Some(raw) => raw.parse().map_err(|_| err(format!("bad init_seed `{raw}`")))?,
        None => 0,
    };
    let cfg = ModelConfig {
        n_extractors: num("n")?,
        input_dim: num("input_dim")?,
        hidden_dims,
        feature_dim: num("feature_dim")?,
        n_classes: num("classes")?,
        init_seed,
    };
    cfg.validate().map_err(|e| err(e.to_string()))?;
    Ok(cfg)
}

/// Parses checkpoint text. Parameter names, order and shapes must match the
/// architecture in the header.
pub fn parse_checkpoint(text: &str, origin: &str) -> Result<EnsembleModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format {
        path: origin.into(),
        line: 1,
        msg: "empty checkpoint".into(),
    })?;
    let cfg = parse_header(header, origin)?;
    let mut model = EnsembleModel::init(cfg)?;
    let expected: Vec<(String, Vec<usize>)> =
        model.named_params().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();

    let mut values = Vec::with_capacity(expected.len());
    for (name, shape) in &expected {
        let (idx, line) = lines.next().ok_or_else(|| Error::Format {
            path: origin.into(),
            line: text.lines().count() + 1,
            msg: format!("missing parameter `{name}`"),
        })?;
        let line_no = idx + 1;
        let err = |msg: String| Error::Format { path: origin.into(), line: line_no, msg };
        let mut tokens = line.split_ascii_whitespace();
        let got_name = tokens.next().unwrap_or_default();
        if got_name != name {
            return Err(err(format!("expected parameter `{name}`, found `{got_name}`")));
        }
        let shape_tok = tokens.next().ok_or_else(|| err("missing shape".into()))?;
        let got_shape: Vec<usize> = shape_tok
            .split('x')
            .map(|d| d.parse().map_err(|_| err(format!("bad shape `{shape_tok}`"))))
            .collect::<Result<_>>()?;
        if &got_shape != shape {
            return Err(err(format!("`{name}` has shape {got_shape:?}, expected {shape:?}")));
        }
        let data: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(format!("bad value `{t}`")))
            })
            .collect::<Result<_>>()?;
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(err(format!("`{name}` has {} values, expected {numel}", data.len())));
        }
        values.push(data);
    }
    if let Some((idx, _)) = lines.next() {
        return Err(Error::Format {
            path: origin.into(),
            line: idx + 1,
            msg: "unexpected trailing content".into(),
        });
    }

    let mut slots: Vec<_> = model
        .extractors
        .iter_mut()
        .flatten()
        .chain(model.pair_classifiers.iter_mut())
        .chain(std::iter::once(&mut model.extractor_classifier))
        .chain(std::iter::once(&mut model.final_classifier))
        .flat_map(|l| [&mut l.weight, &mut l.bias])
        .collect();
    for (slot, data) in slots.iter_mut().zip(values) {
        slot.data_mut().copy_from_slice(&data);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> EnsembleModel {
        EnsembleModel::init(ModelConfig {
            n_extractors: 2,
            input_dim: 3,
            hidden_dims: vec![4],
            feature_dim: 2,
            n_classes: 3,
            init_seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mut m = model();
        m.final_classifier.bias.data_mut()[1] = 1.0 / 3.0;
        let text = to_checkpoint_string(&m);
        assert!(text.starts_with("n=2,input_dim=3,hidden=4,feature_dim=2,classes=3"));
        assert_eq!(parse_checkpoint(&text, "mem").unwrap(), m);
    }

    #[test]
    fn no_hidden_layers_round_trip() {
        let m = EnsembleModel::init(ModelConfig {
            n_extractors: 1,
            input_dim: 2,
            hidden_dims: vec![],
            feature_dim: 2,
            n_classes: 2,
            init_seed: 1,
        })
        .unwrap();
        assert_eq!(parse_checkpoint(&to_checkpoint_string(&m), "mem").unwrap(), m);
    }

    #[test]
    fn shape_mismatch_reports_line() {
        let text = to_checkpoint_string(&model()).replacen("3x4", "4x3", 1);
        match parse_checkpoint(&text, "mem").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let text = to_checkpoint_string(&model());
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(parse_checkpoint(&cut, "mem").is_err());
    }
}
