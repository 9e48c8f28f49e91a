//! Dataset CSV files.
//!
//! ```text
//! dim=<d>,labeled=<0|1>,classes=<C>,domain=<name>
//! <f1>,...,<fd>[,<label>]
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::dataset::DomainDataset;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv_string(ds: &DomainDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dim={},labeled={},classes={},domain={}",
        ds.dim(),
        u8::from(ds.labels().is_some()),
        ds.n_classes(),
        ds.name()
    );
    for r in 0..ds.len() {
        let row = ds.features().row(r);
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&fmt_f64(*v));
        }
        if let Some(labels) = ds.labels() {
            let _ = write!(out, ",{}", labels[r]);
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(ds: &DomainDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv_string(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DomainDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, &path.display().to_string())
}

struct Header {
    dim: usize,
    labeled: bool,
    classes: usize,
    domain: String,
}

fn parse_header(line: &str, origin: &str) -> Result<Header> {
    let err = |msg: String| Error::Format { path: origin.to_string(), line: 1, msg };
    let parts: Vec<&str> = line.splitn(4, ',').collect();
    if parts.len() != 4 {
        return Err(err(format!("malformed header `{line}`")));
    }
    let field = |i: usize, key: &str| -> Result<&str> {
        parts[i]
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| err(format!("expected `{key}=` in header field {}", i + 1)))
    };
    let number = |i: usize, key: &str| -> Result<usize> {
        let raw = field(i, key)?;
        raw.trim().parse().map_err(|_| err(format!("`{key}` is not an integer: `{raw}`")))
    };
    let dim = number(0, "dim")?;
    let labeled = match field(1, "labeled")?.trim() {
        "0" => false,
        "1" => true,
        other => return Err(err(format!("`labeled` must be 0 or 1, got `{other}`"))),
    };
    let classes = number(2, "classes")?;
    let domain = field(3, "domain")?.to_string();
    if dim == 0 {
        return Err(err("`dim` must be at least 1".into()));
    }
    Ok(Header { dim, labeled, classes, domain })
}

/// Parses dataset CSV text; `origin` names the source in error messages.
pub fn parse_csv(text: &str, origin: &str) -> Result<DomainDataset> {
    let mut lines = text.lines();
    let header_line = lines.next().ok_or_else(|| Error::Format {
        path: origin.into(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = parse_header(header_line.trim_end_matches('\r'), origin)?;
    let width = header.dim + usize::from(header.labeled);

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let err = |msg: String| Error::Format { path: origin.into(), line: line_no, msg };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            let hint = if !header.labeled && cells.len() == header.dim + 1 {
                " (header says labeled=0 but the row carries a label column)"
            } else {
                ""
            };
            return Err(err(format!("expected {width} cells, found {}{hint}", cells.len())));
        }
        for cell in &cells[..header.dim] {
            let v: f64 = cell.trim().parse().map_err(|_| err(format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite cell `{cell}`")));
            }
            data.push(v);
        }
        if header.labeled {
            let cell = cells[header.dim].trim();
            let label: usize = cell.parse().map_err(|_| err(format!("label `{cell}` is not an integer")))?;
            if label >= header.classes {
                return Err(err(format!("label {label} out of range for {} classes", header.classes)));
            }
            labels.push(label);
        }
    }
    let rows = data.len() / header.dim;
    DomainDataset::new(
        Tensor::new(vec![rows, header.dim], data)?,
        header.labeled.then_some(labels),
        header.classes,
        header.domain,
    )
}
