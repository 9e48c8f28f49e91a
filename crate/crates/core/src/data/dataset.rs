use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Feature matrix of one domain, with optional labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainDataset {
    features: Tensor,
    labels: Option<Vec<usize>>,
    n_classes: usize,
    domain_name: String,
}

impl DomainDataset {
    pub fn new(
        features: Tensor,
        labels: Option<Vec<usize>>,
        n_classes: usize,
        domain_name: impl Into<String>,
    ) -> Result<Self> {
        let (rows, _) = features.require_matrix("DomainDataset")?;
        if let Some(labels) = &labels {
            if labels.len() != rows {
                return Err(Error::shape(
                    "DomainDataset",
                    format!("{} labels for {rows} rows", labels.len()),
                ));
            }
            if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
                return Err(Error::Label { row, label, classes: n_classes });
            }
        }
        Ok(DomainDataset { features, labels, n_classes, domain_name: domain_name.into() })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn name(&self) -> &str {
        &self.domain_name
    }

    pub fn len(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    /// Same features with the labels removed.
    pub fn without_labels(&self) -> DomainDataset {
        DomainDataset { labels: None, ..self.clone() }
    }

    /// Rows and labels at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Option<Vec<usize>>) {
        let x = self.features.select_rows(indices);
        let y = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        (x, y)
    }

    /// Concatenates labeled datasets into one pooled domain.
    pub fn pool(parts: &[&DomainDataset], name: &str) -> Result<DomainDataset> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to pool"))?;
        let dim = first.dim();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim() != dim {
                return Err(Error::shape("pool", format!("dim {} vs {dim}", p.dim())));
            }
            data.extend_from_slice(p.features.data());
            let l =
                p.labels().ok_or_else(|| Error::invalid(format!("domain `{}` is unlabeled", p.name())))?;
            labels.extend_from_slice(l);
        }
        let rows = labels.len();
        DomainDataset::new(Tensor::new(vec![rows, dim], data)?, Some(labels), first.n_classes, name)
    }
}

/// Checks that datasets share a feature width and class count.
pub fn check_homogeneous(domains: &[DomainDataset]) -> Result<()> {
    let Some(first) = domains.first() else {
        return Ok(());
    };
    for d in domains {
        if d.dim() != first.dim() || d.n_classes() != first.n_classes() {
            return Err(Error::invalid(format!(
                "domain `{}` has dim {} / {} classes, but `{}` has dim {} / {} classes",
                d.name(),
                d.dim(),
                d.n_classes(),
                first.name(),
                first.dim(),
                first.n_classes()
            )));
        }
    }
    Ok(())
}
