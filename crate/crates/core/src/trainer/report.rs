use std::fmt::Write as _;

use super::Variant;

pub const METRICS_HEADER: &str =
    "epoch,stage,variant,loss_total,loss_lc,loss_lmm,loss_fd,pl_count,pl_rate,target_acc,seconds";

/// Metrics of one completed epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub stage: u8,
    pub variant: Variant,
    /// Mean weighted total loss over the epoch's steps.
    pub loss_total: f64,
    /// Mean label classification loss per pair.
    pub lc: Vec<f64>,
    /// Mean moment matching loss per pair.
    pub lmm: Vec<f64>,
    pub fd: f64,
    pub pl_count: usize,
    pub pl_rate: f64,
    pub target_acc: Option<f64>,
    pub seconds: f64,
}

impl EpochRow {
    pub fn to_csv_line(&self) -> String {
        let acc = self.target_acc.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.epoch,
            self.stage,
            self.variant,
            self.loss_total,
            self.lc.iter().sum::<f64>(),
            self.lmm.iter().sum::<f64>(),
            self.fd,
            self.pl_count,
            self.pl_rate,
            acc,
            self.seconds
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReport {
    pub rows: Vec<EpochRow>,
}

impl TrainingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.to_csv_line());
        }
        out
    }

    pub fn stage(&self, stage: u8) -> impl Iterator<Item = &EpochRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }

    /// Per-epoch total losses, in order.
    pub fn loss_trajectory(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss_total).collect()
    }
}
