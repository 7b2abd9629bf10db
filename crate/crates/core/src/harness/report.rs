use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::evaluate::ExperimentResult;
use super::search::TwoStageOutcome;

/// Everything needed to reproduce a run: dataset, split seed, resolved
/// configuration and per-split outcomes. Wall-clock times are kept out so
/// identical runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub num_splits: usize,
    pub split_seed: u64,
    pub result: ExperimentResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<TwoStageOutcome>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// One `dataset,model,mean_acc,std` row.
    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            dataset: self.dataset.clone(),
            model: self.result.model.name(),
            mean_acc: self.result.mean_accuracy,
            std: self.result.std_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub model: String,
    pub mean_acc: f64,
    pub std: f64,
}

pub fn write_summary_csv(w: &mut impl Write, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(w, "dataset,model,mean_acc,std")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.4},{:.4}",
            r.dataset, r.model, r.mean_acc, r.std
        )?;
    }
    Ok(())
}

/// Per-split wall-clock seconds, one `split,seconds` row each.
pub fn write_timings_csv(w: &mut impl Write, secs: &[f64]) -> std::io::Result<()> {
    writeln!(w, "split,seconds")?;
    for (k, s) in secs.iter().enumerate() {
        writeln!(w, "{k},{s:.3}")?;
    }
    Ok(())
}
