use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Mode, Selection};
use crate::canonical::to_canonical_writer;

pub const REPORT_HEADER: &str =
    "iteration,zeta_orig,zeta_enlarged,mi_inst,mi_hier,loss,acc,macro_f1,n_pseudo";

/// Measurements taken after the training phase of one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Risk on the original labeled set.
    pub zeta_orig: f64,
    /// Risk on the labeled set used for training, pseudo-labels included.
    pub zeta_enlarged: f64,
    pub mi_inst: f64,
    pub mi_hier: f64,
    pub loss: f64,
    /// Test accuracy; `NaN` when the test split is empty.
    pub acc: f64,
    pub macro_f1: f64,
    /// Pseudo-labels in the training set of this iteration.
    pub n_pseudo: usize,
    /// Training loss after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Pseudo-labels selected at the end of this iteration for the next one.
    pub selected: Vec<Selection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: Mode,
    pub records: Vec<IterationRecord>,
}

#[derive(Serialize)]
struct SelectionLogEntry<'a> {
    iteration: usize,
    selected: &'a [Selection],
}

impl TrainReport {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.zeta_orig,
                r.zeta_enlarged,
                r.mi_inst,
                r.mi_hier,
                r.loss,
                r.acc,
                r.macro_f1,
                r.n_pseudo
            )?;
        }
        Ok(())
    }

    /// Per-epoch losses as `iteration,epoch,loss`.
    pub fn write_epochs_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,epoch,loss")?;
        for r in &self.records {
            for (e, l) in r.epoch_losses.iter().enumerate() {
                writeln!(w, "{},{},{}", r.iteration, e, l)?;
            }
        }
        Ok(())
    }

    /// Canonical JSON list of `{iteration, selected}` entries.
    pub fn write_selection_log<W: Write>(&self, w: W) -> io::Result<()> {
        let log: Vec<SelectionLogEntry> = self
            .records
            .iter()
            .map(|r| SelectionLogEntry {
                iteration: r.iteration,
                selected: &r.selected,
            })
            .collect();
        to_canonical_writer(w, &log).map_err(io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iteration: usize) -> IterationRecord {
        IterationRecord {
            iteration,
            zeta_orig: 0.5,
            zeta_enlarged: 0.25,
            mi_inst: -1.0,
            mi_hier: -1.5,
            loss: 0.375,
            acc: 0.75,
            macro_f1: f64::NAN,
            n_pseudo: 3,
            epoch_losses: vec![1.0, 0.5],
            selected: vec![Selection {
                confidence: 0.9,
                id: 7,
                label: 2,
            }],
        }
    }

    #[test]
    fn csv_layout() {
        let r = TrainReport {
            mode: Mode::SealCi,
            records: vec![record(0), record(1)],
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines[2], "1,0.5,0.25,-1,-1.5,0.375,0.75,NaN,3");
        let mut buf = Vec::new();
        r.write_epochs_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn selection_log_is_sorted_json() {
        let r = TrainReport {
            mode: Mode::SealCi,
            records: vec![record(0)],
        };
        let mut buf = Vec::new();
        r.write_selection_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("[{\"iteration\":0,\"selected\":[{\"confidence\":9."));
        assert!(text.contains("\"id\":7,\"label\":2"));
    }
}
