use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based fold number (D1 … Dk).
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Synthetic samples added to the training partition.
    pub synthetic: usize,
    /// Test accuracy after each epoch of the grid.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub epochs: Vec<usize>,
    pub folds: Vec<FoldResult>,
    /// Mean fold accuracy per grid epoch.
    pub mean: Vec<f64>,
    pub notes: Vec<String>,
    /// Wall-clock timing; absent unless requested so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl EvalReport {
    pub fn new(config: &ExperimentConfig, notes: Vec<String>, folds: Vec<FoldResult>) -> Self {
        let epochs = config.epoch_grid();
        let mean = (0..epochs.len())
            .map(|e| folds.iter().map(|f| f.accuracy[e]).sum::<f64>() / folds.len() as f64)
            .collect();
        EvalReport {
            config: config.clone(),
            config_hash: config.hash(),
            seed: config.seed,
            epochs,
            folds,
            mean,
            notes,
            timing: None,
        }
    }

    /// Mean accuracy at the last grid epoch.
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().unwrap_or(&0.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid report: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(Error::Config(format!("unknown report format `{other}` (expected json|csv|table)"))),
        }
    }
}

/// Renders a report. The table has folds as rows and the epoch grid as columns.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("fold,accuracy,epochs,config_hash\n");
            for f in &report.folds {
                for (acc, e) in f.accuracy.iter().zip(&report.epochs) {
                    writeln!(s, "D{},{acc},{e},{}", f.fold, report.config_hash).unwrap();
                }
            }
            s
        }
        ReportFormat::Table => {
            let mut s = format!("{:<6}", "epochs");
            for e in &report.epochs {
                write!(s, "{e:>9}").unwrap();
            }
            s.push('\n');
            let row = |s: &mut String, name: &str, values: &[f64]| {
                write!(s, "{name:<6}").unwrap();
                for v in values {
                    write!(s, "{:>9.2}", 100.0 * v).unwrap();
                }
                s.push('\n');
            };
            for f in &report.folds {
                row(&mut s, &format!("D{}", f.fold), &f.accuracy);
            }
            row(&mut s, "avg", &report.mean);
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        let config = ExperimentConfig {
            epochs: vec![60, 80, 100],
            ..ExperimentConfig::default()
        };
        let folds = (1..=5)
            .map(|i| FoldResult {
                fold: i,
                train_size: 80,
                test_size: 20,
                synthetic: 0,
                accuracy: vec![0.5 + 0.01 * i as f64, 0.61, 1.0 / 3.0],
            })
            .collect();
        EvalReport::new(&config, vec!["note".into()], folds)
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        let text = emit_report(&r, ReportFormat::Json);
        assert_eq!(EvalReport::from_json(&text).unwrap(), r);
        assert!(!text.contains("timing"));
    }

    #[test]
    fn mean_matches_folds() {
        let r = report();
        for (e, m) in r.mean.iter().enumerate() {
            let direct: f64 = r.folds.iter().map(|f| f.accuracy[e]).sum::<f64>() / 5.0;
            assert!((m - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_and_table_shapes() {
        let r = report();
        let csv = emit_report(&r, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 1 + 5 * 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("D1,"));
        let table = emit_report(&r, ReportFormat::Table);
        assert_eq!(table.lines().count(), 1 + 5 + 1);
        assert!(table.lines().last().unwrap().starts_with("avg"));
    }
}
