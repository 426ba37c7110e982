//! Hyperparameter sweeps. A grid expands the base config over `alphas`
//! (all optimizers) and `cycle_lengths` (adaQN only), runs each cell in its
//! own subdirectory, and ranks the survivors by final test loss.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{OptimError, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::MetricsRecord;
use crate::harness::runner::run_experiment;

pub const GRID_SUMMARY_JSON: &str = "grid_summary.json";
pub const GRID_SUMMARY_CSV: &str = "grid_summary.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_length: Option<usize>,
    pub out_dir: PathBuf,
    /// Final record of the cell's run; absent when the run failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_record: Option<MetricsRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub optimizer: String,
    pub cells: Vec<GridCell>,
}

impl GridSummary {
    pub fn best(&self) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.final_record.is_some())
    }
}

/// Format a float for a directory name: `0.05` -> `0.05`, `1e-3` -> `0.001`.
fn tag(x: f64) -> String {
    let s = format!("{x}");
    s.replace('.', "p").replace('-', "m")
}

fn cell_dir(alpha: f64, cycle_length: Option<usize>) -> String {
    match cycle_length {
        Some(l) => format!("a{}_L{l}", tag(alpha)),
        None => format!("a{}", tag(alpha)),
    }
}

/// Sort key: finished cells by (test loss, alpha, L); failed cells last.
fn rank_cells(cells: &mut [GridCell]) {
    cells.sort_by(|a, b| {
        match (&a.final_record, &b.final_record) {
            (Some(ra), Some(rb)) => ra
                .test_loss
                .partial_cmp(&rb.test_loss)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.alpha.partial_cmp(&b.alpha).unwrap())
                .then(a.cycle_length.cmp(&b.cycle_length)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a
                .alpha
                .partial_cmp(&b.alpha)
                .unwrap()
                .then(a.cycle_length.cmp(&b.cycle_length)),
        }
    });
    for (i, cell) in cells.iter_mut().enumerate() {
        cell.rank = i + 1;
    }
}

/// Run every cell of the configured grid. Individual cell failures are
/// recorded in the summary instead of aborting the sweep.
pub fn grid_search(config: &ExperimentConfig) -> Result<GridSummary> {
    config.validate()?;
    let grid = config.grid.as_ref().ok_or_else(|| {
        OptimError::Config("grid: config has no [grid] section".into())
    })?;
    let root = config.run.resolved_out();
    fs::create_dir_all(&root)?;

    let is_adaqn = config.optimizer.name == "adaqn";
    let cycle_lengths: Vec<Option<usize>> = match (&grid.cycle_lengths, is_adaqn) {
        (Some(ls), true) => ls.iter().copied().map(Some).collect(),
        (Some(_), false) => {
            return Err(OptimError::Config(format!(
                "grid: cycle_lengths applies only to adaqn, not {}",
                config.optimizer.name
            )));
        }
        (None, _) => vec![None],
    };

    let mut cells = Vec::new();
    for &alpha in &grid.alphas {
        for &cycle_length in &cycle_lengths {
            let sub = cell_dir(alpha, cycle_length);
            let mut cell_config = config.clone();
            cell_config.grid = None;
            cell_config.optimizer.alpha = alpha;
            if let Some(l) = cycle_length {
                cell_config.optimizer.cycle_length = Some(l);
            }
            cell_config.run.out = root.join(&sub);
            let (final_record, error) = match run_experiment(&cell_config, None) {
                Ok(outcome) => (Some(outcome.final_record().clone()), None),
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(GridCell {
                alpha,
                cycle_length,
                out_dir: root.join(&sub),
                final_record,
                error,
                rank: 0,
            });
        }
    }
    rank_cells(&mut cells);

    let summary = GridSummary {
        optimizer: config.optimizer.name.clone(),
        cells,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| OptimError::Serde(e.to_string()))?;
    fs::write(root.join(GRID_SUMMARY_JSON), json)?;
    fs::write(root.join(GRID_SUMMARY_CSV), summary_csv(&summary))?;
    Ok(summary)
}

fn summary_csv(summary: &GridSummary) -> String {
    let mut out = String::from("rank,alpha,cycle_length,test_loss,train_loss,flops,error\n");
    for c in &summary.cells {
        let (test, train, flops) = match &c.final_record {
            Some(r) => (r.test_loss.to_string(), r.train_loss.to_string(), r.flops.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.rank,
            c.alpha,
            c.cycle_length.map(|l| l.to_string()).unwrap_or_default(),
            test,
            train,
            flops,
            c.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_config(out: PathBuf, optimizer: &str) -> ExperimentConfig {
        let text = format!(
            "[problem]\nkind = \"logistic\"\nseed = 3\ndim = 8\nexamples = 48\n\n\
             [optimizer]\nname = \"{optimizer}\"\nalpha = 0.1\n\n\
             [run]\nseed = 5\nepochs = 2\nbatch_size = 8\nout = \"placeholder\"\n\n\
             [grid]\nalphas = [0.05, 0.2]\n"
        );
        let mut config: ExperimentConfig = toml::from_str(&text).unwrap();
        config.run.out = out;
        config
    }

    #[test]
    fn adaqn_grid_expands_alpha_by_cycle_length() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = grid_config(dir.path().join("g"), "adaqn");
        config.grid.as_mut().unwrap().cycle_lengths = Some(vec![4, 8]);
        let summary = grid_search(&config).unwrap();
        assert_eq!(summary.cells.len(), 4);
        assert!(summary.cells.iter().all(|c| c.final_record.is_some()));
        // ranks are 1..=4 and test losses are nondecreasing
        for (i, c) in summary.cells.iter().enumerate() {
            assert_eq!(c.rank, i + 1);
        }
        let losses: Vec<f64> = summary
            .cells
            .iter()
            .map(|c| c.final_record.as_ref().unwrap().test_loss)
            .collect();
        assert!(losses.windows(2).all(|w| w[0] <= w[1]), "{losses:?}");
        assert!(dir.path().join("g").join(GRID_SUMMARY_JSON).exists());
        assert!(dir.path().join("g/a0p05_L4/metrics.jsonl").exists());
    }

    #[test]
    fn baseline_grid_rejects_cycle_lengths() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = grid_config(dir.path().join("g2"), "adagrad");
        config.grid.as_mut().unwrap().cycle_lengths = Some(vec![4]);
        let err = grid_search(&config).unwrap_err();
        assert!(err.to_string().contains("cycle_lengths"), "{err}");
    }

    #[test]
    fn failed_cell_is_recorded_and_ranked_last() {
        // On a quadratic, a step far beyond 2/lambda_max diverges until the
        // loss overflows; the cell must fail without sinking the sweep.
        let dir = tempfile::tempdir().unwrap();
        let text = "[problem]\nkind = \"quadratic\"\nseed = 2\ndim = 6\nexamples = 24\ncondition = 10.0\n\n\
             [optimizer]\nname = \"sgd\"\nalpha = 0.1\n\n\
             [run]\nseed = 5\nepochs = 8\nbatch_size = 8\nout = \"placeholder\"\n\n\
             [grid]\nalphas = [0.05, 1.0e18]\n";
        let mut config: ExperimentConfig = toml::from_str(text).unwrap();
        config.run.out = dir.path().join("g3");
        let summary = grid_search(&config).unwrap();
        assert_eq!(summary.cells.len(), 2);
        let last = summary.cells.last().unwrap();
        assert_eq!(last.alpha, 1.0e18);
        assert!(last.error.is_some(), "expected the huge step to fail");
        assert_eq!(summary.best().unwrap().alpha, 0.05);
    }
}
