//! Metrics output: one JSON object per line, prefixed by a single header
//! object declaring the schema and units, plus a CSV export with the same
//! fields in a fixed column order. Records are append-only so an interrupted
//! run leaves a readable file and a resumed run continues it.
//!
//! CSV column order: epoch, iteration, train_loss, test_loss, test_accuracy,
//! avg_memory, accepted, skipped, rejected, flops, wall_time_s.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{OptimError, Result};

pub const METRICS_SCHEMA: &str = "adaqn-metrics/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsHeader {
    pub schema: String,
    /// Units declaration: losses are mean per-example objective values; for
    /// language models that is cross-entropy in nats (perplexity = exp).
    pub loss_units: String,
    /// What test_loss is measured on.
    pub test_split: String,
}

impl MetricsHeader {
    pub fn new(has_test_split: bool) -> Self {
        MetricsHeader {
            schema: METRICS_SCHEMA.to_string(),
            loss_units: "mean per-example loss; cross-entropy in nats for LM runs".to_string(),
            test_split: if has_test_split {
                "held-out split".to_string()
            } else {
                "full objective (problem has no held-out split)".to_string()
            },
        }
    }
}

/// One evaluation point. Event and flop fields count since the previous
/// record; `flops` is cumulative. `wall_time_s` is the only field excluded
/// from reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub iteration: u64,
    /// Loss on the monitoring set at the current iterate.
    pub train_loss: f64,
    /// Loss on the full test split (or full objective without one).
    pub test_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_accuracy: Option<f64>,
    /// Mean stored curvature pairs per iteration since the last record.
    pub avg_memory: f64,
    pub accepted: u64,
    pub skipped: u64,
    pub rejected: u64,
    /// Cumulative counted optimizer-side floating-point operations.
    pub flops: u64,
    pub wall_time_s: f64,
}

pub struct MetricsWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl MetricsWriter {
    /// Start a fresh metrics file with the header line.
    pub fn create(path: PathBuf, header: &MetricsHeader) -> Result<Self> {
        let file = File::create(&path)?;
        let mut w = MetricsWriter {
            out: BufWriter::new(file),
            path,
        };
        let line = serde_json::to_string(header).map_err(|e| OptimError::Serde(e.to_string()))?;
        writeln!(w.out, "{line}")?;
        w.out.flush()?;
        Ok(w)
    }

    /// Continue an existing metrics file (resume); the header must already
    /// be present.
    pub fn append(path: PathBuf) -> Result<Self> {
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(MetricsWriter {
            out: BufWriter::new(file),
            path,
        })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| OptimError::Serde(e.to_string()))?;
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Parse a metrics file into its header and records.
pub fn read_metrics(path: &Path) -> Result<(MetricsHeader, Vec<MetricsRecord>)> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| OptimError::Serde(format!("{}: empty metrics file", path.display())))??;
    let header: MetricsHeader = serde_json::from_str(&header_line)
        .map_err(|e| OptimError::Serde(format!("{}: bad header: {e}", path.display())))?;
    if header.schema != METRICS_SCHEMA {
        return Err(OptimError::Serde(format!(
            "{}: unsupported schema '{}'",
            path.display(),
            header.schema
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetricsRecord = serde_json::from_str(&line)
            .map_err(|e| OptimError::Serde(format!("{}:{}: {e}", path.display(), i + 2)))?;
        records.push(record);
    }
    Ok((header, records))
}

/// Write the CSV export next to a metrics file's records.
pub fn write_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "epoch,iteration,train_loss,test_loss,test_accuracy,avg_memory,accepted,skipped,rejected,flops,wall_time_s"
    )?;
    for r in records {
        let acc = r
            .test_accuracy
            .map(|a| a.to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.iteration,
            r.train_loss,
            r.test_loss,
            acc,
            r.avg_memory,
            r.accepted,
            r.skipped,
            r.rejected,
            r.flops,
            r.wall_time_s
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Human-readable report for `inspect`: the per-record table plus a summary.
pub fn inspect_report(path: &Path) -> Result<String> {
    let (header, records) = read_metrics(path)?;
    let mut s = String::new();
    s.push_str(&format!("metrics file : {}\n", path.display()));
    s.push_str(&format!("schema       : {}\n", header.schema));
    s.push_str(&format!("loss units   : {}\n", header.loss_units));
    s.push_str(&format!("test split   : {}\n", header.test_split));
    s.push_str(&format!("records      : {}\n\n", records.len()));
    s.push_str(
        "epoch    iter   train_loss    test_loss     acc    mem  acc/skip/rej        flops\n",
    );
    for r in &records {
        let acc = r
            .test_accuracy
            .map(|a| format!("{:5.3}", a))
            .unwrap_or_else(|| "    -".to_string());
        s.push_str(&format!(
            "{:5} {:7} {:12.6} {:12.6} {:>7} {:6.2}  {:>4}/{}/{} {:12}\n",
            r.epoch,
            r.iteration,
            r.train_loss,
            r.test_loss,
            acc,
            r.avg_memory,
            r.accepted,
            r.skipped,
            r.rejected,
            r.flops
        ));
    }
    if let Some(last) = records.last() {
        let events: (u64, u64, u64) = records.iter().fold((0, 0, 0), |t, r| {
            (t.0 + r.accepted, t.1 + r.skipped, t.2 + r.rejected)
        });
        s.push_str(&format!(
            "\nfinal: epoch {} | train {} | test {} | perplexity exp(test) = {:.4} (meaningful for LM runs)\n",
            last.epoch,
            last.train_loss,
            last.test_loss,
            last.test_loss.exp()
        ));
        s.push_str(&format!(
            "totals: accepted {} | skipped {} | rejected {} | counted flops {}\n",
            events.0, events.1, events.2, last.flops
        ));
    }
    Ok(s)
}
