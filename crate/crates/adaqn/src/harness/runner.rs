//! The experiment loop: epochs of scheduled mini-batches, metric records at
//! the evaluation cadence, and JSON checkpoints that capture everything the
//! trajectory depends on (optimizer state, batch schedule, counters), so a
//! resumed run continues the unbroken sequence exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaqn::{CycleEvent, IterationReport, MonitoringSet};
use crate::data::BatchSchedule;
use crate::error::{OptimError, Result};
use crate::flops;
use crate::harness::config::{derive_seed, ExperimentConfig};
use crate::harness::driver::{build_problem, Driver, ProblemSet, SALT_MONITOR, SALT_SCHEDULE};
use crate::harness::metrics::{write_csv, MetricsHeader, MetricsRecord, MetricsWriter};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CSV_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub accepted: u64,
    pub skipped: u64,
    pub rejected: u64,
}

impl EventCounts {
    fn absorb(&mut self, event: CycleEvent) {
        match event {
            CycleEvent::Plain => {}
            CycleEvent::CycleAccepted => self.accepted += 1,
            CycleEvent::CycleSkipped => self.skipped += 1,
            CycleEvent::CycleRejected => self.rejected += 1,
        }
    }
}

/// Accumulators since the previous metrics record.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct Interval {
    iterations: u64,
    memory_sum: u64,
    events: EventCounts,
}

impl Interval {
    fn absorb(&mut self, report: &IterationReport) {
        self.iterations += 1;
        self.memory_sum += report.memory_size as u64;
        self.events.absorb(report.event);
    }

    fn avg_memory(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.memory_sum as f64 / self.iterations as f64
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: ExperimentConfig,
    /// Completed epochs.
    epoch: usize,
    iteration: u64,
    flops: u64,
    schedule: BatchSchedule,
    driver: Driver,
    /// Monitoring set used for baseline train-loss estimates.
    monitoring: Vec<usize>,
    interval: Interval,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub records: Vec<MetricsRecord>,
}

impl RunOutcome {
    pub fn final_record(&self) -> &MetricsRecord {
        self.records.last().expect("a run always writes records")
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| OptimError::Serde(format!(
            "{}: {e}",
            path.display()
        )))?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(OptimError::Serde(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            ck.version
        )));
    }
    Ok(ck)
}

fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let json = serde_json::to_string(ck).map_err(|e| OptimError::Serde(e.to_string()))?;
    // Write-then-rename so an interrupted save never corrupts the previous
    // checkpoint.
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, json)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Execute a configured run. With `resume`, continue from the checkpoint
/// (appending to its metrics file) up to the configured epoch budget.
pub fn run_experiment(config: &ExperimentConfig, resume: Option<&Path>) -> Result<RunOutcome> {
    config.validate()?;
    let out_dir = config.run.resolved_out();
    fs::create_dir_all(&out_dir)?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);

    let problems = build_problem(&config.problem, config.run.seed)?;
    let objective = problems.train.objective();
    let m = objective.num_examples();
    let b = config.run.batch_size.min(m);

    let start = Instant::now();
    flops::reset();

    let mut records: Vec<MetricsRecord> = Vec::new();
    let (mut driver, mut schedule, monitoring, mut interval, mut iteration, flop_base, start_epoch, mut writer);
    match resume {
        None => {
            let monitor_set = MonitoringSet::sample(
                m,
                b,
                derive_seed(config.run.seed, SALT_MONITOR),
            )?;
            monitoring = monitor_set.indices.clone();
            driver = Driver::from_config(config, problems.w0.clone(), monitor_set)?;
            schedule = BatchSchedule::new(m, b, derive_seed(config.run.seed, SALT_SCHEDULE))?;
            interval = Interval::default();
            iteration = 0;
            flop_base = 0;
            start_epoch = 1;
            writer = MetricsWriter::create(
                metrics_path.clone(),
                &MetricsHeader::new(problems.test.is_some()),
            )?;
            let record = evaluate(
                &problems, &driver, &monitoring, 0, iteration, flop_base, &interval, &start,
            )?;
            writer.write(&record)?;
            records.push(record);
        }
        Some(ck_path) => {
            let ck = load_checkpoint(ck_path)?;
            config.resume_compatible(&ck.config)?;
            if ck.epoch > config.run.epochs {
                return Err(OptimError::Config(format!(
                    "resume: checkpoint is at epoch {}, beyond the configured budget {}",
                    ck.epoch, config.run.epochs
                )));
            }
            driver = ck.driver;
            schedule = ck.schedule;
            monitoring = ck.monitoring;
            interval = ck.interval;
            iteration = ck.iteration;
            flop_base = ck.flops;
            start_epoch = ck.epoch + 1;
            writer = if metrics_path.exists() {
                MetricsWriter::append(metrics_path.clone())?
            } else {
                MetricsWriter::create(
                    metrics_path.clone(),
                    &MetricsHeader::new(problems.test.is_some()),
                )?
            };
        }
    }

    let batches_per_epoch = schedule.batches_per_epoch();
    for epoch in start_epoch..=config.run.epochs {
        for _ in 0..batches_per_epoch {
            let batch = schedule.next_batch();
            let report = driver.step(objective, &batch)?;
            interval.absorb(&report);
            iteration += 1;
        }
        let due = epoch % config.run.eval_every == 0 || epoch == config.run.epochs;
        if due {
            let record = evaluate(
                &problems, &driver, &monitoring, epoch, iteration, flop_base, &interval,
                &start,
            )?;
            writer.write(&record)?;
            records.push(record);
            interval = Interval::default();
        }
        let checkpoint_due = config.run.checkpoint_every > 0
            && epoch % config.run.checkpoint_every == 0
            && epoch != config.run.epochs;
        if checkpoint_due {
            save_checkpoint(
                &checkpoint_path,
                &Checkpoint {
                    version: CHECKPOINT_VERSION,
                    config: config.clone(),
                    epoch,
                    iteration,
                    flops: flop_base + flops::current(),
                    schedule: schedule.clone(),
                    driver: driver.clone(),
                    monitoring: monitoring.clone(),
                    interval,
                },
            )?;
        }
    }

    save_checkpoint(
        &checkpoint_path,
        &Checkpoint {
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            epoch: config.run.epochs,
            iteration,
            flops: flop_base + flops::current(),
            schedule: schedule.clone(),
            driver: driver.clone(),
            monitoring: monitoring.clone(),
            interval,
        },
    )?;

    // Regenerate the CSV from the full metrics file so resumed runs export
    // the complete history.
    let (_, all_records) = crate::harness::metrics::read_metrics(&metrics_path)?;
    write_csv(&out_dir.join(CSV_FILE), &all_records)?;
    if records.is_empty() {
        // Resuming at the epoch budget performs no new work; report the
        // last recorded state.
        records.push(all_records.last().cloned().ok_or_else(|| {
            OptimError::Serde(format!("{}: no records", metrics_path.display()))
        })?);
    }

    Ok(RunOutcome {
        out_dir,
        metrics_path,
        checkpoint_path,
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    problems: &ProblemSet,
    driver: &Driver,
    baseline_monitoring: &[usize],
    epoch: usize,
    iteration: u64,
    flop_base: u64,
    interval: &Interval,
    start: &Instant,
) -> Result<MetricsRecord> {
    let w = driver.params();
    let monitoring = driver
        .monitoring_indices()
        .unwrap_or(baseline_monitoring);
    let train_loss = problems.train.objective().value(w, monitoring)?;
    let (test_loss, test_accuracy) = problems.test_eval(w)?;
    Ok(MetricsRecord {
        epoch,
        iteration,
        train_loss,
        test_loss,
        test_accuracy,
        avg_memory: interval.avg_memory(),
        accepted: interval.events.accepted,
        skipped: interval.events.skipped,
        rejected: interval.events.rejected,
        flops: flop_base + flops::current(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::read_metrics;
    use serde_json::Value;

    fn logistic_config(out: PathBuf, optimizer: &str, epochs: usize) -> ExperimentConfig {
        let text = format!(
            "[problem]\nkind = \"logistic\"\nseed = 3\ndim = 10\nexamples = 64\n\n\
             [optimizer]\nname = \"{optimizer}\"\nalpha = 0.2\n\n\
             [run]\nseed = 11\nepochs = {epochs}\nbatch_size = 8\nout = \"placeholder\"\n"
        );
        let mut config: ExperimentConfig = toml::from_str(&text).unwrap();
        config.run.out = out;
        config
    }

    fn strip_wall_time(path: &Path) -> Vec<Value> {
        let text = std::fs::read_to_string(path).unwrap();
        text.lines()
            .map(|line| {
                let mut v: Value = serde_json::from_str(line).unwrap();
                if let Some(o) = v.as_object_mut() {
                    o.remove("wall_time_s");
                }
                v
            })
            .collect()
    }

    #[test]
    fn epochs_zero_emits_only_initial_record() {
        let dir = tempfile::tempdir().unwrap();
        let config = logistic_config(dir.path().join("run"), "adaqn", 0);
        let outcome = run_experiment(&config, None).unwrap();
        assert_eq!(outcome.records.len(), 1);
        let r = outcome.final_record();
        assert_eq!((r.epoch, r.iteration, r.flops), (0, 0, 0));
        assert!(outcome.checkpoint_path.exists());
    }

    #[test]
    fn identical_seeds_reproduce_metrics_up_to_wall_time() {
        let dir = tempfile::tempdir().unwrap();
        let a = logistic_config(dir.path().join("a"), "adaqn", 3);
        let b = logistic_config(dir.path().join("b"), "adaqn", 3);
        let oa = run_experiment(&a, None).unwrap();
        let ob = run_experiment(&b, None).unwrap();
        assert_eq!(
            strip_wall_time(&oa.metrics_path),
            strip_wall_time(&ob.metrics_path)
        );
    }

    #[test]
    fn resume_matches_unbroken_run() {
        let dir = tempfile::tempdir().unwrap();
        for optimizer in ["adaqn", "adam"] {
            let split_out = dir.path().join(format!("{optimizer}_split"));
            let part1 = logistic_config(split_out.clone(), optimizer, 3);
            let o1 = run_experiment(&part1, None).unwrap();
            let part2 = logistic_config(split_out, optimizer, 7);
            let o2 = run_experiment(&part2, Some(&o1.checkpoint_path)).unwrap();

            let unbroken = logistic_config(dir.path().join(format!("{optimizer}_full")), optimizer, 7);
            let of = run_experiment(&unbroken, None).unwrap();
            assert_eq!(
                strip_wall_time(&o2.metrics_path),
                strip_wall_time(&of.metrics_path),
                "{optimizer}: split+resume differs from unbroken"
            );
        }
    }

    #[test]
    fn resume_rejects_mismatched_config() {
        let dir = tempfile::tempdir().unwrap();
        let part1 = logistic_config(dir.path().join("r"), "adaqn", 2);
        let o1 = run_experiment(&part1, None).unwrap();
        let mut part2 = logistic_config(dir.path().join("r"), "adaqn", 4);
        part2.optimizer.alpha = 0.4;
        let err = run_experiment(&part2, Some(&o1.checkpoint_path)).unwrap_err();
        assert!(matches!(err, OptimError::Config(_)), "{err}");
    }

    #[test]
    fn event_counts_match_boundary_cadence() {
        // L = 5, 64 examples / batch 8 = 8 iterations per epoch, so each
        // epoch crosses 8/5 boundaries; over the run the counts must equal
        // total iterations / L within one boundary.
        let dir = tempfile::tempdir().unwrap();
        let mut config = logistic_config(dir.path().join("ev"), "adaqn", 5);
        config.optimizer.cycle_length = Some(5);
        let outcome = run_experiment(&config, None).unwrap();
        let total: u64 = outcome
            .records
            .iter()
            .map(|r| r.accepted + r.skipped + r.rejected)
            .sum();
        let iterations = outcome.final_record().iteration;
        let expected = iterations / 5;
        assert!(
            (total as i64 - expected as i64).abs() <= 1,
            "events {total} vs boundaries {expected}"
        );
    }

    #[test]
    fn csv_export_written_with_all_records() {
        let dir = tempfile::tempdir().unwrap();
        let config = logistic_config(dir.path().join("csv"), "sgd", 2);
        let outcome = run_experiment(&config, None).unwrap();
        let csv = std::fs::read_to_string(outcome.out_dir.join(CSV_FILE)).unwrap();
        // header + initial record + 2 epochs
        assert_eq!(csv.lines().count(), 4);
        let (_, records) = read_metrics(&outcome.metrics_path).unwrap();
        assert_eq!(records.len(), 3);
    }

    #[test]
    fn baseline_records_have_zero_memory_and_events() {
        let dir = tempfile::tempdir().unwrap();
        let config = logistic_config(dir.path().join("base"), "adagrad", 2);
        let outcome = run_experiment(&config, None).unwrap();
        for r in &outcome.records {
            assert_eq!(r.avg_memory, 0.0);
            assert_eq!((r.accepted, r.skipped, r.rejected), (0, 0, 0));
        }
        // but flops were counted
        assert!(outcome.final_record().flops > 0);
    }
}
