//! Operation-count audit. Runs the optimizer on the sphere probe (whose
//! objective performs no counted work) so the thread-local counter isolates
//! optimizer-side kernels, then checks the cost model: per-iteration counts
//! scale linearly in n, collapse to the Adagrad count when both curvature
//! containers are empty, and the amortized cycle-boundary term shrinks as
//! the cycle length grows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaqn::{AdaqnConfig, AdaqnState, MonitoringSet};
use crate::baselines::{adagrad_step, AdagradState};
use crate::error::{OptimError, Result};
use crate::flops;
use crate::harness::config::AuditSection;
use crate::problems::{SphereProblem, StochasticObjective};
use crate::vecmath;

pub const AUDIT_FILE: &str = "audit.json";
const BATCH: usize = 32;
const L_SWEEP: [usize; 4] = [2, 5, 10, 20];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeEntry {
    pub n: usize,
    pub iterations: u64,
    pub total_flops: u64,
    pub per_iteration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    /// Least-squares through-origin slope of per-iteration count against n.
    pub slope: f64,
    pub max_rel_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegenerateCheck {
    pub n: usize,
    pub adaqn_per_iteration: f64,
    pub adagrad_per_iteration: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub cycle_length: usize,
    pub per_iteration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleSweep {
    pub n: usize,
    pub entries: Vec<SweepEntry>,
    pub strictly_decreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub iterations: u64,
    pub memory_size: usize,
    pub fifo_size: usize,
    pub cycle_length: usize,
    pub sizes: Vec<SizeEntry>,
    pub fit: LinearFit,
    pub degenerate: DegenerateCheck,
    pub cycle_sweep: CycleSweep,
}

fn audit_config(memory_size: usize, fifo_size: usize, cycle_length: usize) -> AdaqnConfig {
    AdaqnConfig {
        alpha: 0.01,
        cycle_length,
        memory_size,
        fifo_size,
        batch_size: BATCH,
        ..AdaqnConfig::default()
    }
}

/// Counted operations for `iterations` adaQN steps on an n-sphere.
fn count_adaqn(n: usize, iterations: u64, config: AdaqnConfig) -> Result<u64> {
    let problem = SphereProblem::new(n, BATCH);
    let monitoring = MonitoringSet::new((0..BATCH).collect())?;
    let mut state = AdaqnState::new(vec![1.0; n], config, monitoring, 7)?;
    let batch: Vec<usize> = (0..BATCH).collect();
    flops::take();
    for _ in 0..iterations {
        state.step(&problem, &batch)?;
    }
    Ok(flops::take())
}

/// Counted operations for the harness's Adagrad step sequence (gradient-norm
/// diagnostic plus the update itself), mirroring the run driver.
fn count_adagrad(n: usize, iterations: u64) -> Result<u64> {
    let problem = SphereProblem::new(n, BATCH);
    let batch: Vec<usize> = (0..BATCH).collect();
    let mut w = vec![1.0; n];
    let mut state = AdagradState::new(n, 1e-4)?;
    flops::take();
    for _ in 0..iterations {
        let (_, g) = problem.value_grad(&w, &batch)?;
        let _ = vecmath::norm(&g);
        adagrad_step(&mut state, &mut w, &g, 0.01)?;
    }
    Ok(flops::take())
}

pub fn flop_audit(section: &AuditSection) -> Result<AuditReport> {
    if section.sizes.is_empty() {
        return Err(OptimError::Config("audit: sizes must be non-empty".into()));
    }
    if section.iterations == 0 {
        return Err(OptimError::Config("audit: iterations must be > 0".into()));
    }
    let iterations = section.iterations as u64;
    let base = audit_config(10, 20, 10);

    let mut sizes = Vec::new();
    for &n in &section.sizes {
        let total = count_adaqn(n, iterations, base.clone())?;
        sizes.push(SizeEntry {
            n,
            iterations,
            total_flops: total,
            per_iteration: total as f64 / iterations as f64,
        });
    }

    // Through-origin fit per_iteration ~ slope * n.
    let sxy: f64 = sizes.iter().map(|e| e.n as f64 * e.per_iteration).sum();
    let sxx: f64 = sizes.iter().map(|e| (e.n as f64).powi(2)).sum();
    let slope = sxy / sxx;
    let max_rel_deviation = sizes
        .iter()
        .map(|e| ((e.per_iteration - slope * e.n as f64) / (slope * e.n as f64)).abs())
        .fold(0.0, f64::max);

    // Degenerate configuration at the smallest n.
    let n0 = sizes[0].n;
    let degenerate_total = count_adaqn(n0, iterations, audit_config(0, 0, 10))?;
    let adagrad_total = count_adagrad(n0, iterations)?;
    let adaqn_per = degenerate_total as f64 / iterations as f64;
    let adagrad_per = adagrad_total as f64 / iterations as f64;
    let degenerate = DegenerateCheck {
        n: n0,
        adaqn_per_iteration: adaqn_per,
        adagrad_per_iteration: adagrad_per,
        rel_diff: (adaqn_per - adagrad_per).abs() / adagrad_per,
    };

    // Cycle-length sweep with an empty L-BFGS memory and a tiny fifo so every
    // post-initial boundary costs the same; only the 1/L amortization varies.
    // The iteration budget is a common multiple of the sweep lengths.
    let sweep_iters = {
        let lcm = L_SWEEP.iter().fold(1u64, |acc, &l| {
            let l = l as u64;
            acc / gcd(acc, l) * l
        });
        iterations.div_ceil(lcm) * lcm
    };
    let mut entries = Vec::new();
    for &l in &L_SWEEP {
        let total = count_adaqn(n0, sweep_iters, audit_config(0, 2, l))?;
        entries.push(SweepEntry {
            cycle_length: l,
            per_iteration: total as f64 / sweep_iters as f64,
        });
    }
    let strictly_decreasing = entries
        .windows(2)
        .all(|w| w[1].per_iteration < w[0].per_iteration);
    let cycle_sweep = CycleSweep {
        n: n0,
        entries,
        strictly_decreasing,
    };

    Ok(AuditReport {
        iterations,
        memory_size: base.memory_size,
        fifo_size: base.fifo_size,
        cycle_length: base.cycle_length,
        sizes,
        fit: LinearFit {
            slope,
            max_rel_deviation,
        },
        degenerate,
        cycle_sweep,
    })
}

pub fn write_audit(path: &Path, report: &AuditReport) -> Result<()> {
    let json =
        serde_json::to_string_pretty(report).map_err(|e| OptimError::Serde(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_section() -> AuditSection {
        AuditSection {
            sizes: vec![100, 200, 400],
            iterations: 60,
        }
    }

    #[test]
    fn per_iteration_count_is_exactly_linear_in_n() {
        // Every counted kernel performs exactly n operations and the sphere
        // dynamics are coordinate-wise identical, so per-iteration counts are
        // proportional to n with no constant term at all.
        let report = flop_audit(&small_section()).unwrap();
        let ratios: Vec<f64> = report
            .sizes
            .iter()
            .map(|e| e.per_iteration / e.n as f64)
            .collect();
        for r in &ratios {
            assert_eq!(*r, ratios[0], "{ratios:?}");
        }
        assert!(report.fit.max_rel_deviation < 1e-12);
    }

    #[test]
    fn doubling_n_doubles_the_count() {
        let report = flop_audit(&small_section()).unwrap();
        let ratio = report.sizes[1].per_iteration / report.sizes[0].per_iteration;
        assert!((1.5..=2.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn degenerate_config_matches_adagrad_exactly() {
        let report = flop_audit(&small_section()).unwrap();
        assert_eq!(
            report.degenerate.adaqn_per_iteration,
            report.degenerate.adagrad_per_iteration
        );
        assert_eq!(report.degenerate.rel_diff, 0.0);
    }

    #[test]
    fn amortized_boundary_cost_decreases_with_cycle_length() {
        let report = flop_audit(&small_section()).unwrap();
        assert!(
            report.cycle_sweep.strictly_decreasing,
            "{:?}",
            report.cycle_sweep.entries
        );
    }

    #[test]
    fn report_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let report = flop_audit(&AuditSection {
            sizes: vec![50, 100],
            iterations: 20,
        })
        .unwrap();
        let path = dir.path().join(AUDIT_FILE);
        write_audit(&path, &report).unwrap();
        let back: AuditReport =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.sizes.len(), 2);
        assert_eq!(back.fit.slope, report.fit.slope);
    }
}
