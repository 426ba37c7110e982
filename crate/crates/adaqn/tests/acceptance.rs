//! End-to-end acceptance suite. Each numbered criterion exercises one
//! documented guarantee of the library, prints a single PASS/FAIL line, and
//! the binary exits nonzero if any criterion fails. Criteria run in order
//! and are isolated: a panic in one is caught and reported, and the rest
//! still run.
//!
//! The suite favors measured quantities over fixed expectations: every line
//! reports the observed value next to the tolerance it was held to.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::exit;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use adaqn::baselines::{adagrad_step, sgd_step, AdagradState};
use adaqn::data::{synth_digits, BatchSchedule, SequenceData, SequenceDataset};
use adaqn::harness::config::AuditSection;
use adaqn::harness::{flop_audit, run_experiment, ExperimentConfig, MetricsRecord, RunOutcome};
use adaqn::lbfgs::dense_matvec;
use adaqn::problems::{
    finite_diff_gradient, rel_err, LogisticProblem, PixelSequenceProblem, QuadraticProblem,
    RnnConfig, RnnLmProblem, SphereProblem,
};
use adaqn::{
    bfgs_dense_oracle, two_loop_direction, AcceptanceRule, AdaqnConfig, AdaqnState, CycleEvent,
    DiagonalScaling, GradientFifo, LbfgsMemory, MonitoringSet, PushOutcome, StochasticObjective,
};

fn main() {
    let criteria: [(&str, fn() -> String); 10] = [
        ("two-loop recursion matches dense BFGS oracle", c01_two_loop_oracle),
        ("degenerate adaQN reproduces the Adagrad trajectory", c02_adagrad_fallback),
        ("rejection and skip post-conditions hold", c03_reject_skip_semantics),
        ("BPTT gradient matches central finite differences", c04_bptt_gradient),
        ("aFIM matvec matches explicit construction", c05_afim_matvec),
        ("curvature beats Adagrad on an ill-conditioned quadratic", c06_quadratic_benefit),
        ("per-iteration operation count is linear in n", c07_operation_count),
        ("character-LM test loss is competitive with tuned Adagrad", c08_char_lm),
        ("pixel-sequence RNN trains where plain SGD stagnates", c09_digits_contrast),
        ("seeded runs are reproducible and resumable", c10_determinism_resume),
    ];

    // Optional arguments select a subset of criteria by number.
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();

    // Panics carry the failure detail; the hook would only duplicate it.
    std::panic::set_hook(Box::new(|_| {}));

    let mut failed = Vec::new();
    for (idx, (label, run)) in criteria.iter().enumerate() {
        let number = idx + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => {
                let secs = start.elapsed().as_secs_f64();
                println!("[criterion {number:2}] PASS {label}: {detail} ({secs:.1}s)");
            }
            Err(payload) => {
                let detail = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic without message".to_string());
                println!("[criterion {number:2}] FAIL {label}: {detail}");
                failed.push(number);
            }
        }
    }

    if failed.is_empty() {
        let ran = if selected.is_empty() {
            criteria.len()
        } else {
            selected.len()
        };
        println!("all {ran} selected criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        exit(1);
    }
}

// --- criterion 1 -----------------------------------------------------------
// 500 random (pairs <= 10, n <= 16, random positive diagonal seed) cases:
// the two-loop direction must equal -H g computed from the dense BFGS
// update applied pair by pair, to relative error <= 1e-12, in under 5 s.

fn c01_two_loop_oracle() -> String {
    const CASES: usize = 500;
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut max_rel = 0.0f64;

    for case in 0..CASES {
        let n = rng.gen_range(1..=16);
        let pair_count = rng.gen_range(0..=10usize);
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..5.0)).collect();
        let h0 = DiagonalScaling::new(diag).unwrap();
        let mut mem = LbfgsMemory::new(10);
        for _ in 0..pair_count {
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Shift y along s so s'y = 0.5 s's: random direction, guaranteed
            // admissible curvature.
            let ss: f64 = s.iter().map(|v| v * v).sum();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let shift = (0.5 * ss - sy) / ss.max(1e-300);
            for (yi, si) in y.iter_mut().zip(&s) {
                *yi += shift * si;
            }
            let outcome = mem.push_pair(s, y, 1e-8).unwrap();
            assert_eq!(outcome, PushOutcome::Stored, "case {case}: pair not admitted");
        }

        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let direction = two_loop_direction(&g, &mem, &h0).unwrap();
        let h = bfgs_dense_oracle(&mem, &h0);
        let expected: Vec<f64> = dense_matvec(&h, &g).iter().map(|v| -v).collect();
        let rel = rel_err(&direction, &expected);
        assert!(
            rel <= TOL,
            "case {case} (n={n}, pairs={pair_count}): rel err {rel:.3e} > {TOL:.0e}"
        );
        max_rel = max_rel.max(rel);
    }

    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 5.0, "runtime {secs:.1}s exceeds the 5 s budget");
    format!("{CASES} cases, max rel err {max_rel:.2e} (tol {TOL:.0e})")
}

// --- criterion 2 -----------------------------------------------------------
// With curvature admission disabled (eps_skip = inf) the L-BFGS memory stays
// empty, so every adaQN step must equal the Adagrad step on the same batch:
// per-step relative deviation <= 1e-15 over >= 1000 steps of logistic
// regression.

fn c02_adagrad_fallback() -> String {
    const STEPS: usize = 1200;
    const TOL: f64 = 1e-15;
    let problem = LogisticProblem::synthetic(8, 64, 3).unwrap();
    let w0: Vec<f64> = (0..8).map(|i| 0.05 * (i as f64 + 1.0)).collect();
    let alpha = 0.2;

    let mut state = AdaqnState::new(
        w0.clone(),
        AdaqnConfig {
            alpha,
            cycle_length: 5,
            eps_skip: f64::INFINITY,
            // The comparison needs the fallback trajectory itself; a huge
            // factor keeps the monitor from ever rewinding it.
            acceptance: AcceptanceRule::AbsoluteFactor { gamma: 1e12 },
            batch_size: 8,
            ..AdaqnConfig::default()
        },
        MonitoringSet::new((0..8).collect()).unwrap(),
        1,
    )
    .unwrap();

    let mut adagrad = AdagradState::new(8, 1e-4).unwrap();
    let mut w = w0;
    let mut max_rel = 0.0f64;
    for step in 0..STEPS {
        let batch: Vec<usize> = (0..8).map(|j| (step * 8 + j) % 64).collect();
        state.step(&problem, &batch).unwrap();
        let (_, g) = problem.value_grad(&w, &batch).unwrap();
        adagrad_step(&mut adagrad, &mut w, &g, alpha).unwrap();
        let rel = rel_err(&state.w, &w);
        assert!(rel <= TOL, "step {step}: trajectories deviate by {rel:.3e}");
        max_rel = max_rel.max(rel);
    }
    format!("{STEPS} steps, max per-step rel deviation {max_rel:.1e} (tol {TOL:.0e})")
}

// --- criterion 3 -----------------------------------------------------------
// Scripted scenarios force both boundary events in 100 randomized trials.
// Rejection (gamma = 0.5 demands a halving the sphere cannot deliver) must
// flush the memory and FIFO and rewind the iterate to the reference average;
// a skip (admission disabled) must leave the reference average untouched.

fn c03_reject_skip_semantics() -> String {
    const TRIALS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(33);

    for trial in 0..TRIALS {
        let n = rng.gen_range(2..=8);
        let alpha = 10f64.powf(rng.gen_range(-3.0..-2.0));
        let w0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let objective = SphereProblem::new(n, 8);

        // Rejection scenario.
        let mut state = AdaqnState::new(
            w0.clone(),
            AdaqnConfig {
                alpha,
                cycle_length: 2,
                batch_size: 2,
                acceptance: AcceptanceRule::AbsoluteFactor { gamma: 0.5 },
                ..AdaqnConfig::default()
            },
            MonitoringSet::new((0..4).collect()).unwrap(),
            trial as u64,
        )
        .unwrap();
        let mut rejections = 0;
        for _ in 0..10 {
            let report = state.step(&objective, &[0, 1]).unwrap();
            if report.event == CycleEvent::CycleRejected {
                rejections += 1;
                assert_eq!(report.memory_size, 0, "trial {trial}: memory not flushed");
                assert_eq!(report.fifo_size, 0, "trial {trial}: fifo not flushed");
                let reference = state.agg.w_bar_old.as_ref().unwrap();
                assert_eq!(&state.w, reference, "trial {trial}: iterate not rewound");
            }
        }
        assert!(rejections > 0, "trial {trial}: no rejection was forced");

        // Skip scenario.
        let mut state = AdaqnState::new(
            w0,
            AdaqnConfig {
                alpha,
                cycle_length: 2,
                eps_skip: f64::INFINITY,
                batch_size: 2,
                acceptance: AcceptanceRule::AbsoluteFactor { gamma: 1e12 },
                ..AdaqnConfig::default()
            },
            MonitoringSet::new((0..4).collect()).unwrap(),
            trial as u64,
        )
        .unwrap();
        let mut reference: Option<Vec<f64>> = None;
        let mut skips = 0;
        for i in 0..12 {
            let report = state.step(&objective, &[0, 1]).unwrap();
            if i == 1 {
                assert_eq!(
                    report.event,
                    CycleEvent::CycleAccepted,
                    "trial {trial}: first boundary establishes the reference"
                );
                reference = state.agg.w_bar_old.clone();
            }
            if i > 1 && report.event != CycleEvent::Plain {
                assert_eq!(report.event, CycleEvent::CycleSkipped, "trial {trial}");
                skips += 1;
                assert_eq!(
                    state.agg.w_bar_old, reference,
                    "trial {trial}: skip moved the reference average"
                );
                assert_eq!(report.memory_size, 0, "trial {trial}: skip stored a pair");
            }
        }
        assert!(skips > 0, "trial {trial}: no skip was forced");
    }
    format!("{TRIALS}/{TRIALS} trials held all post-conditions")
}

// --- criterion 4 -----------------------------------------------------------
// BPTT gradients of a 1-layer, 8-unit, 5-symbol, 6-step recurrent LM agree
// with central finite differences to relative error <= 1e-6 on 20 random
// draws of data and weights, in under 30 s.

fn c04_bptt_gradient() -> String {
    const DRAWS: usize = 20;
    const TOL: f64 = 1e-6;
    const VOCAB: usize = 5;
    const T: usize = 6;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut max_rel = 0.0f64;

    for draw in 0..DRAWS {
        // Random token stream, inputs and next-symbol targets.
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..12 {
            let stream: Vec<usize> = (0..T + 1).map(|_| rng.gen_range(0..VOCAB)).collect();
            inputs.push(stream[..T].to_vec());
            targets.push(stream[1..].to_vec());
        }
        let dataset = SequenceDataset {
            data: SequenceData::Tokens {
                inputs,
                targets,
                vocab: VOCAB,
            },
        };
        let problem = RnnLmProblem::new(
            &dataset,
            RnnConfig {
                hidden: 8,
                layers: 1,
                init_std: 0.5,
                ..RnnConfig::default()
            },
        )
        .unwrap();

        // Wide weights plus a perturbation so biases leave zero and the tanh
        // units see both near-linear and saturated regimes.
        let mut w = problem.init_params(100 + draw as u64);
        for wi in w.iter_mut() {
            *wi += rng.gen_range(-0.1..0.1);
        }

        let batch: Vec<usize> = (0..problem.num_examples()).collect();
        let analytic = problem.gradient(&w, &batch).unwrap();
        let numeric = finite_diff_gradient(&problem, &w, &batch, 1e-5).unwrap();
        let rel = rel_err(&analytic, &numeric);
        assert!(rel <= TOL, "draw {draw}: rel err {rel:.3e} > {TOL:.0e}");
        max_rel = max_rel.max(rel);
    }

    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 30.0, "runtime {secs:.1}s exceeds the 30 s budget");
    format!("{DRAWS} draws, max rel err {max_rel:.2e} (tol {TOL:.0e})")
}

// --- criterion 5 -----------------------------------------------------------
// afim_matvec must equal the explicit accumulated-Fisher construction: build
// the dense matrix (1/|F|) sum_i g_i g_i' from the FIFO entries, multiply by
// s, and compare, over 100 random fifos (<= 20 gradients, n <= 12).

fn c05_afim_matvec() -> String {
    const FIFOS: usize = 100;
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut max_rel = 0.0f64;

    for case in 0..FIFOS {
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=20usize);
        let mut fifo = GradientFifo::new(20);
        let mut grads: Vec<Vec<f64>> = Vec::new();
        for _ in 0..k {
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // Batch sizes vary on purpose: the normalization is the entry
            // count, not the sample count.
            fifo.push(g.clone(), rng.gen_range(1..=8)).unwrap();
            grads.push(g);
        }

        let mut dense = vec![vec![0.0; n]; n];
        for g in &grads {
            for i in 0..n {
                for j in 0..n {
                    dense[i][j] += g[i] * g[j] / k as f64;
                }
            }
        }
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let expected: Vec<f64> = dense
            .iter()
            .map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum())
            .collect();

        let got = adaqn::afim_matvec(&fifo, &s).unwrap();
        let rel = rel_err(&got, &expected);
        assert!(rel <= TOL, "case {case} (n={n}, k={k}): rel err {rel:.3e}");
        max_rel = max_rel.max(rel);
    }
    format!("{FIFOS} fifos, max rel err {max_rel:.2e} (tol {TOL:.0e})")
}

// --- criterion 6 -----------------------------------------------------------
// Deterministic rotated quadratic, condition number 1e4, n = 50. At the best
// grid step size for each method under a 500-iteration budget, adaQN's final
// optimality gap must be <= 1e-6 while Adagrad's stays >= 10x larger (and
// >= 1e-5 outright). The closed-form minimum is the oracle. Under 1 min.

fn c06_quadratic_benefit() -> String {
    const N: usize = 50;
    const M: usize = 32;
    const ITERS: usize = 500;
    let start = Instant::now();

    // Geometric spectrum over [1e4, 1e8]: condition number exactly 1e4.
    let spectrum: Vec<f64> = (0..N)
        .map(|i| 1e4 * 1e4f64.powf(i as f64 / (N - 1) as f64))
        .collect();
    let problem = QuadraticProblem::new(&spectrum, M, 0.0, 13).unwrap();
    let batch: Vec<usize> = (0..M).collect();
    let gap = |w: &[f64]| problem.value(w, &batch).unwrap() - problem.minimum_value();

    let mut best_adaqn = f64::INFINITY;
    for alpha in [1e-6, 3e-6, 1e-5] {
        let config = AdaqnConfig {
            alpha,
            // Per-iteration boundaries: cheapest rejection recovery and the
            // fastest memory build-up on a deterministic objective.
            cycle_length: 1,
            memory_size: 50,
            fifo_size: 100,
            eps_skip: 1e-8,
            eps_scale: 1.0,
            batch_size: M,
            // Near-monotone monitor: the full-batch loss is noiseless, so
            // any genuine worsening should rewind.
            acceptance: AcceptanceRule::AbsoluteFactor { gamma: 1.0 + 1e-9 },
            ..AdaqnConfig::default()
        };
        let monitoring = MonitoringSet::new(batch.clone()).unwrap();
        let mut state = AdaqnState::new(vec![0.0; N], config, monitoring, 1).unwrap();
        for _ in 0..ITERS {
            state.step(&problem, &batch).unwrap();
        }
        best_adaqn = best_adaqn.min(gap(&state.w));
    }

    let mut best_adagrad = f64::INFINITY;
    for alpha in [1e-6, 3e-6, 1e-5, 3e-5] {
        for eps in [1e-4, 1e-2, 1.0] {
            let mut st = AdagradState::new(N, eps).unwrap();
            let mut w = vec![0.0; N];
            for _ in 0..ITERS {
                let (_, g) = problem.value_grad(&w, &batch).unwrap();
                adagrad_step(&mut st, &mut w, &g, alpha).unwrap();
            }
            best_adagrad = best_adagrad.min(gap(&w));
        }
    }

    assert!(
        best_adaqn <= 1e-6,
        "adaQN gap {best_adaqn:.3e} misses the 1e-6 target"
    );
    assert!(
        best_adagrad >= 10.0 * best_adaqn && best_adagrad >= 1e-5,
        "Adagrad gap {best_adagrad:.3e} is not 10x adaQN's {best_adaqn:.3e}"
    );
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "runtime {secs:.1}s exceeds the 1 min budget");
    format!("adaQN gap {best_adaqn:.1e} vs Adagrad {best_adagrad:.1e} ({:.0}x)", best_adagrad / best_adaqn)
}

// --- criterion 7 -----------------------------------------------------------
// Counted optimizer-side operations per iteration across n in {1e3, 1e4, 1e5}
// fit c*n within +-25%, and the m_L = m_F = 0 configuration collapses to the
// Adagrad count within 5%.

fn c07_operation_count() -> String {
    let report = flop_audit(&AuditSection {
        sizes: vec![1_000, 10_000, 100_000],
        iterations: 50,
    })
    .unwrap();

    assert!(
        report.fit.max_rel_deviation <= 0.25,
        "per-iteration counts deviate {:.1}% from the linear fit",
        100.0 * report.fit.max_rel_deviation
    );
    assert!(
        report.degenerate.rel_diff <= 0.05,
        "degenerate count differs from Adagrad by {:.2}%",
        100.0 * report.degenerate.rel_diff
    );
    format!(
        "linear-fit deviation {:.2e} (tol 0.25), degenerate-vs-Adagrad {:.2e} (tol 0.05)",
        report.fit.max_rel_deviation, report.degenerate.rel_diff
    )
}

// --- criterion 8 -----------------------------------------------------------
// Bundled ~100k-character corpus, 2-layer 64-unit recurrent LM, sequence
// length 32, 20 epochs. Both methods are grid-tuned (adaQN additionally over
// L in {2, 5, 10, 20}); adaQN's final test cross-entropy must land within 2%
// of Adagrad's, and the winning run's per-epoch average L-BFGS memory,
// averaged over the run, must exceed 1.0.

fn c08_char_lm() -> String {
    let dir = tempfile::tempdir().unwrap();

    let mut best_adaqn: Option<(f64, f64, f64, usize)> = None; // (test, mem, alpha, L)
    for &alpha in &[0.05, 0.1, 0.2] {
        for &cycle in &[2usize, 5, 10, 20] {
            let optimizer = format!(
                "name = \"adaqn\"\nalpha = {alpha}\ncycle_length = {cycle}\n\
                 memory_size = 10\nfifo_size = 100\nrotate_monitoring = true"
            );
            let out = dir.path().join(format!("adaqn_a{alpha}_L{cycle}"));
            let outcome = run_experiment(&lm_config(&optimizer, &out), None).unwrap();
            let test = outcome.final_record().test_loss;
            let mem = run_average_memory(&outcome.records);
            if best_adaqn.map_or(true, |(t, ..)| test < t) {
                best_adaqn = Some((test, mem, alpha, cycle));
            }
        }
    }
    let (adaqn_test, adaqn_mem, alpha, cycle) = best_adaqn.unwrap();

    let mut adagrad_test = f64::INFINITY;
    for &alpha in &[0.02, 0.05, 0.1, 0.2] {
        let optimizer = format!("name = \"adagrad\"\nalpha = {alpha}\neps = 1e-4");
        let out = dir.path().join(format!("adagrad_a{alpha}"));
        let outcome = run_experiment(&lm_config(&optimizer, &out), None).unwrap();
        adagrad_test = adagrad_test.min(outcome.final_record().test_loss);
    }

    assert!(
        adaqn_test <= adagrad_test * 1.02,
        "adaQN test CE {adaqn_test:.4} exceeds Adagrad's {adagrad_test:.4} + 2%"
    );
    assert!(
        adaqn_mem > 1.0,
        "winning run (alpha={alpha}, L={cycle}) averaged {adaqn_mem:.2} stored pairs"
    );
    format!(
        "adaQN {adaqn_test:.4} (alpha={alpha}, L={cycle}, avg memory {adaqn_mem:.1}) \
         vs Adagrad {adagrad_test:.4}"
    )
}

fn lm_config(optimizer_table: &str, out: &Path) -> ExperimentConfig {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/tiny_corpus.txt");
    let text = format!(
        "[problem]\nkind = \"char_lm\"\ndata = \"{corpus}\"\nseq_len = 32\nsplit = 0.95\n\
         hidden = 64\nlayers = 2\nactivation = \"tanh\"\ninit_std = 0.01\n\n\
         [optimizer]\n{optimizer_table}\n\n\
         [run]\nseed = 1\nepochs = 20\nbatch_size = 32\neval_every = 1\nout = \"placeholder\"\n",
        corpus = corpus.display()
    );
    let mut config: ExperimentConfig = toml::from_str(&text).unwrap();
    config.run.out = out.to_path_buf();
    config
}

/// Mean of the per-epoch average-memory values over the training epochs.
fn run_average_memory(records: &[MetricsRecord]) -> f64 {
    let epochs: Vec<&MetricsRecord> = records.iter().filter(|r| r.epoch > 0).collect();
    epochs.iter().map(|r| r.avg_memory).sum::<f64>() / epochs.len() as f64
}

// --- criterion 9 -----------------------------------------------------------
// 8x8 synthetic digit sequences, 1-layer 32-unit tanh RNN. After 30 epochs
// adaQN's full training loss must fall below 90% of its initial value while
// plain SGD at the same budget stays above, at every step size in its grid.

fn c09_digits_contrast() -> String {
    const EPOCHS: usize = 30;
    const BATCH: usize = 32;
    let dataset = synth_digits(300, 8, 5).unwrap();
    let problem = PixelSequenceProblem::new(
        &dataset,
        RnnConfig {
            hidden: 32,
            layers: 1,
            init_std: 0.1,
            ..RnnConfig::default()
        },
    )
    .unwrap();
    let w0 = problem.init_params(1);
    let m = problem.num_examples();
    let all: Vec<usize> = (0..m).collect();
    let full_loss = |w: &[f64]| problem.value(w, &all).unwrap();
    let initial = full_loss(&w0);

    // adaQN at its tuned setting.
    let config = AdaqnConfig {
        alpha: 0.015,
        cycle_length: 10,
        memory_size: 10,
        fifo_size: 100,
        batch_size: BATCH,
        acceptance: AcceptanceRule::AbsoluteFactor { gamma: 1.001 },
        ..AdaqnConfig::default()
    };
    let monitoring = MonitoringSet::sample(m, BATCH, 99).unwrap();
    let mut state = AdaqnState::new(w0.clone(), config, monitoring, 7).unwrap();
    let mut schedule = BatchSchedule::new(m, BATCH, 3).unwrap();
    for _ in 0..EPOCHS * schedule.batches_per_epoch() {
        let batch = schedule.next_batch();
        state.step(&problem, &batch).unwrap();
    }
    let adaqn_ratio = full_loss(&state.w) / initial;

    // Plain SGD across a step-size grid on the identical batch sequence.
    let mut sgd_best = f64::INFINITY;
    for &alpha in &[0.05, 0.1, 0.2, 0.3, 0.5] {
        let mut w = w0.clone();
        let mut schedule = BatchSchedule::new(m, BATCH, 3).unwrap();
        let mut diverged = false;
        for _ in 0..EPOCHS * schedule.batches_per_epoch() {
            let batch = schedule.next_batch();
            match problem.value_grad(&w, &batch) {
                Ok((_, g)) => sgd_step(&mut w, &g, alpha, None).unwrap(),
                Err(_) => {
                    diverged = true;
                    break;
                }
            }
        }
        if !diverged {
            sgd_best = sgd_best.min(full_loss(&w) / initial);
        }
    }

    assert!(
        adaqn_ratio < 0.9,
        "adaQN only reached {adaqn_ratio:.3} of the initial loss"
    );
    assert!(
        sgd_best >= 0.9,
        "SGD reached {sgd_best:.3} of the initial loss; the contrast is gone"
    );
    format!("adaQN ratio {adaqn_ratio:.3} (< 0.9), best SGD ratio {sgd_best:.3} (>= 0.9)")
}

// --- criterion 10 ----------------------------------------------------------
// Identical seeds must reproduce the metrics file byte-for-byte once the
// wall-time field is removed, and a checkpoint-resumed run must produce the
// same records as an unbroken one.

fn c10_determinism_resume() -> String {
    let dir = tempfile::tempdir().unwrap();
    let config = |out: &Path, epochs: usize| -> ExperimentConfig {
        let text = format!(
            "[problem]\nkind = \"logistic\"\nseed = 3\ndim = 10\nexamples = 64\n\n\
             [optimizer]\nname = \"adaqn\"\nalpha = 0.2\ncycle_length = 5\n\n\
             [run]\nseed = 11\nepochs = {epochs}\nbatch_size = 8\nout = \"placeholder\"\n"
        );
        let mut config: ExperimentConfig = toml::from_str(&text).unwrap();
        config.run.out = out.to_path_buf();
        config
    };

    // Determinism: same seeds, separate directories.
    let a = run_experiment(&config(&dir.path().join("a"), 5), None).unwrap();
    let b = run_experiment(&config(&dir.path().join("b"), 5), None).unwrap();
    let lines_a = metrics_without_wall_time(&a);
    let lines_b = metrics_without_wall_time(&b);
    assert_eq!(
        lines_a, lines_b,
        "identical seeds produced different metrics"
    );

    // Resume: 3 epochs, checkpoint, continue to 7; compare to unbroken 7.
    let part = run_experiment(&config(&dir.path().join("split"), 3), None).unwrap();
    let resumed = run_experiment(
        &config(&dir.path().join("split"), 7),
        Some(&part.checkpoint_path),
    )
    .unwrap();
    let unbroken = run_experiment(&config(&dir.path().join("full"), 7), None).unwrap();
    assert_eq!(
        metrics_without_wall_time(&resumed),
        metrics_without_wall_time(&unbroken),
        "resumed run diverged from the unbroken run"
    );

    format!(
        "{} records identical across seeds; {} records identical across resume",
        lines_a.len(),
        metrics_without_wall_time(&unbroken).len()
    )
}

/// Metrics file lines with the wall-time field removed, re-serialized in a
/// canonical key order so the comparison is byte-for-byte.
fn metrics_without_wall_time(outcome: &RunOutcome) -> Vec<String> {
    let text = std::fs::read_to_string(&outcome.metrics_path).unwrap();
    text.lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("wall_time_s");
            }
            serde_json::to_string(&v).unwrap()
        })
        .collect()
}
