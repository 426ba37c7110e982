//! Grid probe for the pixel-sequence digits contrast: adaQN must cut the
//! training loss below 90% of its initial value in 30 epochs while plain SGD
//! at matched budget does not, across (init_std, alpha, L, gamma).

use adaqn::baselines::sgd_step;
use adaqn::data::{synth_digits, BatchSchedule};
use adaqn::problems::{PixelSequenceProblem, RnnConfig, StochasticObjective};
use adaqn::{AcceptanceRule, AdaqnConfig, AdaqnState, MonitoringSet};

const EPOCHS: usize = 30;
const BATCH: usize = 32;

fn problem(init_std: f64, hidden: usize) -> (PixelSequenceProblem, Vec<f64>) {
    let ds = synth_digits(300, 8, 5).unwrap();
    let cfg = RnnConfig {
        hidden,
        layers: 1,
        init_std,
        ..RnnConfig::default()
    };
    let p = PixelSequenceProblem::new(&ds, cfg).unwrap();
    let w0 = p.init_params(1);
    (p, w0)
}

fn full_loss(p: &PixelSequenceProblem, w: &[f64]) -> f64 {
    let all: Vec<usize> = (0..p.num_examples()).collect();
    p.value(w, &all).unwrap()
}

fn run_adaqn(p: &PixelSequenceProblem, w0: &[f64], cfg: AdaqnConfig) -> f64 {
    let m = p.num_examples();
    let monitoring = MonitoringSet::sample(m, BATCH, 99).unwrap();
    let mut state = AdaqnState::new(w0.to_vec(), cfg, monitoring, 7).unwrap();
    let mut sched = BatchSchedule::new(m, BATCH, 3).unwrap();
    for _ in 0..EPOCHS * sched.batches_per_epoch() {
        let batch = sched.next_batch();
        if state.step(p, &batch).is_err() {
            return f64::INFINITY;
        }
    }
    full_loss(p, &state.w)
}

fn run_sgd(p: &PixelSequenceProblem, w0: &[f64], alpha: f64) -> f64 {
    let m = p.num_examples();
    let mut w = w0.to_vec();
    let mut sched = BatchSchedule::new(m, BATCH, 3).unwrap();
    for _ in 0..EPOCHS * sched.batches_per_epoch() {
        let batch = sched.next_batch();
        let (_, g) = match p.value_grad(&w, &batch) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        if sgd_step(&mut w, &g, alpha, None).is_err() {
            return f64::INFINITY;
        }
    }
    full_loss(p, &w)
}

fn main() {
    let (p, w0) = problem(0.1, 32);
    let l0 = full_loss(&p, &w0);
    println!("== init_std 0.1 hidden 32: initial loss {l0:.4}");

    for alpha in [0.015f64, 0.02, 0.03] {
        for cycle in [10usize, 20] {
            for gamma in [1.001f64, 1.01] {
                for mem in [10usize, 20] {
                    let cfg = AdaqnConfig {
                        alpha,
                        cycle_length: cycle,
                        memory_size: mem,
                        fifo_size: 100,
                        batch_size: BATCH,
                        acceptance: AcceptanceRule::AbsoluteFactor { gamma },
                        ..AdaqnConfig::default()
                    };
                    let lf = run_adaqn(&p, &w0, cfg);
                    println!(
                        "   adaqn a={alpha:<5} L={cycle:<2} g={gamma:<5} mL={mem:<2}: \
                         final {lf:.4} (ratio {:.3})",
                        lf / l0
                    );
                }
            }
        }
    }
    for alpha in [0.05f64, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5] {
        let lf = run_sgd(&p, &w0, alpha);
        println!("   sgd   a={alpha:<5}: final {lf:.4} (ratio {:.3})", lf / l0);
    }
}
