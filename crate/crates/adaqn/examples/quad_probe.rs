//! Hyper-parameter sweep for the ill-conditioned quadratic benchmark:
//! final optimality gap of adaQN across (spectrum scale, alpha, eps_skip,
//! eps_scale) with a near-monotone acceptance rule, against the best
//! Adagrad gap over an alpha grid, per seed.

use adaqn::baselines::{adagrad_step, AdagradState};
use adaqn::problems::{QuadraticProblem, StochasticObjective};
use adaqn::{AcceptanceRule, AdaqnConfig, AdaqnState, MonitoringSet};

const N: usize = 50;
const COND: f64 = 1e4;
const M: usize = 32;
const ITERS: usize = 500;

fn scaled_problem(scale: f64, seed: u64) -> QuadraticProblem {
    let spectrum: Vec<f64> = (0..N)
        .map(|i| scale * COND.powf(i as f64 / (N - 1) as f64))
        .collect();
    QuadraticProblem::new(&spectrum, M, 0.0, seed).unwrap()
}

fn run_adaqn(problem: &QuadraticProblem, cfg: &AdaqnConfig) -> (f64, u64, u64, u64) {
    let batch: Vec<usize> = (0..M).collect();
    let monitoring = MonitoringSet::new(batch.clone()).unwrap();
    let mut state = AdaqnState::new(vec![0.0; N], cfg.clone(), monitoring, 1).unwrap();
    let (mut a, mut s, mut r) = (0u64, 0u64, 0u64);
    for _ in 0..ITERS {
        match state.step(problem, &batch) {
            Ok(rep) => match rep.event {
                adaqn::CycleEvent::CycleAccepted => a += 1,
                adaqn::CycleEvent::CycleSkipped => s += 1,
                adaqn::CycleEvent::CycleRejected => r += 1,
                adaqn::CycleEvent::Plain => {}
            },
            Err(_) => return (f64::INFINITY, a, s, r),
        }
    }
    let f = problem.value(&state.w, &batch).unwrap();
    (f - problem.minimum_value(), a, s, r)
}

fn run_adagrad(problem: &QuadraticProblem, alpha: f64, eps: f64) -> f64 {
    let batch: Vec<usize> = (0..M).collect();
    let mut w = vec![0.0; N];
    let mut st = AdagradState::new(N, eps).unwrap();
    for _ in 0..ITERS {
        let (_, g) = problem.value_grad(&w, &batch).unwrap();
        if adagrad_step(&mut st, &mut w, &g, alpha).is_err() {
            return f64::INFINITY;
        }
    }
    problem.value(&w, &batch).unwrap() - problem.minimum_value()
}

fn main() {
    let alphas = [1e-6, 3e-6, 1e-5, 3e-5];
    let eps_skips = [1e-8];
    let eps_scales = [1e-2, 1.0];
    let gamma = 1.0 + 1e-9;

    for scale in [1e4f64] {
        for seed in 1u64..=20 {
            let problem = scaled_problem(scale, seed);
            let batch: Vec<usize> = (0..M).collect();
            let gap0 =
                problem.value(&vec![0.0; N], &batch).unwrap() - problem.minimum_value();

            let mut rows: Vec<(f64, String)> = Vec::new();
            for &alpha in &alphas {
                for &eps_skip in &eps_skips {
                    for &eps_scale in &eps_scales {
                        let cfg = AdaqnConfig {
                            alpha,
                            cycle_length: 1,
                            memory_size: 50,
                            fifo_size: 100,
                            eps_skip,
                            eps_scale,
                            batch_size: M,
                            acceptance: AcceptanceRule::AbsoluteFactor { gamma },
                            ..AdaqnConfig::default()
                        };
                        let (gap, a, s, r) = run_adaqn(&problem, &cfg);
                        rows.push((
                            gap,
                            format!(
                                "a={alpha:<6} skip={eps_skip:<6} scale={eps_scale:<6} [{a}/{s}/{r}]"
                            ),
                        ));
                    }
                }
            }
            rows.sort_by(|x, y| x.0.total_cmp(&y.0));

            let ada_best = alphas
                .iter()
                .flat_map(|&a| eps_scales.iter().map(move |&e| (a, e)))
                .map(|(a, e)| (run_adagrad(&problem, a, e), a, e))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .unwrap();

            println!(
                "== scale {scale:.0e} seed {seed}: gap0 {gap0:.3e}  adagrad {:.3e} (a={}, e={})",
                ada_best.0, ada_best.1, ada_best.2
            );
            for (gap, desc) in rows.iter().take(2) {
                println!("   {gap:.3e} (rel {:.1e})  {desc}", gap / gap0);
            }
        }
    }
}
