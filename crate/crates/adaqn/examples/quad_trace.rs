//! Trace the optimality gap, scaling magnitude, and memory occupancy of one
//! adaQN run on the quadratic to see where progress stalls.

use adaqn::problems::{QuadraticProblem, StochasticObjective};
use adaqn::{AcceptanceRule, AdaqnConfig, AdaqnState, MonitoringSet};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let cycle: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let memory: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);
    let gamma: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1.0 + 1e-9);
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(7);
    let iters: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(500);
    let eps_skip: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let eps_scale: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(1e-4);

    let problem = QuadraticProblem::with_condition(50, 1e4, 32, 0.0, seed).unwrap();
    let batch: Vec<usize> = (0..32).collect();
    let rule = if gamma > 1.0 {
        AcceptanceRule::AbsoluteFactor { gamma }
    } else {
        AcceptanceRule::RelativeImprovement { gamma_tilde: gamma }
    };
    let config = AdaqnConfig {
        alpha,
        cycle_length: cycle,
        memory_size: memory,
        fifo_size: 100,
        eps_skip,
        eps_scale,
        batch_size: 32,
        acceptance: rule,
        ..AdaqnConfig::default()
    };
    let monitoring = MonitoringSet::new(batch.clone()).unwrap();
    let mut state = AdaqnState::new(vec![0.0; 50], config, monitoring, 1).unwrap();
    println!("alpha={alpha} L={cycle} mL={memory} gamma={gamma} seed={seed} skip={eps_skip} scale={eps_scale}");
    println!("iter  gap          |g|        h0_mean    mem  a/s/r");
    let (mut a, mut s, mut r) = (0u64, 0u64, 0u64);
    for k in 1..=iters {
        let rep = match state.step(&problem, &batch) {
            Ok(rep) => rep,
            Err(e) => {
                println!("  error at {k}: {e}");
                return;
            }
        };
        match rep.event {
            adaqn::CycleEvent::CycleAccepted => a += 1,
            adaqn::CycleEvent::CycleSkipped => s += 1,
            adaqn::CycleEvent::CycleRejected => r += 1,
            adaqn::CycleEvent::Plain => {}
        }
        if k % (iters / 25).max(1) == 0 || k == iters {
            let f = problem.value(&state.w, &batch).unwrap();
            let gap = f - problem.minimum_value();
            let h0_mean: f64 = state
                .accumulator
                .sums
                .iter()
                .map(|acc| 1.0 / (acc + eps_scale).sqrt())
                .sum::<f64>()
                / 50.0;
            println!(
                "{k:>4}  {gap:<11.4e}  {:<9.3e}  {h0_mean:<9.3e}  {:>3}  {a}/{s}/{r}",
                rep.grad_norm, rep.memory_size
            );
        }
    }
}
