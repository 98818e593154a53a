//! Solves the hill-car problem at a few risk levels and prints how the
//! stationary mass splits between the two hills.

use std::time::Instant;

use rslc::analysis::stationary_distribution;
use rslc::discretizer::{build_hill_car_with, HillCarConfig};
use rslc::solver::{extract_policy, solve_ih};
use rslc::SolverOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alphas: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let alphas = if alphas.is_empty() { vec![-0.1, 0.0, 0.1] } else { alphas };
    let t0 = Instant::now();
    let base = build_hill_car_with(&HillCarConfig::default())?;
    println!("built {} states, {} transitions in {:.2?}", base.n_states(), base.passive().nnz(), t0.elapsed());
    let grid = base.grid().unwrap().clone();
    for alpha in alphas {
        let spec = base.with_alpha(alpha)?;
        let t = Instant::now();
        let (v, report) = solve_ih(&spec, &SolverOptions::default())?;
        let solve_time = t.elapsed();
        let policy = extract_policy(&spec, &v)?;
        let t = Instant::now();
        let stat = stationary_distribution(&policy, 1e-12, 100_000)?;
        let stat_time = t.elapsed();
        let (mut right, mut left) = (0.0, 0.0);
        for (s, m) in stat.distribution.probs().iter().enumerate() {
            let p = grid.coordinates(s)[0];
            if (p - 0.9).abs() < 0.5 {
                right += m;
            }
            if (p + 0.9).abs() < 0.5 {
                left += m;
            }
        }
        println!(
            "alpha {alpha:+.3}: cbar {:.6} residual {:.2e} iters {} solve {:.2?} | stationary iters {} res {:.1e} {:.2?} | mass -0.9: {:.4} +0.9: {:.4}",
            report.average_cost.unwrap(),
            report.final_residual,
            report.iterations,
            solve_time,
            stat.iterations,
            stat.residual,
            stat_time,
            left,
            right
        );
        for w in &report.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
