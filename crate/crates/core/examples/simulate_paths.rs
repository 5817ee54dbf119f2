//! Variance and futures paths, positivity and the path-wise comparison with a
//! constant-level process.
//!
//! cargo run --release --example simulate_paths

use seasonvol::cir::{comparison_check, simulate, simulate_terminal, Measure, SimConfig};
use seasonvol::{FactorParams, Pattern, SeasonalitySpec};

fn main() -> seasonvol::Result<()> {
    let season = SeasonalitySpec::new(Pattern::Sinusoidal, 0.09, 0.05, 0.6)?;
    let f = FactorParams::new(0.5, 3.0, 0.3, -0.4, 0.08, season)?.with_risk_premia(0.5, 0.0);
    println!("Feller condition on the seasonal minimum: {}", f.feller_ok());

    let cfg = SimConfig { horizon: 1.0, steps: 252, n_paths: 3, measure: Measure::Physical, seed: 7 };
    let paths = simulate(&[f], &[1.5, 2.0], &[4.0, 4.05], &cfg)?;
    println!("\nthree paths, quarterly snapshots (v, ln F₁, ln F₂):");
    for p in &paths {
        let snaps: Vec<String> = (0..=4)
            .map(|q| {
                let i = q * 63;
                format!("({:.4}, {:.4}, {:.4})", p.v[i][0], p.log_f[i][0], p.log_f[i][1])
            })
            .collect();
        println!("path {}: {}", p.path_id, snaps.join(" "));
    }

    let cfg = SimConfig { horizon: 1.0, steps: 1000, n_paths: 20_000, measure: Measure::RiskNeutral, seed: 8 };
    let samples = simulate_terminal(&[f], &[1.5], &cfg)?;
    let min_v = samples.iter().map(|s| s.min_variance[0]).fold(f64::INFINITY, f64::min);
    let mean_fwd = samples.iter().map(|s| s.log_returns[0].exp()).sum::<f64>() / samples.len() as f64;
    println!("\n20k paths: smallest variance {min_v:.3e}, E[F(T)/F(0)] = {mean_fwd:.5}");

    let report = comparison_check(&f, f.season.theta_min(), 0.04, 1.0, 1000, 5_000, 9)?;
    println!(
        "comparison v ≥ ṽ: holds={} violations={} worst gap {:.2e}",
        report.holds, report.violations, report.worst_gap
    );
    Ok(())
}
