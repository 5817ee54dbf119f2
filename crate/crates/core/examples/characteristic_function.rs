//! The joint characteristic function of two log-futures returns, checked against
//! simulation.
//!
//! cargo run --release --example characteristic_function

use num_complex::Complex64;
use seasonvol::charfn::{riccati_residual, JointCf, OdeOptions};
use seasonvol::cir::{simulate_terminal, Measure, SimConfig};
use seasonvol::{FactorParams, Pattern, SeasonalitySpec};

fn main() -> seasonvol::Result<()> {
    let season = SeasonalitySpec::new(Pattern::Triangle, 0.06, 0.08, 0.3)?;
    let f = FactorParams::new(0.8, 2.5, 0.4, -0.5, 0.07, season)?;
    let (horizon, mats) = (0.5, [0.75, 1.0]);
    let engine = JointCf::new(&[f], horizon, mats, OdeOptions::default())?;

    let cfg = SimConfig { horizon, steps: 500, n_paths: 50_000, measure: Measure::RiskNeutral, seed: 1 };
    let samples = simulate_terminal(&[f], &mats, &cfg)?;

    println!("{:>12} {:>26} {:>26}", "(u1, u2)", "model", "simulation");
    for u in [[0.5, 0.0], [2.0, 0.0], [1.0, -1.0], [3.0, 1.5]] {
        let phi = engine.eval([Complex64::new(u[0], 0.0), Complex64::new(u[1], 0.0)])?;
        let n = samples.len() as f64;
        let mc: Complex64 = samples
            .iter()
            .map(|s| Complex64::new(0.0, u[0] * s.log_returns[0] + u[1] * s.log_returns[1]).exp())
            .sum::<Complex64>()
            / n;
        println!("{:>12} {:>12.6}{:+.6}i {:>12.6}{:+.6}i", format!("({}, {})", u[0], u[1]), phi.re, phi.im, mc.re, mc.im);
    }

    let sol = engine.solve_factor(0, [Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0)])?;
    let b_check = engine.b_by_cointegration(0, [Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0)])?;
    println!("\nRiccati residual on the grid: {:.2e}", riccati_residual(&sol, &f));
    println!("integral term: quadrature {:.10} vs co-integrated {:.10}", sol.b_quadrature, b_check);
    Ok(())
}
