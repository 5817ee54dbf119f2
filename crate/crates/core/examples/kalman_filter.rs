//! Filtering a simulated futures panel: likelihood at the true parameters and the
//! smoothed variance path against the simulated one.
//!
//! cargo run --release --example kalman_filter

use seasonvol::data::{simulate_panel, to_returns, SyntheticSpec};
use seasonvol::kalman::{filter, smooth, FilterOptions};
use seasonvol::{FactorParams, ModelParams, Pattern, SeasonalitySpec};

fn main() -> seasonvol::Result<()> {
    let season = SeasonalitySpec::new(Pattern::Sinusoidal, 0.09, 0.06, 0.6)?;
    let f = FactorParams::new(0.5, 6.0, 0.25, -0.3, 0.08, season)?.with_risk_premia(0.5, 0.0);
    let truth = ModelParams::one_factor(f, vec![7e-4; 5]);
    let sim = simulate_panel(&truth, &SyntheticSpec { n_dates: 1000, seed: 3, ..Default::default() })?;
    let series = to_returns(&sim.panel)?;

    let out = filter(&series, &truth, &FilterOptions::default())?;
    println!("{} dates × {} contracts, loglik at truth {:.2}", series.len(), series.n_series(), out.loglik);
    println!("steps with the variance state at its floor: {}", out.floored_steps);

    let mut wrong = truth.clone();
    wrong.factors[0].lambda = 0.0;
    let flat = filter(&series, &wrong, &FilterOptions::default())?;
    println!("loglik with λ = 0: {:.2}", flat.loglik);

    let sm = smooth(&out)?;
    let est: Vec<f64> = sm.means.iter().map(|m| m[2]).collect();
    let act: Vec<f64> = sim.variance[1..].iter().map(|v| v[0]).collect();
    let corr = correlation(&est, &act);
    println!("correlation of smoothed and simulated variance: {corr:.3}");
    println!("\n{:>12} {:>10} {:>10}", "date", "smoothed", "simulated");
    for i in (0..series.len()).step_by(100) {
        println!("{:>12} {:>10.4} {:>10.4}", series.dates[i], est[i], act[i]);
    }
    Ok(())
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
