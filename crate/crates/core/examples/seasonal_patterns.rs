//! Seasonal mean-reversion levels and their exponential transforms.
//!
//! cargo run --example seasonal_patterns

use seasonvol::{Pattern, SeasonalitySpec};

fn main() -> seasonvol::Result<()> {
    let shapes = [
        SeasonalitySpec::new(Pattern::Sinusoidal, 0.08, 0.04, 0.6)?,
        SeasonalitySpec::new(Pattern::ExpSinusoidal, 0.08, 0.5, 0.6)?,
        SeasonalitySpec::new(Pattern::Sawtooth, 0.06, 0.05, 0.6)?,
        SeasonalitySpec::new(Pattern::Triangle, 0.06, 0.08, 0.6)?,
        SeasonalitySpec::new(Pattern::Spiked, 0.06, 0.05, 0.6)?,
        SeasonalitySpec::constant(0.08)?,
    ];

    println!("level by month (t = (m - 0.5)/12)");
    print!("{:>15}", "pattern");
    for m in 1..=12 {
        print!("{m:>7}");
    }
    println!();
    for s in &shapes {
        print!("{:>15}", s.pattern.name());
        for m in 1..=12 {
            print!("{:>7.4}", s.theta((m as f64 - 0.5) / 12.0));
        }
        println!();
    }

    println!("\n∫₀ᵀ θ(t) e^(λt) dt");
    println!("{:>15} {:>12} {:>12} {:>12}", "pattern", "T=0.5,λ=1", "T=1,λ=0", "T=2.5,λ=-2");
    for s in &shapes {
        println!(
            "{:>15} {:>12.8} {:>12.8} {:>12.8}",
            s.pattern.name(),
            s.transform(0.5, 1.0)?,
            s.transform(1.0, 0.0)?,
            s.transform(2.5, -2.0)?
        );
    }
    Ok(())
}
