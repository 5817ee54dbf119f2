//! Building roll-adjusted and constant-maturity return series from a futures panel and
//! printing the descriptive tables.
//!
//! cargo run --example roll_returns [panel.csv]

use seasonvol::data::{ingest, simulate_panel, summarize, to_constant_maturity, to_returns, SyntheticSpec};
use seasonvol::{FactorParams, ModelParams, Pattern, SeasonalitySpec};

fn main() -> seasonvol::Result<()> {
    let panel = match std::env::args().nth(1) {
        Some(path) => ingest(path)?,
        None => {
            let season = SeasonalitySpec::new(Pattern::Sinusoidal, 0.09, 0.07, 0.55)?;
            let f = FactorParams::new(0.8, 5.0, 0.25, -0.2, 0.09, season)?;
            let truth = ModelParams::one_factor(f, vec![0.0; 4]);
            simulate_panel(&truth, &SyntheticSpec { n_dates: 1500, n_slots: 4, seed: 12, ..Default::default() })?.panel
        }
    };
    println!("{} dates, {} slots, {} quotes", panel.n_dates(), panel.n_slots(), panel.n_observations());

    let rets = to_returns(&panel)?;
    let rolls: usize = rets.entered.iter().filter(|e| e.iter().any(|&x| x)).count();
    println!("roll dates (a contract enters the panel): {rolls}");

    let cm = to_constant_maturity(&panel, &[0.25, 0.5])?;
    for w in &cm.warnings {
        println!("warning: {w}");
    }

    let s = summarize(&panel, "panel")?;
    let out = std::io::stdout();
    println!();
    s.write_description(out.lock())?;
    println!();
    s.write_slot_vols(out.lock())?;
    println!();
    s.write_month_vols(out.lock())?;
    Ok(())
}
