//! Acceptance suite. Prints one `ACCEPTANCE <n> PASS|FAIL` line per criterion and exits
//! non-zero when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=2,5` restricts the run to the listed criteria.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{adaptive, complex_mean_se, dense_oracle, mean_se, theta_reference, DenseStep, TABLE4, TABLE4_PATTERNS};
use seasonvol::charfn::{riccati_residual, JointCf, OdeOptions};
use seasonvol::cir::{comparison_check, simulate_terminal, Measure, SimConfig};
use seasonvol::data::{simulate_panel, summarize, to_returns, ObservationSeries, SyntheticSpec};
use seasonvol::estimation::{
    fit, lr_tests, rank_models, summary_table, write_ranking_csv, write_summary_csv, FitOptions, FitReport,
    ModelSpec,
};
use seasonvol::kalman::filter_linear;
use seasonvol::pricing::{
    price_calendar_spread, price_strikes, OptionKind, SpreadMethod, SpreadSpec, VanillaSpec,
};
use seasonvol::statespace::SystemMatrices;
use seasonvol::{FactorParams, ModelParams, Pattern, SeasonalitySpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn sinusoidal_factor(lambda: f64, kappa: f64, sigma: f64, rho: f64, v0: f64, a: f64, b: f64, t0: f64) -> FactorParams {
    let s = SeasonalitySpec::new(Pattern::Sinusoidal, a, b, t0).unwrap();
    FactorParams::new(lambda, kappa, sigma, rho, v0, s).unwrap()
}

fn random_season(rng: &mut ChaCha20Rng, pattern: Pattern) -> SeasonalitySpec {
    let a = rng.gen_range(0.01..1.0);
    let t0 = rng.gen_range(0.0..1.0);
    let b = match pattern {
        Pattern::Constant => 0.0,
        Pattern::Sinusoidal => rng.gen_range(0.0..a),
        Pattern::ExpSinusoidal => rng.gen_range(0.0..2.0),
        _ => rng.gen_range(0.0..1.0),
    };
    SeasonalitySpec::new(pattern, a, b, t0).unwrap()
}

/// Points in (0, T) where the level or its slope jumps.
fn reference_breaks(pattern: Pattern, t0: f64, horizon: f64) -> Vec<f64> {
    let offsets: &[f64] = match pattern {
        Pattern::Sawtooth | Pattern::Spiked => &[0.0],
        Pattern::Triangle => &[0.0, 0.5],
        _ => &[],
    };
    let mut out = vec![0.0];
    for k in -1..=4 {
        for o in offsets {
            let x = t0 + k as f64 + o;
            if x > 0.0 && x < horizon {
                out.push(x);
            }
        }
    }
    out.push(horizon);
    out.sort_by(f64::total_cmp);
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut worst_case = String::new();
    for _ in 0..500 {
        let pattern = Pattern::ALL[rng.gen_range(0..Pattern::ALL.len())];
        let s = random_season(&mut rng, pattern);
        let horizon = rng.gen_range(0.01..=3.0);
        let lambda = rng.gen_range(-5.0..=5.0);
        let got = s.transform(horizon, lambda).unwrap();
        let name = pattern.name();
        let breaks = reference_breaks(pattern, s.t0, horizon);
        let reference: f64 = breaks
            .windows(2)
            .map(|w| {
                adaptive(
                    |t| theta_reference(name, s.a, s.b, s.t0, t) * (lambda * t).exp(),
                    w[0],
                    w[1],
                    1e-14,
                )
            })
            .sum();
        let rel = (got - reference).abs() / reference.abs();
        if rel > worst {
            worst = rel;
            worst_case = format!("{name} a={:.4} b={:.4} t0={:.4} T={horizon:.4} λ={lambda:.4}", s.a, s.b, s.t0);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("500 transforms, max rel err {worst:.2e} ({worst_case}), {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let f = sinusoidal_factor(0.8, 2.5, 0.4, -0.5, 0.09, 0.1, 0.06, 0.3);
    let (horizon, maturity) = (0.5, 0.75);
    let engine = JointCf::new(&[f], horizon, [maturity, maturity], OdeOptions::default()).unwrap();
    let cfg = SimConfig { horizon, steps: 1000, n_paths: 200_000, measure: Measure::RiskNeutral, seed: 2024 };
    let samples = simulate_terminal(&[f], &[maturity], &cfg).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(202);
    let mut worst_z: f64 = 0.0;
    for _ in 0..10 {
        let u = rng.gen_range(-3.0..=3.0);
        let model = engine.eval([Complex64::new(u, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let draws: Vec<Complex64> = samples
            .iter()
            .map(|s| Complex64::new(0.0, u * s.log_returns[0]).exp())
            .collect();
        let (mc, se) = complex_mean_se(&draws);
        worst_z = worst_z.max((model - mc).norm() / se);
    }
    let elapsed = start.elapsed();
    outcome(
        worst_z <= 3.0 && elapsed < Duration::from_secs(120),
        format!("10 points, max |φ−φ_MC|/se = {worst_z:.2}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut invariant = true;
    for _ in 0..100 {
        let pattern = Pattern::ALL[rng.gen_range(0..Pattern::ALL.len())];
        let season = random_season(&mut rng, pattern);
        let f = FactorParams::new(
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.5..5.0),
            rng.gen_range(0.05..1.0),
            rng.gen_range(-0.9..0.9),
            rng.gen_range(0.01..0.5),
            season,
        )
        .unwrap();
        let horizon = rng.gen_range(0.1..2.0);
        let mats = [horizon + rng.gen_range(0.0..1.0), horizon + rng.gen_range(0.0..1.0)];
        let u = [Complex64::new(rng.gen_range(-3.0..3.0), 0.0), Complex64::new(rng.gen_range(-3.0..3.0), 0.0)];
        let engine = JointCf::new(&[f], horizon, mats, OdeOptions::default()).unwrap();
        let sol = engine.solve_factor(0, u).unwrap();
        worst = worst.max(riccati_residual(&sol, &f));

        let mut other = f;
        let alt_pattern = Pattern::ALL[rng.gen_range(0..Pattern::ALL.len())];
        other.season = random_season(&mut rng, alt_pattern);
        let alt = JointCf::new(&[other], horizon, mats, OdeOptions::default())
            .unwrap()
            .solve_factor(0, u)
            .unwrap();
        invariant &= sol.a.iter().zip(&alt.a).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits());
    }
    outcome(
        worst <= 1e-8 && invariant,
        format!("100 draws, max residual {worst:.2e}, A unchanged by level swap: {invariant}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let f = sinusoidal_factor(0.6, 2.0, 0.35, -0.4, 0.07, 0.08, 0.05, 0.4);
    let (expiry, t1, t2, rate) = (0.5, 0.75, 1.0, 0.02);
    let (f1, f2) = (100.0, 97.0);
    let cfg = SimConfig { horizon: expiry, steps: 250, n_paths: 500_000, measure: Measure::RiskNeutral, seed: 4040 };
    let samples = simulate_terminal(&[f], &[t1, t2], &cfg).unwrap();
    let disc = (-rate * expiry).exp();
    let mut worst_call: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    let mut bad_method = false;

    let strikes = [85.0, 95.0, 100.0, 105.0, 115.0];
    let spec = VanillaSpec { strike: 100.0, expiry, maturity: t1, rate, kind: OptionKind::Call };
    let calls = price_strikes(&spec, &strikes, &[f], f1, &Default::default()).unwrap();
    for (k, model) in strikes.iter().zip(&calls) {
        let pay: Vec<f64> = samples
            .iter()
            .map(|s| disc * (f1 * s.log_returns[0].exp() - k).max(0.0))
            .collect();
        let (mc, se) = mean_se(&pay);
        worst_call = worst_call.max((model - mc).abs() / se);
    }
    for k in [-4.0, -1.0, 0.0, 3.0, 6.0] {
        let spec = SpreadSpec { strike: k, expiry, maturities: [t1, t2], rate };
        let model = price_calendar_spread(&spec, &[f], f1, f2).unwrap();
        bad_method |= model.method == SpreadMethod::MonteCarlo;
        let pay: Vec<f64> = samples
            .iter()
            .map(|s| disc * (f1 * s.log_returns[0].exp() - f2 * s.log_returns[1].exp() - k).max(0.0))
            .collect();
        let (mc, se) = mean_se(&pay);
        worst_spread = worst_spread.max((model.price - mc).abs() / se);
    }
    let elapsed = start.elapsed();
    outcome(
        worst_call <= 3.0 && worst_spread <= 3.0 && !bad_method && elapsed < Duration::from_secs(300),
        format!(
            "5 strikes each, max call z {worst_call:.2}, max spread z {worst_spread:.2}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_spd(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a * a.transpose() + DMatrix::identity(n, n) * 0.1) * scale
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = 3;
        let k = rng.gen_range(1..=3);
        let len = rng.gen_range(1..=6);
        let mut systems = Vec::new();
        let mut dense = Vec::new();
        let mut obs = Vec::new();
        for _ in 0..len {
            let t = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.9..0.9));
            let d = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
            let r = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
            let q = random_spd(&mut rng, 2, 0.5);
            let z = DMatrix::from_fn(k, n, |_, _| rng.gen_range(-1.0..1.0));
            let c = DVector::from_fn(k, |_, _| rng.gen_range(-0.5..0.5));
            let h = DMatrix::from_diagonal(&DVector::from_fn(k, |_, _| rng.gen_range(0.05..0.5)));
            let w = &r * &q * r.transpose();
            dense.push(DenseStep { d: d.clone(), t: t.clone(), w, z: z.clone(), c: c.clone(), h: h.clone() });
            systems.push(SystemMatrices { d, t, r, q, z, c, h });
            let mut y: Vec<Option<f64>> = (0..k).map(|_| Some(rng.gen_range(-2.0..2.0))).collect();
            if k > 1 && rng.gen_bool(0.3) {
                y[rng.gen_range(0..k)] = None;
            }
            obs.push(y);
        }
        let mean0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let cov0 = random_spd(&mut rng, n, 0.3);
        let out = filter_linear(mean0.clone(), cov0.clone(), &systems, &obs, 0.0).unwrap();
        let (reference, _) = dense_oracle(&mean0, &cov0, &dense, &obs);
        worst = worst.max((out.loglik - reference).abs());
    }
    outcome(worst <= 1e-8, format!("20 systems, max |Δloglik| {worst:.2e}"))
}

fn pattern_of(name: &str) -> Pattern {
    name.parse().unwrap()
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for row in &TABLE4 {
        let k = row.n_contracts;
        let reports: Vec<FitReport> = TABLE4_PATTERNS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let p = pattern_of(name);
                let n_free = ModelSpec::new(p, k).n_free();
                FitReport::from_summary(name, p, false, row.ll[i], n_free, row.n_dates)
            })
            .collect();
        let frozen: Vec<FitReport> = TABLE4_PATTERNS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let p = pattern_of(name);
                let spec = ModelSpec::new(p, k).without_lambda();
                FitReport::from_summary(name, p, true, row.ll_no_lambda[i], spec.n_free(), row.n_dates)
            })
            .collect();
        let ranks = rank_models(&reports);
        for i in 0..6 {
            let r = &reports[i];
            worst = worst.max((r.aic - row.aic[i]).abs()).max((r.bic - row.bic[i]).abs());
            let d2 = 2.0 * (r.loglik - frozen[i].loglik);
            worst = worst.max((d2 - row.d2[i]).abs());
            let rank = ranks.iter().find(|x| x.model == r.model).unwrap();
            worst = worst.max((rank.delta_aic - row.delta_aic[i]).abs());
            if i < 5 {
                let t = lr_tests(r, &reports[5], &frozen[i]).unwrap();
                worst = worst.max((t.seasonality.statistic - row.d1[i]).abs());
                worst = worst.max((t.samuelson.statistic - row.d2[i]).abs());
            }
        }
        if row.name == "corn" {
            let t = lr_tests(&reports[0], &reports[5], &frozen[0]).unwrap();
            notes.push(format!(
                "corn D1={:.2} D2={:.2} AIC(exp-sin,{} free)={:.2} BIC={:.2}",
                t.seasonality.statistic, t.samuelson.statistic, reports[1].n_free, reports[1].aic, reports[1].bic
            ));
        }
    }
    outcome(worst <= 0.05, format!("5 commodities, max |Δ| {worst:.3}; {}", notes.join("; ")))
}

struct RoundTrip {
    truth: ModelParams,
    series: ObservationSeries,
    seasonal: FitReport,
    constant: FitReport,
    frozen: FitReport,
    elapsed: Duration,
}

fn round_trip() -> RoundTrip {
    let start = Instant::now();
    let f = sinusoidal_factor(0.5, 6.0, 0.25, -0.3, 0.08, 0.09, 0.06, 0.6).with_risk_premia(0.5, 0.0);
    let truth = ModelParams::one_factor(f, vec![7e-4; 5]);
    let spec = SyntheticSpec { n_dates: 2001, seed: 42, ..Default::default() };
    let panel = simulate_panel(&truth, &spec).unwrap().panel;
    let series = to_returns(&panel).unwrap();
    let k = series.n_series();
    let opts = FitOptions::default();
    let seasonal = fit(&series, &ModelSpec::new(Pattern::Sinusoidal, k), &opts).unwrap();
    let warm = FitOptions { start: seasonal.params.clone(), ..FitOptions::default() };
    let constant = fit(&series, &ModelSpec::new(Pattern::Constant, k), &warm).unwrap();
    let frozen = fit(&series, &ModelSpec::new(Pattern::Sinusoidal, k).without_lambda(), &warm).unwrap();
    RoundTrip { truth, series, seasonal, constant, frozen, elapsed: start.elapsed() }
}

fn criterion_7(rt: &RoundTrip) -> Outcome {
    let spec = ModelSpec::new(Pattern::Sinusoidal, rt.series.n_series());
    let true_x = spec.to_unconstrained(&rt.truth).unwrap();
    let names = spec.names();
    let mut ok = rt.seasonal.diagnostics.as_ref().is_some_and(|d| d.hessian_ok);
    let mut parts = Vec::new();
    for name in ["lambda", "kappa", "a", "t0"] {
        let i = names.iter().position(|n| n == name).unwrap();
        let e = rt.seasonal.estimate(name).unwrap();
        let z = (e.transformed - true_x[i]) / e.std_error;
        ok &= z.abs() <= 3.0;
        parts.push(format!("{name} z={z:+.2}"));
    }
    let t = lr_tests(&rt.seasonal, &rt.constant, &rt.frozen).unwrap();
    let q1 = ChiSquared::new(2.0).unwrap().inverse_cdf(0.99);
    let q2 = ChiSquared::new(1.0).unwrap().inverse_cdf(0.9999);
    ok &= t.seasonality.statistic > q1 && t.samuelson.statistic > q2;
    ok &= rt.elapsed < Duration::from_secs(1800);
    outcome(
        ok,
        format!(
            "{}; D1={:.2} (>{q1:.3}) D2={:.2} (>{q2:.3}); {:.0}s",
            parts.join(" "),
            t.seasonality.statistic,
            t.samuelson.statistic,
            rt.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let f = sinusoidal_factor(0.5, 3.0, 0.3, -0.5, 0.06, 0.08, 0.04, 0.25);
    let feller = f.feller_ok();
    let cfg = SimConfig { horizon: 2.0, steps: 2000, n_paths: 10_000, measure: Measure::RiskNeutral, seed: 808 };
    let samples = simulate_terminal(&[f], &[2.0], &cfg).unwrap();
    let min_v = samples.iter().map(|s| s.min_variance[0]).fold(f64::INFINITY, f64::min);
    let cmp = comparison_check(&f, f.season.theta_min(), 0.5 * f.v0, 2.0, 2000, 10_000, 809).unwrap();
    outcome(
        feller && min_v > 0.0 && cmp.holds,
        format!(
            "Feller {feller}, min v over 10⁴ paths {min_v:.3e}; comparison violations {} (worst gap {:.2e})",
            cmp.violations, cmp.worst_gap
        ),
    )
}

fn header(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).lines().next().unwrap_or_default().to_string()
}

fn criterion_9(rt: &RoundTrip) -> Outcome {
    // Published parameter tables and rankings depend on proprietary futures panels and are
    // out of scope; the same computations are exercised here on the synthetic panel.
    let mut est = Vec::new();
    rt.seasonal.write_estimates_csv(&mut est).unwrap();
    let ranks = rank_models(&[rt.seasonal.clone(), rt.constant.clone()]);
    let mut rank_csv = Vec::new();
    write_ranking_csv(&mut rank_csv, &ranks).unwrap();
    let cols = summary_table(&[
        (rt.seasonal.clone(), Some(rt.frozen.clone())),
        (rt.constant.clone(), None),
    ])
    .unwrap();
    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &cols).unwrap();
    let panel = simulate_panel(&rt.truth, &SyntheticSpec { n_dates: 300, seed: 9, ..Default::default() })
        .unwrap()
        .panel;
    let s = summarize(&panel, "synthetic").unwrap();
    let (mut desc, mut slots, mut months) = (Vec::new(), Vec::new(), Vec::new());
    s.write_description(&mut desc).unwrap();
    s.write_slot_vols(&mut slots).unwrap();
    s.write_month_vols(&mut months).unwrap();
    let toml_ok = FitReport::from_toml(&rt.seasonal.to_toml().unwrap()).is_ok();

    let summary_text = String::from_utf8_lossy(&summary).to_string();
    let summary_rows: Vec<&str> = summary_text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let checks = [
        header(&est) == "name,value,transformed,std_error,natural_std_error",
        header(&rank_csv) == "rank,delta_aic,model,loglik,aic,bic,weight",
        summary_rows
            == ["LL", "AIC", "BIC", "D1", "p-value (D1)", "delta_aic", "weight", "LL w/o lambda", "D2", "p-value (D2)"],
        header(&desc) == "name,dates,start_date,end_date,futures,min_price,max_price,avg_price,avg_vol",
        header(&slots) == "contract,synthetic",
        header(&months) == "calendar_month,synthetic",
        String::from_utf8_lossy(&months).lines().count() == 13,
        toml_ok,
    ];
    let ok = checks.iter().all(|&c| c);
    outcome(
        ok,
        format!(
            "published estimates/rankings need proprietary panels (not targets); {}/{} layout checks on synthetic fits",
            checks.iter().filter(|&&c| c).count(),
            checks.len()
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().map_or(true, |v| v.contains(&n));
    let mut failed = 0;
    let mut report = |n: usize, o: Outcome| {
        println!("ACCEPTANCE {n} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    let simple: [(usize, fn() -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (8, criterion_8),
    ];
    for (n, run) in simple {
        if wanted(n) {
            report(n, run());
        }
    }
    if wanted(7) || wanted(9) {
        let rt = round_trip();
        if wanted(7) {
            report(7, criterion_7(&rt));
        }
        if wanted(9) {
            report(9, criterion_9(&rt));
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
