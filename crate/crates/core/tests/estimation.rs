mod common;

use proptest::prelude::*;
use seasonvol::data::{simulate_panel, to_returns, SyntheticSpec};
use seasonvol::estimation::{
    aic, bic, fit, lr_test, lr_tests, rank_models, summary_table, FitOptions, FitReport, ModelSpec,
};
use seasonvol::optim::AnnealOptions;
use seasonvol::{FactorParams, ModelParams, Pattern, SeasonalitySpec};

use common::{Table4Row, TABLE4, TABLE4_PATTERNS};

fn reports(row: &Table4Row, frozen: bool) -> Vec<FitReport> {
    TABLE4_PATTERNS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let p: Pattern = name.parse().unwrap();
            let mut spec = ModelSpec::new(p, row.n_contracts);
            if frozen {
                spec = spec.without_lambda();
            }
            let ll = if frozen { row.ll_no_lambda[i] } else { row.ll[i] };
            FitReport::from_summary(name, p, frozen, ll, spec.n_free(), row.n_dates)
        })
        .collect()
}

fn check_row(name: &str) {
    let row = TABLE4.iter().find(|r| r.name == name).unwrap();
    let full = reports(row, false);
    let frozen = reports(row, true);
    let ranks = rank_models(&full);
    for i in 0..6 {
        assert!((full[i].aic - row.aic[i]).abs() <= 0.05, "{name} AIC[{i}]");
        assert!((full[i].bic - row.bic[i]).abs() <= 0.05, "{name} BIC[{i}]");
        let d2 = lr_test(&full[i], &frozen[i], 1).unwrap();
        assert!((d2.statistic - row.d2[i]).abs() <= 0.05, "{name} D2[{i}]");
        let r = ranks.iter().find(|r| r.model == full[i].model).unwrap();
        assert!((r.delta_aic - row.delta_aic[i]).abs() <= 0.05, "{name} Δ[{i}]");
        if i < 5 {
            let d1 = lr_test(&full[i], &full[5], 2).unwrap();
            assert!((d1.statistic - row.d1[i]).abs() <= 0.05, "{name} D1[{i}]");
        }
    }
}

#[test]
fn corn_fixture() {
    check_row("corn");
    let row = &TABLE4[0];
    let full = reports(row, false);
    assert_eq!(full[1].n_free, 19);
    assert!((full[1].aic - -204931.48).abs() <= 0.05);
    assert!((full[1].bic - -204820.6).abs() <= 0.05);
    let t = lr_tests(&full[0], &full[5], &reports(row, true)[0]).unwrap();
    assert!((t.seasonality.statistic - 24.01).abs() <= 0.05);
    assert!((t.samuelson.statistic - 4608.43).abs() <= 0.05);
    assert_eq!(t.samuelson.p_value, 0.0);
}

#[test]
fn cotton_fixture() {
    check_row("cotton");
}

#[test]
fn soybeans_fixture() {
    check_row("soybeans");
}

#[test]
fn sugar_fixture() {
    check_row("sugar");
}

#[test]
fn wheat_fixture() {
    check_row("wheat");
}

#[test]
fn summary_table_layout_from_fixtures() {
    let row = &TABLE4[0];
    let full = reports(row, false);
    let frozen = reports(row, true);
    let fits: Vec<_> = full.into_iter().zip(frozen.into_iter().map(Some)).collect();
    let cols = summary_table(&fits).unwrap();
    assert_eq!(cols.len(), 6);
    assert!(cols[5].d1.is_none());
    assert!(cols[..5].iter().all(|c| c.d1.is_some()));
    let w: f64 = cols.iter().map(|c| c.weight).sum();
    assert!((w - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn ranking_invariants(lls in prop::collection::vec(-1e4..1e4f64, 1..8), ks in prop::collection::vec(5usize..25, 8)) {
        let reps: Vec<FitReport> = lls
            .iter()
            .enumerate()
            .map(|(i, &ll)| FitReport::from_summary(&format!("m{i}"), Pattern::Sinusoidal, false, ll, ks[i], 1000))
            .collect();
        let rows = rank_models(&reps);
        prop_assert_eq!(rows.len(), reps.len());
        prop_assert_eq!(rows[0].delta_aic, 0.0);
        prop_assert!(rows.windows(2).all(|w| w[0].aic <= w[1].aic && w[0].weight >= w[1].weight));
        let total: f64 = rows.iter().map(|r| r.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for r in &rows {
            prop_assert!((r.aic - aic(r.loglik, reps.iter().find(|x| x.model == r.model).unwrap().n_free)).abs() < 1e-9);
        }
    }

    #[test]
    fn information_criteria_shift_with_loglik(ll in -1e5..1e5f64, k in 1usize..40, n in 10usize..5000, d in 0.0..100.0f64) {
        prop_assert!((aic(ll + d, k) - (aic(ll, k) - 2.0 * d)).abs() < 1e-6);
        prop_assert!((bic(ll, k, n) - aic(ll, k) - k as f64 * ((n as f64).ln() - 2.0)).abs() < 1e-6);
    }

    #[test]
    fn parameter_maps_round_trip(
        lambda in 0.01..3.0f64, kappa in 0.1..10.0f64, sigma in 0.05..2.0f64, rho in -0.98..0.98f64,
        v0 in 0.005..0.5f64, a in 0.01..0.5f64, frac in 0.01..0.99f64, t0 in 0.01..0.99f64, pi_f in -2.0..2.0f64,
        pattern in prop::sample::select(Pattern::ALL.to_vec()),
    ) {
        let b = match pattern {
            Pattern::Sinusoidal => a * frac,
            Pattern::Constant => 0.0,
            _ => frac,
        };
        let t0 = if pattern == Pattern::Constant { 0.0 } else { t0 };
        let s = SeasonalitySpec::new(pattern, a, b, t0).unwrap();
        let f = FactorParams::new(lambda, kappa, sigma, rho, v0, s).unwrap().with_risk_premia(pi_f, 0.0);
        let p = ModelParams::one_factor(f, vec![1e-3, 2e-3]);
        let spec = ModelSpec::new(pattern, 2);
        let x = spec.to_unconstrained(&p).unwrap();
        prop_assert_eq!(x.len(), spec.n_free());
        let back = spec.from_unconstrained(&x).unwrap();
        let g = back.factors[0];
        for (u, v) in [(g.lambda, lambda), (g.kappa, kappa), (g.sigma, sigma), (g.rho, rho), (g.v0, v0), (g.season.a, a), (g.season.b, b), (g.season.t0, t0), (g.pi_f, pi_f)] {
            prop_assert!((u - v).abs() <= 1e-9 * v.abs().max(1.0), "{u} vs {v}");
        }
    }
}

#[test]
fn free_parameter_counts() {
    assert_eq!(ModelSpec::new(Pattern::Spiked, 10).n_free(), 19);
    assert_eq!(ModelSpec::new(Pattern::Constant, 10).n_free(), 17);
    assert_eq!(ModelSpec::new(Pattern::Spiked, 10).without_lambda().n_free(), 18);
}

fn quick_options(seed: u64) -> FitOptions {
    FitOptions {
        anneal: AnnealOptions { restarts: 1, max_stages: 6, cycles: 4, seed, polish_max_evals: 300, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn fit_is_reproducible_and_reports_everything() {
    let s = SeasonalitySpec::new(Pattern::Sinusoidal, 0.09, 0.05, 0.6).unwrap();
    let f = FactorParams::new(0.5, 4.0, 0.25, -0.3, 0.08, s).unwrap();
    let truth = ModelParams::one_factor(f, vec![7e-4; 3]);
    let panel = simulate_panel(&truth, &SyntheticSpec { n_dates: 150, n_slots: 3, seed: 5, ..Default::default() })
        .unwrap()
        .panel;
    let series = to_returns(&panel).unwrap();
    let spec = ModelSpec::new(Pattern::Sinusoidal, 3);
    let a = fit(&series, &spec, &quick_options(3)).unwrap();
    let b = fit(&series, &spec, &quick_options(3)).unwrap();
    assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
    assert_eq!(a.estimates.len(), spec.n_free());
    assert_eq!(a.n_dates, 149);
    assert!((a.aic - aic(a.loglik, a.n_free)).abs() < 1e-9);
    let back = FitReport::from_toml(&a.to_toml().unwrap()).unwrap();
    assert_eq!(back.loglik.to_bits(), a.loglik.to_bits());
    assert_eq!(back.params, a.params);

    let mut csv = Vec::new();
    a.write_estimates_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), spec.n_free() + 1);
}

#[test]
fn mismatched_series_count_is_rejected() {
    let s = SeasonalitySpec::constant(0.08).unwrap();
    let f = FactorParams::new(0.5, 4.0, 0.25, 0.0, 0.08, s).unwrap();
    let truth = ModelParams::one_factor(f, vec![7e-4; 2]);
    let panel = simulate_panel(&truth, &SyntheticSpec { n_dates: 20, n_slots: 2, ..Default::default() }).unwrap().panel;
    let series = to_returns(&panel).unwrap();
    assert!(fit(&series, &ModelSpec::new(Pattern::Constant, 3), &quick_options(1)).is_err());
}
