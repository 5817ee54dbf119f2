use std::fs;
use std::path::Path;

use seasonvol::cli::run;
use seasonvol::data::{simulate_panel, SyntheticSpec};
use seasonvol::{FactorParams, ModelParams, Pattern, SeasonalitySpec};

const PARAMS: &str = r#"
h = [0.0007, 0.0007, 0.0007]

[[factor]]
lambda = 0.5
kappa = 4.0
sigma = 0.25
rho = -0.3
v0 = 0.08
pi_f = 0.2

[factor.seasonality]
pattern = "sinusoidal"
a = 0.09
b = 0.05
t0 = 0.6
"#;

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("seasonvol").chain(args.iter().copied()))
}

fn setup(dir: &Path) -> (String, String) {
    let params = dir.join("params.toml");
    fs::write(&params, PARAMS).unwrap();
    let s = SeasonalitySpec::new(Pattern::Sinusoidal, 0.09, 0.05, 0.6).unwrap();
    let f = FactorParams::new(0.5, 4.0, 0.25, -0.3, 0.08, s).unwrap();
    let truth = ModelParams::one_factor(f, vec![7e-4; 3]);
    let panel = simulate_panel(&truth, &SyntheticSpec { n_dates: 120, n_slots: 3, seed: 2, ..Default::default() })
        .unwrap()
        .panel;
    let data = dir.join("panel.csv");
    panel.write_csv(fs::File::create(&data).unwrap()).unwrap();
    (params.display().to_string(), data.display().to_string())
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn pricing_and_transform_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let (params, _) = setup(tmp.path());
    let out = tmp.path().display().to_string();
    assert_eq!(
        cli(&["--out", &out, "price", "--params", &params, "--expiry", "0.5", "--maturity", "0.75", "--f0", "100", "--strikes", "90,100,110"]),
        0
    );
    assert_eq!(read(tmp.path(), "prices.csv").lines().count(), 4);
    assert_eq!(
        cli(&["--out", &out, "cf", "--params", &params, "--horizon", "0.5", "--maturity", "0.75", "--points", "5", "--ode-steps", "256"]),
        0
    );
    assert_eq!(read(tmp.path(), "cf.csv").lines().count(), 6);
}

#[test]
fn simulation_is_seeded_and_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    let (params, _) = setup(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let d = d.display().to_string();
        let code = cli(&["--out", &d, "simulate", "--params", &params, "--horizon", "0.2", "--steps", "5", "--paths", "3", "--maturities", "0.5,1", "--seed", "7"]);
        assert_eq!(code, 0);
    }
    let (x, y) = (read(&a, "paths.csv"), read(&b, "paths.csv"));
    assert_eq!(x, y);
    assert!(x.starts_with("# seed=7 config_sha256="));
}

#[test]
fn estimate_test_rank_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, data) = setup(tmp.path());
    let fit = |sub: &str, extra: &[&str]| {
        let d = tmp.path().join(sub);
        let d_str = d.display().to_string();
        let mut args = vec!["--out", &d_str, "estimate", "--data", &data, "--seed", "4", "--restarts", "1", "--max-stages", "3"];
        args.extend_from_slice(extra);
        assert_eq!(cli(&args), 0, "{sub}");
        d.join("report.toml").display().to_string()
    };
    let seasonal = fit("s", &["--pattern", "sinusoidal"]);
    let again = fit("s2", &["--pattern", "sinusoidal"]);
    assert_eq!(fs::read_to_string(&seasonal).unwrap(), fs::read_to_string(&again).unwrap());
    let constant = fit("c", &["--pattern", "constant", "--start", &seasonal]);
    let frozen = fit("n", &["--pattern", "sinusoidal", "--no-lambda"]);
    assert!(tmp.path().join("s/estimates.csv").exists());

    let out = tmp.path().display().to_string();
    assert_eq!(cli(&["--out", &out, "test", "--seasonal", &seasonal, "--constant", &constant, "--no-lambda", &frozen]), 0);
    assert!(read(tmp.path(), "lr_tests.csv").starts_with("model,LL,LL w/o lambda,D1"));
    assert_eq!(cli(&["--out", &out, "rank", &seasonal, &constant, &frozen]), 0);
    assert_eq!(read(tmp.path(), "ranking.csv").lines().count(), 4);
    assert_eq!(cli(&["--out", &out, "export-states", "--data", &data, "--params", &seasonal, "--filtered"]), 0);
    assert_eq!(read(tmp.path(), "states.csv").lines().count(), 120);
}

#[test]
fn summarize_and_export_states() {
    let tmp = tempfile::tempdir().unwrap();
    let (params, data) = setup(tmp.path());
    let out = tmp.path().display().to_string();
    assert_eq!(cli(&["--out", &out, "summarize", "--data", &data, "--name", "syn"]), 0);
    assert!(read(tmp.path(), "description.csv").starts_with("name,dates,start_date"));
    assert_eq!(read(tmp.path(), "month_vols.csv").lines().count(), 13);
    assert_eq!(cli(&["--out", &out, "export-states", "--data", &data, "--params", &params]), 0);
    assert_eq!(read(tmp.path(), "states.csv").lines().count(), 120);
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (params, _) = setup(tmp.path());
    assert_eq!(cli(&["price", "--params", "/nonexistent.toml", "--expiry", "1", "--maturity", "2", "--f0", "1", "--strikes", "1"]), 1);
    assert_eq!(cli(&["price", "--params", &params, "--expiry", "1", "--maturity", "0.5", "--f0", "1", "--strikes", "1"]), 1);
    assert_ne!(cli(&["no-such-command"]), 0);
}
