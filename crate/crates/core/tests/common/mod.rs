//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

// Gauss–Kronrod 7/15 nodes and weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration to absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..20_000 {
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err < tol {
            break;
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&f, lo, mid)));
        parts.push((mid, hi, gk15(&f, mid, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// θ(t) written out directly, without the library's evaluation code.
pub fn theta_reference(pattern: &str, a: f64, b: f64, t0: f64, t: f64) -> f64 {
    let s = t - t0;
    let frac = s - s.floor();
    match pattern {
        "sinusoidal" => a + b * (2.0 * std::f64::consts::PI * s).cos(),
        "exp-sinusoidal" => a * (b * (2.0 * std::f64::consts::PI * s).cos()).exp(),
        "sawtooth" => a + b * frac,
        "triangle" => a + b * (0.5 - frac).abs(),
        "spiked" => {
            let r = 2.0 / (1.0 + (std::f64::consts::PI * s).sin().abs()) - 1.0;
            a + b * r * r
        }
        "constant" => a,
        other => panic!("unknown pattern {other}"),
    }
}

/// One linear-Gaussian step: s_t = d + T s_{t−1} + w, w ~ N(0, W); y_t = c + Z s_t + e, e ~ N(0, H).
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub d: DVector<f64>,
    pub t: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub c: DVector<f64>,
    pub h: DMatrix<f64>,
}

/// Joint Gaussian of all states and all observed entries, built by brute force.
/// Returns (log-density of the observations, E[s_t | all observations] for each t).
pub fn dense_oracle(
    mean0: &DVector<f64>,
    cov0: &DMatrix<f64>,
    steps: &[DenseStep],
    obs: &[Vec<Option<f64>>],
) -> (f64, Vec<DVector<f64>>) {
    let n = mean0.len();
    let nt = steps.len();
    // state means and the full state covariance across time
    let mut means = Vec::with_capacity(nt);
    let mut big = DMatrix::<f64>::zeros(n * nt, n * nt);
    // Represent s_t = m_t + A_t ξ where ξ stacks (s_0 noise, w_1..w_nt) of total dim n·(nt+1).
    let dim = n * (nt + 1);
    let mut m = mean0.clone();
    let mut a = DMatrix::<f64>::zeros(n, dim);
    // s_0 = mean0 + L0 ξ_0
    let l0 = matrix_sqrt(cov0);
    a.view_mut((0, 0), (n, n)).copy_from(&l0);
    let mut loads = Vec::with_capacity(nt);
    for (k, st) in steps.iter().enumerate() {
        m = &st.d + &st.t * &m;
        let mut na = &st.t * &a;
        let lw = matrix_sqrt(&st.w);
        na.view_mut((0, n * (k + 1)), (n, n)).copy_from(&lw);
        a = na;
        means.push(m.clone());
        loads.push(a.clone());
    }
    for i in 0..nt {
        for j in 0..nt {
            let blk = &loads[i] * loads[j].transpose();
            big.view_mut((n * i, n * j), (n, n)).copy_from(&blk);
        }
    }
    // observation vector
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (t, y) in obs.iter().enumerate() {
        for (r, v) in y.iter().enumerate() {
            if let Some(v) = v {
                rows.push((t, r, *v));
            }
        }
    }
    let ny = rows.len();
    let mut mu_y = DVector::zeros(ny);
    let mut yv = DVector::zeros(ny);
    let mut g = DMatrix::zeros(ny, n * nt); // y = c + G s + e
    let mut hy = DMatrix::zeros(ny, ny);
    for (q, &(t, r, v)) in rows.iter().enumerate() {
        yv[q] = v;
        let st = &steps[t];
        for c in 0..n {
            g[(q, n * t + c)] = st.z[(r, c)];
        }
        mu_y[q] = st.c[r] + (st.z.row(r) * &means[t])[0];
        for (q2, &(t2, r2, _)) in rows.iter().enumerate() {
            if t2 == t {
                hy[(q, q2)] = st.h[(r, r2)];
            }
        }
    }
    let syy = &g * &big * g.transpose() + hy;
    let chol = syy.clone().cholesky().expect("observation covariance PD");
    let resid = &yv - &mu_y;
    let alpha = chol.solve(&resid);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let ll = -0.5 * (ny as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + resid.dot(&alpha));
    let cond = &big * g.transpose() * alpha;
    let smoothed = (0..nt)
        .map(|t| &means[t] + cond.rows(n * t, n).into_owned())
        .collect();
    (ll, smoothed)
}

fn matrix_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Mean and standard error of complex samples (componentwise SE combined in quadrature).
pub fn complex_mean_se(xs: &[Complex64]) -> (Complex64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<Complex64>() / n;
    let var = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One commodity block of the published model-comparison table.
pub struct Table4Row {
    pub name: &'static str,
    pub n_dates: usize,
    pub n_contracts: usize,
    /// Log-likelihoods: sinusoidal, exp-sinusoidal, triangle, sawtooth, spiked, non-seasonal.
    pub ll: [f64; 6],
    pub aic: [f64; 6],
    pub bic: [f64; 6],
    /// D1 for the five seasonal patterns.
    pub d1: [f64; 5],
    pub ll_no_lambda: [f64; 6],
    pub d2: [f64; 6],
    pub delta_aic: [f64; 6],
}

pub const TABLE4: [Table4Row; 5] = [
    Table4Row {
        name: "corn",
        n_dates: 2529,
        n_contracts: 10,
        ll: [102465.71, 102484.74, 102472.79, 102480.13, 102484.19, 102453.7],
        aic: [-204893.42, -204931.48, -204907.57, -204922.27, -204930.39, -204873.41],
        bic: [-204782.53, -204820.6, -204796.69, -204811.39, -204819.5, -204774.2],
        d1: [24.01, 62.07, 38.16, 52.86, 60.98],
        ll_no_lambda: [100161.49, 100175.27, 100158.01, 100144.85, 100173.33, 100113.78],
        d2: [4608.43, 4618.94, 4629.55, 4670.56, 4621.73, 4679.84],
        delta_aic: [38.07, 0.0, 23.91, 9.21, 1.1, 58.07],
    },
    Table4Row {
        name: "cotton",
        n_dates: 2528,
        n_contracts: 10,
        ll: [92282.69, 92283.76, 92280.73, 92272.13, 92296.98, 92261.8],
        aic: [-184527.38, -184529.52, -184523.46, -184506.26, -184555.97, -184489.61],
        bic: [-184416.5, -184418.65, -184412.58, -184395.39, -184445.09, -184390.4],
        d1: [41.77, 43.92, 37.85, 20.66, 70.36],
        ll_no_lambda: [91488.25, 91497.24, 91486.01, 91484.56, 91512.44, 91426.22],
        d2: [1588.87, 1573.04, 1589.43, 1575.14, 1569.08, 1671.16],
        delta_aic: [28.59, 26.45, 32.51, 49.71, 0.0, 66.36],
    },
    Table4Row {
        name: "soybeans",
        n_dates: 2529,
        n_contracts: 13,
        ll: [141142.8, 141153.78, 141142.27, 141140.68, 141168.86, 141128.88],
        aic: [-282241.6, -282263.57, -282240.54, -282237.36, -282293.73, -282217.75],
        bic: [-282113.21, -282135.18, -282112.14, -282108.97, -282165.33, -282101.03],
        d1: [27.84, 49.82, 26.78, 23.61, 79.97],
        ll_no_lambda: [139993.99, 140003.0, 140002.22, 139995.84, 140024.2, 139974.08],
        d2: [2297.62, 2301.57, 2280.1, 2289.68, 2289.32, 2309.6],
        delta_aic: [52.13, 30.16, 53.19, 56.37, 0.0, 75.97],
    },
    Table4Row {
        name: "sugar",
        n_dates: 2528,
        n_contracts: 7,
        ll: [64438.15, 64438.58, 64434.82, 64433.59, 64437.2, 64418.96],
        aic: [-128844.31, -128845.15, -128837.64, -128835.17, -128842.39, -128809.91],
        bic: [-128750.94, -128751.78, -128744.27, -128741.8, -128749.02, -128728.22],
        d1: [38.39, 39.24, 31.73, 29.26, 36.48],
        ll_no_lambda: [63326.34, 63328.12, 63326.64, 63324.38, 63329.57, 63313.15],
        d2: [2223.62, 2220.92, 2216.36, 2218.41, 2215.26, 2211.6],
        delta_aic: [0.85, 0.0, 7.51, 9.98, 2.76, 35.24],
    },
    Table4Row {
        name: "wheat",
        n_dates: 2529,
        n_contracts: 10,
        ll: [101640.24, 101638.48, 101636.36, 101638.01, 101635.26, 101630.6],
        aic: [-203242.47, -203238.96, -203234.71, -203238.03, -203232.51, -203227.2],
        bic: [-203131.59, -203128.07, -203123.83, -203127.14, -203121.63, -203127.99],
        d1: [19.27, 15.76, 11.51, 14.83, 9.32],
        ll_no_lambda: [99162.99, 99162.51, 99159.02, 99152.05, 99155.02, 99146.93],
        d2: [4954.5, 4951.93, 4954.68, 4971.92, 4960.47, 4967.34],
        delta_aic: [0.0, 3.52, 7.76, 4.45, 9.96, 15.27],
    },
];

pub const TABLE4_PATTERNS: [&str; 6] = ["sinusoidal", "exp-sinusoidal", "triangle", "sawtooth", "spiked", "constant"];
