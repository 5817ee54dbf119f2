//! Gauss–Legendre rules and composite integration over kink-delimited panels.

use std::f64::consts::PI;

/// An n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on P_n, starting from the Chebyshev-like
    /// initial guesses. Accurate to machine precision for n up to a few hundred.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule: [a, b] is cut at every interior `breakpoint`, and each smooth piece
    /// is further divided into panels no wider than `max_panel`.
    pub fn integrate_piecewise<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        breakpoints: &[f64],
        max_panel: f64,
        mut f: F,
    ) -> f64 {
        panels(a, b, breakpoints, max_panel)
            .into_iter()
            .map(|(lo, hi)| self.integrate(lo, hi, &mut f))
            .sum()
    }
}

/// Splits [a, b] at the sorted interior breakpoints and subdivides each piece uniformly
/// so that no panel is wider than `max_panel`.
pub fn panels(a: f64, b: f64, breakpoints: &[f64], max_panel: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut out = Vec::new();
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let pieces = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
        let h = (hi - lo) / pieces as f64;
        for k in 0..pieces {
            let start = lo + k as f64 * h;
            let end = if k + 1 == pieces { hi } else { start + h };
            out.push((start, end));
        }
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 64] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(6);
        // x^11 over [0, 2] = 2^12 / 12
        let v = rule.integrate(0.0, 2.0, |x| x.powi(11));
        assert!((v - 4096.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn piecewise_handles_kink() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate_piecewise(0.0, 2.0, &[0.7], 0.5, |x| (x - 0.7).abs());
        let exact = 0.5 * 0.7 * 0.7 + 0.5 * 1.3 * 1.3;
        assert!((v - exact).abs() < 1e-14);
    }

    #[test]
    fn panels_cover_interval() {
        let p = panels(0.0, 1.0, &[0.25, 0.25, 2.0, -1.0], 0.3);
        assert_eq!(p.first().unwrap().0, 0.0);
        assert_eq!(p.last().unwrap().1, 1.0);
        for w in p.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert!(p.iter().all(|(a, b)| b - a <= 0.3 + 1e-15));
    }
}
