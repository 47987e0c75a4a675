//! Gauss–Legendre rules and an adaptive integrator built on them.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
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
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut acc = NeumaierSum::default();
        for (x, w) in self.on_interval(a, b) {
            acc.add(w * f(x));
        }
        acc.value()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Kahan–Babuška–Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Adaptive integration: each panel is integrated with a 20- and a 40-point rule,
/// and bisected until the two agree to `tol` in the absolute-or-relative sense.
#[derive(Debug, Clone)]
pub struct AdaptiveIntegrator {
    coarse: GaussLegendre,
    fine: GaussLegendre,
    pub tolerance: f64,
    pub max_depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

impl Default for AdaptiveIntegrator {
    fn default() -> Self {
        Self::new(1e-13)
    }
}

impl AdaptiveIntegrator {
    pub fn new(tolerance: f64) -> Self {
        AdaptiveIntegrator {
            coarse: GaussLegendre::new(20),
            fine: GaussLegendre::new(40),
            tolerance,
            max_depth: 40,
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> AdaptiveResult {
        let mut out = AdaptiveResult { value: 0.0, error_estimate: 0.0, panels: 0 };
        let mut sum = NeumaierSum::default();
        let whole = self.fine.integrate(a, b, &f);
        self.panel(a, b, &f, whole.abs(), 0, &mut sum, &mut out);
        out.value = sum.value();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn panel<F: Fn(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        f: &F,
        scale: f64,
        depth: u32,
        sum: &mut NeumaierSum,
        out: &mut AdaptiveResult,
    ) {
        let c = self.coarse.integrate(a, b, f);
        let g = self.fine.integrate(a, b, f);
        let err = (g - c).abs();
        if err <= self.tolerance * scale.max(g.abs()).max(f64::MIN_POSITIVE) || depth >= self.max_depth {
            sum.add(g);
            out.error_estimate += err;
            out.panels += 1;
            return;
        }
        let m = 0.5 * (a + b);
        self.panel(a, m, f, scale, depth + 1, sum, out);
        self.panel(m, b, f, scale, depth + 1, sum, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15) - 3.0 * x.powi(4));
        let exact = 2f64.powi(16) / 16.0 - 3.0 * 2f64.powi(5) / 5.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 7, 64, 256] {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let r = AdaptiveIntegrator::default().integrate(0.0, 1.0, |x| 1.0 / (1e-3 + (x - 0.3).powi(2)));
        let s = 1e-3f64.sqrt();
        let exact = ((0.7 / s).atan() + (0.3 / s).atan()) / s;
        assert!((r.value - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn compensated_sum() {
        let s: NeumaierSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
