//! Small numerical kernels shared across modules: compensated summation,
//! Gauss–Legendre quadrature (fixed and adaptive), golden-section search,
//! monotone cubic Hermite interpolation and fixed-precision formatting.

use std::sync::OnceLock;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 10-point rule used by the adaptive integrator.
pub fn gauss_legendre_10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

const ADAPTIVE_MAX_DEPTH: u32 = 60;

/// Adaptive Gauss–Legendre integration by recursive bisection.
///
/// A panel is accepted once the 10-point estimate on it and the sum of the
/// estimates on its two halves agree within the panel's share of `abs_tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let rule = gauss_legendre_10();
    let whole = rule.integrate(a, b, f);
    let mut acc = CompensatedSum::new();
    adaptive_step(f, rule, a, b, whole, abs_tol, 0, &mut acc);
    acc.value()
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    acc: &mut CompensatedSum,
) {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let refined = left + right;
    let noise = 8.0 * f64::EPSILON * refined.abs();
    if (refined - whole).abs() <= tol.max(noise) || depth >= ADAPTIVE_MAX_DEPTH || m <= a || m >= b {
        acc.add(refined);
        return;
    }
    adaptive_step(f, rule, a, m, left, 0.5 * tol, depth + 1, acc);
    adaptive_step(f, rule, m, b, right, 0.5 * tol, depth + 1, acc);
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Piecewise cubic Hermite interpolant that is monotone whenever the data are.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    /// Build from nodes and node slopes; slopes are limited (Fritsch–Carlson)
    /// so that each cubic piece stays monotone.
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, mut slope: Vec<f64>) -> Self {
        assert!(x.len() == y.len() && x.len() == slope.len() && x.len() >= 2);
        for i in 0..x.len() - 1 {
            let h = x[i + 1] - x[i];
            assert!(h > 0.0, "interpolation nodes must be strictly increasing");
            let delta = (y[i + 1] - y[i]) / h;
            if delta == 0.0 {
                slope[i] = 0.0;
                slope[i + 1] = 0.0;
                continue;
            }
            for j in [i, i + 1] {
                if !slope[j].is_finite() || slope[j].signum() != delta.signum() {
                    slope[j] = 0.0;
                }
            }
            let a = slope[i] / delta;
            let b = slope[i + 1] / delta;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                slope[i] = t * a * delta;
                slope[i + 1] = t * b * delta;
            }
        }
        Self { x, y, slope }
    }

    /// PCHIP-style interpolant with harmonic-mean node slopes.
    pub fn pchip(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut slope = vec![0.0; n];
        let secant = |i: usize| (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if n == 2 {
            slope[0] = secant(0);
            slope[1] = secant(0);
        } else {
            slope[0] = secant(0);
            slope[n - 1] = secant(n - 2);
            for i in 1..n - 1 {
                let (d0, d1) = (secant(i - 1), secant(i));
                slope[i] = if d0 * d1 <= 0.0 { 0.0 } else { 2.0 * d0 * d1 / (d0 + d1) };
            }
        }
        Self::with_slopes(x, y, slope)
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = ((t - self.x[i]) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = ((t - self.x[i]) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        d00 * self.y[i] + d10 * self.slope[i] + d01 * self.y[i + 1] + d11 * self.slope[i + 1]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

/// Format with 12 significant digits, fixed notation for moderate magnitudes.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let mut s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.push('0');
            }
        } else {
            s.push_str(".0");
        }
        s
    } else {
        let s = format!("{:.11e}", x);
        let (mantissa, exponent) = s.split_once('e').expect("exponent form");
        let mut m = mantissa.to_string();
        if m.contains('.') {
            while m.ends_with('0') {
                m.pop();
            }
            if m.ends_with('.') {
                m.push('0');
            }
        }
        format!("{m}e{exponent}")
    }
}
