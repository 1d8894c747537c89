//! Explicit optimal densities along a single ray.
//!
//! Along a ray the payoff is `J(u) = ∫ σ(1 − e^{−u/σ}) ds − c ∫ z(s)^α ds` with
//! `z(s) = ∫_s^∞ u` and `σ = 1` on the ray perpendicular to the light, `σ = sin θ0`
//! on the horizontal ray. With the adjoint `q` the necessary conditions read
//!
//! ```text
//!   u = −σ ln q,   ż = −u = σ ln q,   q̇ = cα z^{α−1},   q(0) = 0,   z(ℓ) = 0,
//! ```
//!
//! so `dz/dq = σ z^{1−α} ln q / (cα)`. Integrating with `z(1) = 0` gives
//! `z(q)^α = (σ/c)·B(q)` where `B(q) = 1 + q ln q − q`. Hence `σ` enters `z`
//! as `σ^{1/α}` and the arclength `s(q) = ∫ dq / q̇` carries `σ^{(1−α)/α}`, which
//! is the length ratio between the two rays.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::irrigation::chain_cost;
use crate::measure::{Measure, Piece, Segment};
use crate::numeric::{fmt_sig, integrate_adaptive, CompensatedSum, MonotoneCubic};
use crate::theory::{two_ray_optimum_applies, Applicability};

/// Absolute tolerance on `s` for [`s_of_q`].
pub const S_TOL: f64 = 1e-12;
/// Geometric refinement nodes added in `[0.9, 1)` and `(0, 1/(N − 1))`.
const REFINE_LEVELS: i32 = 30;

fn check(alpha: f64, c: f64, sin_factor: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("c = {c} must be positive")));
    }
    if !(sin_factor > 0.0 && sin_factor <= 1.0) {
        return Err(Error::Domain(format!("sin factor {sin_factor} must lie in (0, 1]")));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("q = {q} outside [0, 1]")))
    }
}

/// `B(q) = 1 + q ln q − q`, with `0·ln 0 = 0`.
///
/// Near `q = 1` the three terms cancel to `(1 − q)²/2`, so there the series
/// `Σ_{k≥2} x^k / (k(k−1))` in `x = 1 − q` is summed instead.
pub fn bracket(q: f64) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    let x = 1.0 - q;
    if x > 0.1 {
        return 1.0 - q + q * q.ln();
    }
    let mut sum = 0.0;
    let mut pow = x * x;
    for k in 2..60 {
        let kf = k as f64;
        let term = pow / (kf * (kf - 1.0));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
        pow *= x;
    }
    sum
}

/// `(1 − α)/α`, the exponent of `B` in `ds/dq`.
fn dual_exponent(alpha: f64) -> f64 {
    (1.0 - alpha) / alpha
}

/// `ds/dq = σ^{(1−α)/α} B(q)^{(1−α)/α} / (α c^{1/α})`.
fn ds_dq(q: f64, alpha: f64, c: f64, sin_factor: f64) -> f64 {
    let p = dual_exponent(alpha);
    if p == 0.0 {
        return 1.0 / c;
    }
    length_prefactor(alpha, c, sin_factor) * bracket(q).powf(p)
}

fn length_prefactor(alpha: f64, c: f64, sin_factor: f64) -> f64 {
    sin_factor.powf(dual_exponent(alpha)) / (alpha * c.powf(1.0 / alpha))
}

/// Tail mass as a function of the adjoint: `(σ/c)^{1/α} B(q)^{1/α}`.
pub fn z_of_q(q: f64, alpha: f64, c: f64, sin_factor: f64) -> Result<f64> {
    check(alpha, c, sin_factor)?;
    check_q(q)?;
    Ok(z_unchecked(q, alpha, c, sin_factor))
}

fn z_unchecked(q: f64, alpha: f64, c: f64, sin_factor: f64) -> f64 {
    (sin_factor / c * bracket(q)).powf(1.0 / alpha)
}

/// Arclength at which the adjoint reaches `q`.
pub fn s_of_q(q: f64, alpha: f64, c: f64, sin_factor: f64) -> Result<f64> {
    check(alpha, c, sin_factor)?;
    check_q(q)?;
    let p = dual_exponent(alpha);
    if p == 0.0 {
        return Ok(q / c);
    }
    let k = length_prefactor(alpha, c, sin_factor);
    let f = |t: f64| bracket(t).powf(p);
    Ok(k * integrate_adaptive(&f, 0.0, q, S_TOL / k))
}

/// Branch length `ℓ = s(1)`.
pub fn branch_length(alpha: f64, c: f64, sin_factor: f64) -> Result<f64> {
    s_of_q(1.0, alpha, c, sin_factor)
}

/// How to turn the continuous density into constant values on cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellRule {
    /// `u_i = −σ ln(mean of q over the cell)`. A cell discretization of the
    /// payoff is stationary exactly when this holds for its own discrete
    /// adjoint, so this is the value a converged optimizer should approach.
    Stationary,
    /// `u_i = (z(a_i) − z(b_i))/h`, the exact cell average. Preserves mass.
    Mass,
}

/// Tabulated optimal profile along one ray.
#[derive(Clone, Debug)]
pub struct ClosedFormSolution {
    pub alpha: f64,
    pub c: f64,
    pub sin_factor: f64,
    /// Adjoint nodes on `[0, 1]`, strictly increasing.
    pub q: Vec<f64>,
    /// `s(q)` at the nodes; `s[0] = 0` and the last entry is `ell`.
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    /// `u = −σ ln q`; infinite at `s = 0`.
    pub u: Vec<f64>,
    pub ell: f64,
    inverse: Option<MonotoneCubic>,
}

/// Tabulate `s(q)`, `z(q)` and invert to `q(s)`.
///
/// The q-grid is uniform with `grid_size` nodes plus geometric refinement
/// toward both ends: near `q = 1` the integrand of `s` vanishes like `(1 − q)²`,
/// near `q = 0` the density has its logarithmic singularity.
pub fn solve_ray(alpha: f64, c: f64, sin_factor: f64, grid_size: usize) -> Result<ClosedFormSolution> {
    check(alpha, c, sin_factor)?;
    if grid_size < 16 {
        return Err(Error::Config(format!("grid size {grid_size} below 16")));
    }
    let step = 1.0 / (grid_size - 1) as f64;
    let mut q: Vec<f64> = (0..grid_size).map(|i| i as f64 * step).collect();
    q[grid_size - 1] = 1.0;
    for k in 1..=REFINE_LEVELS {
        let r = 0.5f64.powi(k);
        q.push(1.0 - 0.1 * r);
        q.push(step * r);
    }
    q.sort_by(f64::total_cmp);
    q.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);

    let p = dual_exponent(alpha);
    let mut s = Vec::with_capacity(q.len());
    if p == 0.0 {
        s.extend(q.iter().map(|&t| t / c));
    } else {
        let k = length_prefactor(alpha, c, sin_factor);
        let f = |t: f64| bracket(t).powf(p);
        let mut acc = CompensatedSum::new();
        s.push(0.0);
        for w in q.windows(2) {
            acc.add(integrate_adaptive(&f, w[0], w[1], 1e-3 * S_TOL / k));
            s.push(k * acc.value());
        }
    }
    // Close to q = 1 the increments of s drop below its rounding resolution;
    // such nodes carry no information and would break the inversion.
    let mut keep = vec![true; q.len()];
    let mut last = 0;
    for i in 1..q.len() {
        if s[i] > s[last] {
            last = i;
        } else if i == q.len() - 1 {
            keep[last] = last == 0;
            last = i;
        } else {
            keep[i] = false;
        }
    }
    let mut it = keep.iter();
    q.retain(|_| *it.next().expect("same length"));
    let mut it = keep.iter();
    s.retain(|_| *it.next().expect("same length"));

    let ell = *s.last().expect("non-empty grid");
    let z: Vec<f64> = q.iter().map(|&t| z_unchecked(t, alpha, c, sin_factor)).collect();
    let u: Vec<f64> = q.iter().map(|&t| -sin_factor * t.ln()).collect();

    let inverse = (p != 0.0).then(|| {
        let slopes = z.iter().map(|&zz| c * alpha * zz.powf(alpha - 1.0)).collect();
        MonotoneCubic::with_slopes(s.clone(), q.clone(), slopes)
    });
    Ok(ClosedFormSolution { alpha, c, sin_factor, q, s, z, u, ell, inverse })
}

impl ClosedFormSolution {
    /// `q(s)`; 0 at the origin and 1 from `ell` on.
    pub fn q_at(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.ell {
            return 1.0;
        }
        match &self.inverse {
            Some(inv) => inv.eval(s).clamp(0.0, 1.0),
            None => (self.c * s).min(1.0),
        }
    }

    pub fn u_at(&self, s: f64) -> f64 {
        -self.sin_factor * self.q_at(s).ln()
    }

    pub fn z_at(&self, s: f64) -> f64 {
        z_unchecked(self.q_at(s), self.alpha, self.c, self.sin_factor)
    }

    /// Derivative of the interpolated inverse `q(s)`.
    pub fn dq_ds_interpolated(&self, s: f64) -> f64 {
        match &self.inverse {
            Some(inv) => inv.derivative(s),
            None => self.c,
        }
    }

    /// Total mass `z(0) = (σ/c)^{1/α}`.
    pub fn mass(&self) -> f64 {
        self.z[0]
    }

    /// The exact optimal value `J(u*)`.
    ///
    /// On the optimal profile `σ(1 − q) − c z^α = −σ q ln q`, so
    /// `J(u*) = σ ∫_0^1 (−t ln t) s'(t) dt`.
    pub fn optimal_payoff(&self) -> f64 {
        let (a, c, sf) = (self.alpha, self.c, self.sin_factor);
        let f = |t: f64| if t <= 0.0 { 0.0 } else { -t * t.ln() * ds_dq(t, a, c, sf) };
        sf * integrate_adaptive(&f, 0.0, 1.0, 1e-14)
    }

    /// `∫_a^b q(s) ds` for `0 ≤ a ≤ b`, evaluated in the q variable.
    fn integral_of_q(&self, a: f64, b: f64) -> f64 {
        let tail = (b - b.min(self.ell)).max(0.0);
        let b = b.min(self.ell);
        if a >= b {
            return tail;
        }
        let (qa, qb) = (self.q_at(a), self.q_at(b));
        let (al, c, sf) = (self.alpha, self.c, self.sin_factor);
        let f = |t: f64| t * ds_dq(t, al, c, sf);
        // Rescale so the integral reproduces b − a exactly when q is constant.
        let span = integrate_adaptive(&|t: f64| ds_dq(t, al, c, sf), qa, qb, 1e-15);
        let body = integrate_adaptive(&f, qa, qb, 1e-15);
        let body = if span > 0.0 { body * (b - a) / span } else { qa * (b - a) };
        body + tail
    }

    /// Constant values on `n` equal cells of `[0, length]`.
    pub fn cell_densities(&self, n: usize, length: f64, rule: CellRule) -> Vec<f64> {
        let h = length / n as f64;
        (0..n)
            .map(|i| {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                if a >= self.ell {
                    return 0.0;
                }
                match rule {
                    CellRule::Stationary => {
                        let mean = self.integral_of_q(a, b) / h;
                        if mean >= 1.0 {
                            0.0
                        } else {
                            -self.sin_factor * mean.ln()
                        }
                    }
                    CellRule::Mass => ((self.z_at(a) - self.z_at(b)) / h).max(0.0),
                }
            })
            .collect()
    }

    /// Largest relative mismatch between a central difference of `z(q)` and
    /// `σ z^{1−α} ln q / (cα)` over interior grid nodes.
    ///
    /// The step is `1e-4·min(q, 1 − q)` so that it shrinks with the distance to
    /// the singular ends. Nodes with `q < q_min` are skipped: the slope of `z`
    /// grows like `ln q`, and a difference quotient there is dominated by
    /// rounding long before the step is small enough.
    pub fn ode_residual(&self, q_min: f64) -> f64 {
        let (a, c, sf) = (self.alpha, self.c, self.sin_factor);
        let mut worst: f64 = 0.0;
        for &q in &self.q {
            if q <= q_min.max(0.0) || q >= 1.0 {
                continue;
            }
            let d = 1e-4 * q.min(1.0 - q);
            let fd = (z_unchecked(q + d, a, c, sf) - z_unchecked(q - d, a, c, sf)) / (2.0 * d);
            let exact = sf * z_unchecked(q, a, c, sf).powf(1.0 - a) * q.ln() / (c * a);
            worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
        }
        worst
    }

    /// Largest relative mismatch between the slope of the interpolated inverse
    /// `q(s)` and `cα z^{α−1}`, at midpoints between grid nodes with `q ≤ q_max`.
    pub fn dual_residual(&self, q_max: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.s.len() - 1 {
            if self.q[i + 1] > q_max {
                break;
            }
            let s = 0.5 * (self.s[i] + self.s[i + 1]);
            let num = self.dq_ds_interpolated(s);
            let exact = self.c * self.alpha * self.z_at(s).powf(self.alpha - 1.0);
            worst = worst.max((num - exact).abs() / exact.abs().max(1.0));
        }
        worst
    }

    /// Write the table as CSV with columns `s,q,z,u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "s,q,z,u")?;
        for i in 0..self.q.len() {
            writeln!(w, "{},{},{},{}", fmt_sig(self.s[i]), fmt_sig(self.q[i]), fmt_sig(self.z[i]), fmt_sig(self.u[i]))?;
        }
        Ok(())
    }
}

/// Sunlight and transport parts of the cell-discretized ray payoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayPayoff {
    pub sunlight: f64,
    pub cost: f64,
}

impl RayPayoff {
    pub fn net(&self) -> f64 {
        self.sunlight - self.cost
    }
}

/// `J(u) = ∫ σ(1 − e^{−u/σ}) ds − c ∫ z^α ds` for densities constant on cells
/// of width `h`. Both integrals are exact for that representation.
pub fn payoff_j_parts(cells: &[f64], h: f64, alpha: f64, c: f64, sin_factor: f64) -> Result<RayPayoff> {
    crate::irrigation::chain::RayDensityPlan::new(0.0, h * cells.len() as f64, cells.to_vec())?;
    if !(0.0..=1.0).contains(&alpha) || !(c >= 0.0) || !(sin_factor > 0.0 && sin_factor <= 1.0) {
        return Err(Error::Domain(format!("bad payoff parameters α={alpha}, c={c}, σ={sin_factor}")));
    }
    let mut sun = CompensatedSum::new();
    for &u in cells {
        sun.add(-sin_factor * (-u / sin_factor).exp_m1());
    }
    Ok(RayPayoff { sunlight: h * sun.value(), cost: c * chain_cost(cells, h, alpha) })
}

pub fn payoff_j(cells: &[f64], h: f64, alpha: f64, c: f64, sin_factor: f64) -> Result<f64> {
    payoff_j_parts(cells, h, alpha, c, sin_factor).map(|p| p.net())
}

/// Two-ray optimal measure: `gamma1` along angle `θ0 + π/2`, `gamma0` along the
/// positive horizontal axis.
#[derive(Clone, Debug)]
pub struct OptimalMeasure {
    pub measure: Measure,
    pub gamma1: ClosedFormSolution,
    pub gamma0: ClosedFormSolution,
    /// Whether `(α, θ0)` lies where the two-ray structure is known to be
    /// optimal. The measure is built either way.
    pub applicability: Applicability,
}

impl OptimalMeasure {
    pub fn certified(&self) -> bool {
        self.applicability.applicable
    }

    pub fn ell1(&self) -> f64 {
        self.gamma1.ell
    }

    pub fn ell0(&self) -> f64 {
        self.gamma0.ell
    }
}

/// Build the two-ray measure with mass-exact cell densities, `cells` per ray.
pub fn assemble_optimal_measure(alpha: f64, c: f64, theta0: f64, cells: usize) -> Result<OptimalMeasure> {
    if !(theta0 > 0.0 && theta0 <= std::f64::consts::FRAC_PI_2 + 1e-15) {
        return Err(Error::Domain(format!("theta0 = {theta0} must lie in (0, π/2]")));
    }
    if cells == 0 {
        return Err(Error::Config("need at least one cell per ray".into()));
    }
    let sf = theta0.sin().min(1.0);
    let gamma1 = solve_ray(alpha, c, 1.0, 1024)?;
    let gamma0 = solve_ray(alpha, c, sf, 1024)?;
    let ray = |sol: &ClosedFormSolution, angle: f64| {
        let dens = sol.cell_densities(cells, sol.ell, CellRule::Mass);
        let n = cells as f64;
        Segment {
            a: [0.0, 0.0],
            b: [sol.ell * angle.cos(), (sol.ell * angle.sin()).max(0.0)],
            pieces: dens
                .iter()
                .enumerate()
                .filter(|(_, &d)| d > 0.0)
                .map(|(i, &d)| Piece { t0: i as f64 / n, t1: (i + 1) as f64 / n, density: d })
                .collect(),
        }
    };
    let measure =
        Measure::new(vec![ray(&gamma1, theta0 + std::f64::consts::FRAC_PI_2), ray(&gamma0, 0.0)], Vec::new())?;
    Ok(OptimalMeasure { measure, gamma1, gamma0, applicability: two_ray_optimum_applies(alpha, theta0) })
}
