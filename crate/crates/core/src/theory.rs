//! Scalar functions behind the optimality of the two-ray configuration.
//!
//! [`bypass_gain`] measures whether straightening a bent transport path pays
//! off; [`g_ratio`] bounds the angles for which it always does; the bypass
//! difference and remainder quantify the cost saving of inserting a shortcut.
//! The sweeps at the bottom check these inequalities on fixed grids plus a
//! seeded random supplement.

pub mod alpha_zero;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::measure::{dist, Point};

use std::f64::consts::FRAC_PI_2;

/// `λ^α` as `exp(α ln λ)`, with the exact limits at `λ = 0`.
pub fn pow_guarded(lambda: f64, alpha: f64) -> f64 {
    if lambda <= 0.0 {
        if alpha == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if lambda == 1.0 {
        1.0
    } else {
        (alpha * lambda.ln()).exp()
    }
}

/// `F(λ, θa, θb) = 1 − λ^α cos θa + (1 − λ)^α cos(θa + θb)`.
pub fn bypass_gain(lambda: f64, theta_a: f64, theta_b: f64, alpha: f64) -> f64 {
    1.0 - pow_guarded(lambda, alpha) * theta_a.cos() + pow_guarded(1.0 - lambda, alpha) * (theta_a + theta_b).cos()
}

/// Value of [`g_ratio`], flagged when it is a limit at `λ ∈ {0, 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GValue {
    pub value: f64,
    pub endpoint_limit: bool,
}

/// `g(λ) = (λ^{2α} + (1 − λ)^{2α} − 1) / (2 λ^α (1 − λ)^α)` on `[0, 1]`.
///
/// At the endpoints the one-sided limit is returned: 0 for `0 < α < 1`,
/// `−1` for `α = 1` and `1/2` for `α = 0`. In the last two cases `g` is
/// constant on `(0, 1)`.
pub fn g_ratio(lambda: f64, alpha: f64) -> Result<GValue> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda = {lambda} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    if lambda == 0.0 || lambda == 1.0 {
        let value = if alpha == 1.0 {
            -1.0
        } else if alpha == 0.0 {
            0.5
        } else {
            0.0
        };
        return Ok(GValue { value, endpoint_limit: true });
    }
    let a = pow_guarded(lambda, alpha);
    let b = pow_guarded(1.0 - lambda, alpha);
    Ok(GValue { value: (a * a + b * b - 1.0) / (2.0 * a * b), endpoint_limit: false })
}

/// `g(1/2) = 1 − 2^{2α−1}`, the maximum of `g` for `α ≤ 1/2`.
pub fn g_half(alpha: f64) -> f64 {
    1.0 - (2.0 * alpha - 1.0).exp2()
}

/// Whether the two-ray support is known to be optimal at `(α, θ0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Applicability {
    pub applicable: bool,
    /// `cos(π/2 − θ0) = sin θ0`.
    pub lhs: f64,
    /// `1 − 2^{2α−1}`; non-positive for `α ≥ 1/2`.
    pub rhs: f64,
}

/// True when `α ≥ 1/2`, or when `cos(π/2 − θ0) ≥ 1 − 2^{2α−1}`.
pub fn two_ray_optimum_applies(alpha: f64, theta0: f64) -> Applicability {
    let lhs = (FRAC_PI_2 - theta0).cos();
    let rhs = g_half(alpha);
    Applicability { applicable: alpha >= 0.5 || lhs >= rhs, lhs, rhs }
}

/// Local geometry of a single bypass: flux `kappa` continuing to the right,
/// `sigma` branching off to the left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BypassConfig {
    pub kappa: f64,
    pub sigma: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub alpha: f64,
}

impl BypassConfig {
    fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.sigma >= 0.0) {
            return Err(Error::Domain(format!("need kappa > 0 and sigma ≥ 0, got {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    /// `(κ + σ)^α − σ^α cos θa + κ^α cos(θa + θb)`, the slope of the bypass
    /// difference as the bypass shrinks.
    pub fn bracket(&self) -> f64 {
        let a = self.alpha;
        pow_guarded(self.kappa + self.sigma, a) - pow_guarded(self.sigma, a) * self.theta_a.cos()
            + pow_guarded(self.kappa, a) * (self.theta_a + self.theta_b).cos()
    }
}

/// Cost difference `f(ℓa, ℓb)` between the bent path and its bypass:
///
/// `(κ+σ)^α ℓa − σ^α ℓa cos θa + κ^α [ℓb − √(ℓa² + ℓb² − 2 ℓa ℓb cos(θa+θb))]`.
pub fn bypass_difference_f(cfg: &BypassConfig, ell_a: f64, ell_b: f64) -> Result<f64> {
    cfg.validate()?;
    if !(ell_a >= 0.0 && ell_b >= 0.0) {
        return Err(Error::Domain("bypass lengths must be non-negative".into()));
    }
    let a = cfg.alpha;
    let chord2 = ell_a * ell_a + ell_b * ell_b - 2.0 * ell_a * ell_b * (cfg.theta_a + cfg.theta_b).cos();
    Ok(pow_guarded(cfg.kappa + cfg.sigma, a) * ell_a - pow_guarded(cfg.sigma, a) * ell_a * cfg.theta_a.cos()
        + pow_guarded(cfg.kappa, a) * (ell_b - chord2.max(0.0).sqrt()))
}

/// Remainder `S_n` of the multi-pipe bypass estimate.
///
/// `points` holds `P_1, …, P_{n+1}` (the last one is the bypass start `P`),
/// `kappas` the fluxes `κ_1, …, κ_n`:
///
/// `S_n = Σ κ_j^α |P* − P_j| − (Σ κ_j)^α (|P* − P_1| − |P_{n+1} − P_1|) − Σ_j (Σ_{i≤j} κ_i)^α |P_{j+1} − P_j|`.
pub fn bypass_remainder_sn(p_star: Point, points: &[Point], kappas: &[f64], alpha: f64) -> Result<f64> {
    let n = kappas.len();
    if n == 0 || points.len() != n + 1 {
        return Err(Error::Domain(format!("need n ≥ 1 fluxes and n + 1 points, got {n} and {}", points.len())));
    }
    if kappas.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::Domain("fluxes must be positive".into()));
    }
    let total: f64 = kappas.iter().sum();
    let mut direct = 0.0;
    let mut along = 0.0;
    let mut partial = 0.0;
    for j in 0..n {
        direct += pow_guarded(kappas[j], alpha) * dist(p_star, points[j]);
        partial += kappas[j];
        along += pow_guarded(partial, alpha) * dist(points[j + 1], points[j]);
    }
    let shortcut = pow_guarded(total, alpha) * (dist(p_star, points[0]) - dist(points[n], points[0]));
    Ok(direct - shortcut - along)
}

/// Outcome of one positivity sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub name: String,
    pub alpha: f64,
    pub points: usize,
    /// Smallest value seen (largest for upper-bound checks, reported as a margin).
    pub worst: f64,
    /// Arguments of the worst value.
    pub argmin: Vec<f64>,
    pub pass: bool,
}

/// Tolerance used by every non-negativity sweep.
pub const SWEEP_TOL: f64 = 1e-12;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Minimum of `F` over the tensor grid `lambdas × theta_as × theta_bs`.
pub fn min_bypass_gain(alpha: f64, lambdas: &[f64], theta_as: &[f64], theta_bs: &[f64]) -> (f64, [f64; 3]) {
    let pa: Vec<f64> = lambdas.iter().map(|&l| pow_guarded(l, alpha)).collect();
    let pb: Vec<f64> = lambdas.iter().map(|&l| pow_guarded(1.0 - l, alpha)).collect();
    let mut best = (f64::INFINITY, [0.0; 3]);
    for &ta in theta_as {
        let ca = ta.cos();
        let cab: Vec<f64> = theta_bs.iter().map(|&tb| (ta + tb).cos()).collect();
        for (i, &l) in lambdas.iter().enumerate() {
            for (k, &tb) in theta_bs.iter().enumerate() {
                let v = 1.0 - pa[i] * ca + pb[i] * cab[k];
                if v < best.0 {
                    best = (v, [l, ta, tb]);
                }
            }
        }
    }
    best
}

/// `F ≥ 0` on `[0,1] × [0,π/2]²` with `n` points per axis, meant for `α ≥ 1/2`.
pub fn sweep_gain_full(alpha: f64, n: usize) -> SweepRow {
    let (worst, arg) =
        min_bypass_gain(alpha, &linspace(0.0, 1.0, n), &linspace(0.0, FRAC_PI_2, n), &linspace(0.0, FRAC_PI_2, n));
    SweepRow {
        name: "gain_nonnegative".into(),
        alpha,
        points: n * n * n,
        worst,
        argmin: arg.to_vec(),
        pass: worst >= -SWEEP_TOL,
    }
}

/// `F ≥ 0` where `cos θb ≥ 1 − 2^{2α−1}`, meant for `α < 1/2`.
pub fn sweep_gain_restricted(alpha: f64, n: usize) -> SweepRow {
    let tb_max = g_half(alpha).clamp(-1.0, 1.0).acos().min(FRAC_PI_2);
    let (worst, arg) =
        min_bypass_gain(alpha, &linspace(0.0, 1.0, n), &linspace(0.0, FRAC_PI_2, n), &linspace(0.0, tb_max, n));
    SweepRow {
        name: "gain_nonnegative_restricted".into(),
        alpha,
        points: n * n * n,
        worst,
        argmin: arg.to_vec(),
        pass: worst >= -SWEEP_TOL,
    }
}

/// A grid point where `F < 0` outside the angle restriction, re-evaluated
/// directly. `None` if the grid has no such point.
pub fn find_negative_gain(alpha: f64, n: usize) -> Option<([f64; 3], f64)> {
    let bound = g_half(alpha);
    let tb: Vec<f64> = linspace(0.0, FRAC_PI_2, n).into_iter().filter(|t| t.cos() < bound).collect();
    if tb.is_empty() {
        return None;
    }
    let (v, arg) = min_bypass_gain(alpha, &linspace(0.0, 1.0, n), &linspace(0.0, FRAC_PI_2, n), &tb);
    let check = bypass_gain(arg[0], arg[1], arg[2], alpha);
    (v < 0.0 && check < 0.0 && arg[2].cos() < bound).then_some((arg, check))
}

/// `g(λ) ≤ g(1/2)` on `n` interior points `i/(n + 1)`; reports the largest excess.
pub fn sweep_g_bound(alpha: f64, n: usize) -> SweepRow {
    let top = g_half(alpha);
    let mut worst = f64::NEG_INFINITY;
    let mut arg = 0.0;
    for i in 1..=n {
        let l = i as f64 / (n + 1) as f64;
        let v = g_ratio(l, alpha).expect("interior lambda").value - top;
        if v > worst {
            worst = v;
            arg = l;
        }
    }
    SweepRow { name: "g_below_half_value".into(), alpha, points: n, worst, argmin: vec![arg], pass: worst <= SWEEP_TOL }
}

/// Draw an admissible bypass configuration: `P_2, …, P_n` ordered on the
/// segment from `P_1` to `P = P_{n+1}`, with `|P − P_1| ≤ |P* − P_1|`.
pub fn random_sn_config<R: Rng>(rng: &mut R, n: usize) -> (Point, Vec<Point>, Vec<f64>) {
    let p_star = [rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0)];
    let p1 = [rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0)];
    let reach = dist(p_star, p1) * rng.gen_range(0.0..=1.0);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let p = [p1[0] + reach * phi.cos(), p1[1] + reach * phi.sin()];
    let mut ts: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.gen_range(0.0..1.0)).collect();
    ts.sort_by(f64::total_cmp);
    let mut points = vec![p1];
    points.extend(ts.iter().map(|&t| [p1[0] + t * (p[0] - p1[0]), p1[1] + t * (p[1] - p1[1])]));
    points.push(p);
    let kappas = (0..n).map(|_| rng.gen_range(0.01..2.0)).collect();
    (p_star, points, kappas)
}

/// `S_n ≥ 0` on `samples` random admissible configurations with `n ≤ max_n`.
pub fn sweep_sn(samples: usize, max_n: usize, seed: u64) -> SweepRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut arg = vec![];
    for _ in 0..samples {
        let n = rng.gen_range(1..=max_n);
        let alpha = rng.gen_range(0.05..=1.0);
        let (ps, pts, ks) = random_sn_config(&mut rng, n);
        let v = bypass_remainder_sn(ps, &pts, &ks, alpha).expect("admissible configuration");
        if v < worst {
            worst = v;
            arg = vec![n as f64, alpha];
        }
    }
    SweepRow {
        name: "remainder_nonnegative".into(),
        alpha: f64::NAN,
        points: samples,
        worst,
        argmin: arg,
        pass: worst >= -SWEEP_TOL,
    }
}

/// Whenever the small-bypass bracket exceeds `delta`, the difference `f(εℓ, ℓ)`
/// is positive for `ε` below `bracket/κ^α`. Reports the smallest `f/(εℓ)`.
pub fn sweep_bracket_link(samples: usize, delta: f64, seed: u64) -> SweepRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut arg = vec![];
    let mut used = 0;
    for _ in 0..samples {
        let cfg = BypassConfig {
            kappa: rng.gen_range(0.01..2.0),
            sigma: rng.gen_range(0.0..2.0),
            theta_a: rng.gen_range(0.0..FRAC_PI_2),
            theta_b: rng.gen_range(0.0..FRAC_PI_2),
            alpha: rng.gen_range(0.05..=1.0),
        };
        let b = cfg.bracket();
        if b <= delta {
            continue;
        }
        used += 1;
        let ell = rng.gen_range(0.1..3.0);
        let eps0 = (b / pow_guarded(cfg.kappa, cfg.alpha)).min(0.5);
        for eps in [eps0, 0.1 * eps0, 0.01 * eps0] {
            let v = bypass_difference_f(&cfg, eps * ell, ell).expect("valid config") / (eps * ell);
            if v < worst {
                worst = v;
                arg = vec![cfg.kappa, cfg.sigma, cfg.theta_a, cfg.theta_b, cfg.alpha, eps];
            }
        }
    }
    SweepRow {
        name: "bracket_implies_saving".into(),
        alpha: f64::NAN,
        points: used,
        worst,
        argmin: arg,
        pass: worst > 0.0,
    }
}

/// Grid sizes and seeds for [`run_sweeps`].
#[derive(Clone, Copy, Debug)]
pub struct SweepPlan {
    pub gain_grid: usize,
    pub g_grid: usize,
    pub sn_samples: usize,
    pub sn_max_n: usize,
    pub link_samples: usize,
    pub seed: u64,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            gain_grid: 200,
            g_grid: 100_000,
            sn_samples: 10_000,
            sn_max_n: 6,
            link_samples: 10_000,
            seed: 20_240_601,
        }
    }
}

/// `α` values checked on the full grid.
pub const ALPHAS_HIGH: [f64; 5] = [0.5, 0.6, 0.75, 0.9, 1.0];
/// `α` values checked on the restricted grid and for the bound on `g`.
pub const ALPHAS_LOW: [f64; 8] = [0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45];

/// Every positivity check, in a fixed order.
pub fn run_sweeps(plan: &SweepPlan, exec: Exec) -> Vec<SweepRow> {
    let mut jobs: Vec<(u8, f64)> = ALPHAS_HIGH.iter().map(|&a| (0, a)).collect();
    jobs.extend(ALPHAS_LOW.iter().map(|&a| (1, a)));
    jobs.extend(ALPHAS_LOW.iter().map(|&a| (2, a)));
    jobs.push((3, 0.2));
    jobs.push((4, 0.0));
    jobs.push((5, 0.0));
    exec::map_slice(exec, &jobs, |&(kind, a)| match kind {
        0 => sweep_gain_full(a, plan.gain_grid),
        1 => sweep_gain_restricted(a, plan.gain_grid),
        2 => sweep_g_bound(a, plan.g_grid),
        3 => match find_negative_gain(a, plan.gain_grid) {
            Some((arg, v)) => SweepRow {
                name: "gain_negative_outside_restriction".into(),
                alpha: a,
                points: plan.gain_grid.pow(3),
                worst: v,
                argmin: arg.to_vec(),
                pass: true,
            },
            None => SweepRow {
                name: "gain_negative_outside_restriction".into(),
                alpha: a,
                points: plan.gain_grid.pow(3),
                worst: f64::NAN,
                argmin: vec![],
                pass: false,
            },
        },
        4 => sweep_sn(plan.sn_samples, plan.sn_max_n, plan.seed),
        _ => sweep_bracket_link(plan.link_samples, 1e-3, plan.seed ^ 0x5eed),
    })
}
