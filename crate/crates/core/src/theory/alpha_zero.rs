//! The `α = 0` case, where transport costs only total length.
//!
//! A straight segment of length `ℓ` perpendicular to `w` with density `λ`
//! captures at least `(1 − e^{−λ}) K ℓ` light, where
//! `K = max_{|w|=1} Σ_k η_k |⟨w, n_k⟩|`, while its cost is `c ℓ`. If `K > c`
//! the payoff is unbounded; otherwise sub-additivity of sunlight caps every
//! payoff at zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, golden_section_max};
use crate::sunlight::LightField;

/// Minimum number of directions on the search grid for `w`.
pub const MIN_ANGULAR_GRID: usize = 360;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KResult {
    pub k: f64,
    /// Angle of the maximizing `w`, in `[0, π)` (`w` and `−w` are equivalent).
    pub w_angle: f64,
}

impl KResult {
    pub fn w(&self) -> [f64; 2] {
        [self.w_angle.cos(), self.w_angle.sin()]
    }
}

/// `Σ_k η_k |⟨w, n_k⟩|` for `w` at angle `phi`.
pub fn projection_sum(field: &LightField, phi: f64) -> f64 {
    compensated_sum(field.samples().iter().map(|s| s.weight * (phi - s.theta).cos().abs()))
}

/// Maximize [`projection_sum`] over a grid of `angular_grid` directions, then
/// refine around the best node by golden-section search.
///
/// The objective has kinks wherever `w ⊥ n_k`, but those are local minima;
/// between kinks it is concave, so a bracket of two grid cells is unimodal
/// unless a kink falls inside it. The better of the grid value and the refined
/// value is kept.
pub fn alpha_zero_k(field: &LightField, angular_grid: usize) -> Result<KResult> {
    if angular_grid < MIN_ANGULAR_GRID {
        return Err(Error::Config(format!("angular grid {angular_grid} below {MIN_ANGULAR_GRID}")));
    }
    let step = std::f64::consts::PI / angular_grid as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..angular_grid {
        let v = projection_sum(field, i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let centre = best_i as f64 * step;
    let (phi, v) = golden_section_max(|p| projection_sum(field, p), centre - step, centre + step, 1e-12);
    let (phi, k) = if v > best { (phi, v) } else { (centre, best) };
    Ok(KResult { k, w_angle: phi.rem_euclid(std::f64::consts::PI) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// `K > c`: arbitrarily large payoffs are possible.
    Unbounded,
    /// `K ≤ c`: the best payoff is zero, attained by the zero measure.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaZeroReport {
    pub verdict: Verdict,
    pub k: f64,
    pub c: f64,
    /// `[(1 − e^{−λ}) K − c] ℓ`, the payoff of one straight segment with
    /// density `λ` and length `ℓ` perpendicular to the maximizing `w`.
    pub witness: f64,
    /// `(K − c) ℓ`, an upper bound on the payoff of any measure whose support
    /// has total length `ℓ`; only meaningful for [`Verdict::Zero`].
    pub upper_bound: Option<f64>,
}

pub fn alpha_zero_verdict(k: f64, c: f64, lambda_density: f64, ell: f64) -> Result<AlphaZeroReport> {
    if !(lambda_density > 0.0 && ell > 0.0) {
        return Err(Error::Domain("density and length must be positive".into()));
    }
    if !(k >= 0.0 && c >= 0.0) {
        return Err(Error::Domain(format!("need K ≥ 0 and c ≥ 0, got {k}, {c}")));
    }
    let witness = (-(-lambda_density).exp_m1() * k - c) * ell;
    let verdict = if k > c { Verdict::Unbounded } else { Verdict::Zero };
    let upper_bound = (verdict == Verdict::Zero).then_some((k - c) * ell);
    Ok(AlphaZeroReport { verdict, k, c, witness, upper_bound })
}
