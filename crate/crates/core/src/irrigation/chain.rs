//! Irrigation of a density spread along an arclength-parameterized chain.
//!
//! Densities are piecewise constant on `N` equal cells of `[0, L]`. The tail
//! mass `z(s) = ∫_s^L u` is then piecewise linear and the transport cost
//! `∫ z(s)^α ds` is integrated exactly cell by cell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Point, Segment};
use crate::numeric::CompensatedSum;

/// Density along a straight ray from the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayDensityPlan {
    /// Direction of the ray (radians from the positive horizontal axis).
    pub angle: f64,
    /// Length of the discretized interval `[0, L]`.
    pub length: f64,
    /// Constant density on each of the equal cells.
    pub cells: Vec<f64>,
}

impl RayDensityPlan {
    pub fn new(angle: f64, length: f64, cells: Vec<f64>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("ray length {length} must be positive")));
        }
        if cells.is_empty() {
            return Err(Error::Config("ray plan needs at least one cell".into()));
        }
        if let Some(u) = cells.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
            return Err(Error::Config(format!("invalid ray density {u}")));
        }
        Ok(Self { angle, length, cells })
    }

    pub fn cell_width(&self) -> f64 {
        self.length / self.cells.len() as f64
    }

    /// `z` at the `N + 1` cell boundaries; `z[N] = 0` and `z` is non-increasing.
    pub fn tail_masses(&self) -> Vec<f64> {
        tail_masses(&self.cells, self.cell_width())
    }

    pub fn mass(&self) -> f64 {
        self.tail_masses()[0]
    }

    pub fn point_at(&self, s: f64) -> Point {
        [s * self.angle.cos(), s * self.angle.sin()]
    }

    /// The same density as a measure segment from the origin.
    pub fn to_segment(&self) -> Segment {
        let n = self.cells.len() as f64;
        Segment {
            a: [0.0, 0.0],
            b: self.point_at(self.length),
            pieces: self
                .cells
                .iter()
                .enumerate()
                .filter(|(_, &u)| u > 0.0)
                .map(|(i, &u)| crate::measure::Piece { t0: i as f64 / n, t1: (i + 1) as f64 / n, density: u })
                .collect(),
        }
    }
}

/// Tail masses at cell boundaries for piecewise-constant `cells` of width `h`.
pub fn tail_masses(cells: &[f64], h: f64) -> Vec<f64> {
    let mut z = vec![0.0; cells.len() + 1];
    let mut acc = CompensatedSum::new();
    for i in (0..cells.len()).rev() {
        acc.add(cells[i] * h);
        z[i] = acc.value();
    }
    z
}

/// `∫_0^h w(τ)^p dτ` for `w` linear between the end values `a` and `b ≥ 0`.
///
/// Written as `h·hi^p·(1 − (1 − t)^{p+1}) / ((p + 1)·t)` with `t = (hi − lo)/hi`
/// and evaluated through `expm1`/`ln_1p`, so nearly flat cells lose no digits.
pub fn linear_power_integral(a: f64, b: f64, h: f64, p: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi <= 0.0 {
        return if p == 0.0 {
            h
        } else if p > 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let t = (hi - lo) / hi;
    let base = h * hi.powf(p);
    if t == 0.0 {
        return base;
    }
    let q = p + 1.0;
    let log_rest = (-t).ln_1p();
    let ratio = if q == 0.0 { -log_rest / t } else { -(q * log_rest).exp_m1() / (q * t) };
    base * ratio
}

/// `∫_0^L z(s)^α ds` for piecewise-constant densities on cells of width `h`.
pub fn chain_cost(cells: &[f64], h: f64, alpha: f64) -> f64 {
    let z = tail_masses(cells, h);
    let mut acc = CompensatedSum::new();
    for j in 0..cells.len() {
        if z[j] > 0.0 {
            acc.add(linear_power_integral(z[j], z[j + 1], h, alpha));
        }
    }
    acc.value()
}

/// `c · ∫_0^L z(s)^α ds` for a ray plan.
pub fn ray_cost(plan: &RayDensityPlan, alpha: f64, c: f64) -> Result<f64> {
    super::check_alpha(alpha)?;
    Ok(c * chain_cost(&plan.cells, plan.cell_width(), alpha))
}
