//! Sunlight captured by a measure: `∫ (1 − e^{−Φ(y)}) dy` over the projected
//! density, from one direction or a weighted set of directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::measure::{project, Direction, Measure, ProjectedDensity};
use crate::numeric::{compensated_sum, CompensatedSum};

/// One quadrature node of the light intensity `η` over the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightSample {
    pub theta: f64,
    pub weight: f64,
}

/// Discrete light field: directions with non-negative weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LightSample>", into = "Vec<LightSample>")]
pub struct LightField {
    samples: Vec<LightSample>,
}

impl TryFrom<Vec<LightSample>> for LightField {
    type Error = Error;

    fn try_from(samples: Vec<LightSample>) -> Result<Self> {
        LightField::new(samples)
    }
}

impl From<LightField> for Vec<LightSample> {
    fn from(field: LightField) -> Self {
        field.samples
    }
}

impl LightField {
    pub fn new(samples: Vec<LightSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("light field needs at least one sample".into()));
        }
        if let Some(s) = samples.iter().find(|s| !(s.weight.is_finite() && s.weight >= 0.0) || !s.theta.is_finite()) {
            return Err(Error::Config(format!("invalid light sample {s:?}")));
        }
        Ok(Self { samples })
    }

    pub fn single(n: Direction, weight: f64) -> Result<Self> {
        Self::new(vec![LightSample { theta: n.theta(), weight }])
    }

    /// Equal-weight midpoint nodes for `η ≡ intensity` on the whole circle;
    /// the weights sum to `2π·intensity`.
    pub fn uniform(nodes: usize, intensity: f64) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Config("uniform light field needs nodes > 0".into()));
        }
        let step = std::f64::consts::TAU / nodes as f64;
        Self::new(
            (0..nodes).map(|k| LightSample { theta: (k as f64 + 0.5) * step, weight: intensity * step }).collect(),
        )
    }

    pub fn samples(&self) -> &[LightSample] {
        &self.samples
    }
}

/// Closed-form exposure of a piecewise-constant projected density; atoms capture nothing.
pub fn exposure(pd: &ProjectedDensity) -> f64 {
    let mut acc = CompensatedSum::new();
    for (a, b, v) in pd.intervals() {
        if v > 0.0 {
            acc.add((b - a) * -(-v).exp_m1());
        }
    }
    acc.value()
}

/// Sunlight from the single direction `n`.
pub fn sunlight_single(m: &Measure, n: Direction) -> f64 {
    exposure(&project(m, n))
}

/// Weighted sum of single-direction sunlight over the nodes of `field`.
pub fn sunlight_multi(m: &Measure, field: &LightField, exec: Exec) -> f64 {
    let parts = exec::map_slice(exec, field.samples(), |s| s.weight * sunlight_single(m, Direction::new(s.theta)));
    compensated_sum(parts)
}
