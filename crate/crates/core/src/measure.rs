//! Planar leaf measures and their projection perpendicular to a light direction.
//!
//! A [`Measure`] is a finite union of straight segments carrying piecewise
//! constant linear densities, plus point atoms. Projecting onto the line
//! `E⊥ = span(n⊥)` gives an exactly piecewise-constant density, so the
//! sunlight integral downstream needs no quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

pub type Point = [f64; 2];

/// Tolerance below which a point counts as lying in the upper half-plane.
const HALF_PLANE_SLACK: f64 = 1e-12;
/// Breakpoints closer than this fraction of the support diameter are merged.
pub const MERGE_REL_TOL: f64 = 1e-12;

/// Light direction `n = (cos θ, sin θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    theta: f64,
}

impl Direction {
    pub fn new(theta: f64) -> Self {
        Self { theta }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn unit(&self) -> Point {
        [self.theta.cos(), self.theta.sin()]
    }

    /// `n⊥ = (−sin θ, cos θ)`, the coordinate axis of the projection line.
    pub fn normal(&self) -> Point {
        [-self.theta.sin(), self.theta.cos()]
    }

    /// Single-sun problems require `0 < θ ≤ π/2`.
    pub fn is_single_sun(&self) -> bool {
        self.theta > 0.0 && self.theta <= std::f64::consts::FRAC_PI_2 + 1e-15
    }

    /// Coordinate of `p` along `n⊥`.
    pub fn project_point(&self, p: Point) -> f64 {
        let [nx, ny] = self.normal();
        nx * p[0] + ny * p[1]
    }
}

/// Constant density on the parameter sub-interval `[t0, t1] ⊂ [0, 1]` of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub pieces: Vec<Piece>,
}

impl Segment {
    pub fn uniform(a: Point, b: Point, density: f64) -> Self {
        Self { a, b, pieces: vec![Piece { t0: 0.0, t1: 1.0, density }] }
    }

    pub fn length(&self) -> f64 {
        dist(self.a, self.b)
    }

    pub fn mass(&self) -> f64 {
        let len = self.length();
        compensated_iter(self.pieces.iter().map(|p| p.density * (p.t1 - p.t0) * len))
    }

    pub fn translated(&self, shift: Point) -> Self {
        Self {
            a: [self.a[0] + shift[0], self.a[1] + shift[1]],
            b: [self.b[0] + shift[0], self.b[1] + shift[1]],
            pieces: self.pieces.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        for p in [self.a, self.b] {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidMeasure("non-finite segment endpoint".into()));
            }
            if p[1] < -HALF_PLANE_SLACK {
                return Err(Error::InvalidMeasure(format!(
                    "segment endpoint ({}, {}) lies below the half-plane",
                    p[0], p[1]
                )));
            }
        }
        if !(self.length() > 0.0) {
            return Err(Error::InvalidMeasure("segment has zero length".into()));
        }
        let mut last = 0.0;
        for p in &self.pieces {
            if !(p.density.is_finite() && p.density >= 0.0) {
                return Err(Error::InvalidMeasure(format!("invalid density {}", p.density)));
            }
            if !(0.0 <= p.t0 && p.t0 < p.t1 && p.t1 <= 1.0) {
                return Err(Error::InvalidMeasure(format!(
                    "piece [{}, {}] is not a sub-interval of [0, 1]",
                    p.t0, p.t1
                )));
            }
            if p.t0 < last - 1e-15 {
                return Err(Error::InvalidMeasure("pieces overlap or are unsorted".into()));
            }
            last = p.t1;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub pos: Point,
    pub mass: f64,
}

/// Finite positive measure on the closed upper half-plane.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct Measure {
    segments: Vec<Segment>,
    #[serde(default)]
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    #[serde(default)]
    segments: Vec<Segment>,
    #[serde(default)]
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for Measure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        Measure::new(raw.segments, raw.atoms)
    }
}

impl Measure {
    pub fn new(segments: Vec<Segment>, atoms: Vec<Atom>) -> Result<Self> {
        for s in &segments {
            s.validate()?;
        }
        for a in &atoms {
            if !(a.mass.is_finite() && a.mass >= 0.0) {
                return Err(Error::InvalidMeasure(format!("invalid atom mass {}", a.mass)));
            }
            if !(a.pos[0].is_finite() && a.pos[1].is_finite()) || a.pos[1] < -HALF_PLANE_SLACK {
                return Err(Error::InvalidMeasure("atom outside the upper half-plane".into()));
            }
        }
        Ok(Self { segments, atoms })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for s in &self.segments {
            acc.add(s.mass());
        }
        for a in &self.atoms {
            acc.add(a.mass);
        }
        acc.value()
    }

    /// Union of two measures (sum of the underlying measures).
    pub fn union(&self, other: &Measure) -> Measure {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().copied());
        Measure { segments, atoms }
    }

    /// Diagonal of the bounding box of the support (0 for an empty measure).
    pub fn support_diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let pts = self.segments.iter().flat_map(|s| [s.a, s.b]).chain(self.atoms.iter().map(|a| a.pos));
        let mut any = false;
        for p in pts {
            any = true;
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if any {
            ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
        } else {
            0.0
        }
    }
}

/// Piecewise-constant projected density plus its singular (atomic) part.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ProjectedDensity {
    /// Strictly increasing coordinates on `E⊥`; `values[i]` lives on
    /// `[breakpoints[i], breakpoints[i + 1]]`.
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    /// `(y, mass)` pairs sorted by `y`.
    pub atoms: Vec<(f64, f64)>,
}

impl ProjectedDensity {
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.breakpoints[i], self.breakpoints[i + 1], v))
    }

    pub fn absolutely_continuous_mass(&self) -> f64 {
        compensated_iter(self.intervals().map(|(a, b, v)| (b - a) * v))
    }

    pub fn mass(&self) -> f64 {
        self.absolutely_continuous_mass() + compensated_iter(self.atoms.iter().map(|a| a.1))
    }

    /// Lebesgue measure of `{Φ > 0}`.
    pub fn support_length(&self) -> f64 {
        compensated_iter(self.intervals().filter(|i| i.2 > 0.0).map(|(a, b, _)| b - a))
    }

    /// Density at `y` (right-continuous; zero outside the breakpoints).
    pub fn value_at(&self, y: f64) -> f64 {
        if self.breakpoints.len() < 2 || y < self.breakpoints[0] {
            return 0.0;
        }
        let k = self.breakpoints.partition_point(|&b| b <= y);
        if k == 0 || k >= self.breakpoints.len() {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    /// Absolutely continuous mass on `(−∞, y]`.
    pub fn cumulative(&self, y: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for (a, b, v) in self.intervals() {
            if a >= y {
                break;
            }
            acc.add(v * (b.min(y) - a));
        }
        acc.value()
    }
}

fn compensated_iter<I: Iterator<Item = f64>>(it: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in it {
        acc.add(v);
    }
    acc.value()
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Sort `coords` and collapse runs closer than `tol` onto their first element.
pub(crate) fn merge_breakpoints(mut coords: Vec<f64>, tol: f64) -> Vec<f64> {
    coords.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(coords.len());
    for c in coords {
        match out.last() {
            Some(&last) if c - last <= tol => {}
            _ => out.push(c),
        }
    }
    out
}

/// Index of the merged breakpoint representing `y`.
pub(crate) fn snap(breaks: &[f64], y: f64, tol: f64) -> usize {
    let k = breaks.partition_point(|&b| b < y - tol);
    debug_assert!(k < breaks.len() && (breaks[k] - y).abs() <= 2.0 * tol + 1e-300);
    k.min(breaks.len() - 1)
}

/// Push-forward of `m` onto `E⊥`, keeping the absolutely continuous part as a
/// piecewise-constant density and routing everything else to atoms.
///
/// A segment whose projection is shorter than the merge tolerance (parallel to
/// the light) contributes one atom carrying its whole mass.
pub fn project(m: &Measure, n: Direction) -> ProjectedDensity {
    let tol = MERGE_REL_TOL * m.support_diameter().max(1.0);
    let mut intervals: Vec<(f64, f64, f64)> = Vec::new();
    let mut atoms: Vec<(f64, f64)> = Vec::new();

    for seg in m.segments() {
        let ya = n.project_point(seg.a);
        let yb = n.project_point(seg.b);
        let span = yb - ya;
        let len = seg.length();
        if span.abs() <= tol {
            let mass = seg.mass();
            if mass > 0.0 {
                atoms.push((0.5 * (ya + yb), mass));
            }
            continue;
        }
        let jac = span.abs() / len;
        for p in &seg.pieces {
            if p.density <= 0.0 {
                continue;
            }
            let y0 = ya + p.t0 * span;
            let y1 = ya + p.t1 * span;
            let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
            if hi - lo <= tol {
                atoms.push((0.5 * (lo + hi), p.density * (p.t1 - p.t0) * len));
            } else {
                intervals.push((lo, hi, p.density / jac));
            }
        }
    }
    for a in m.atoms() {
        if a.mass > 0.0 {
            atoms.push((n.project_point(a.pos), a.mass));
        }
    }

    ProjectedDensity { atoms: merge_atoms(atoms, tol), ..sweep_intervals(&intervals, tol) }
}

/// Sum overlapping constant-density intervals into one piecewise-constant density.
fn sweep_intervals(intervals: &[(f64, f64, f64)], tol: f64) -> ProjectedDensity {
    if intervals.is_empty() {
        return ProjectedDensity::default();
    }
    let breaks = merge_breakpoints(intervals.iter().flat_map(|&(a, b, _)| [a, b]).collect(), tol);
    let nb = breaks.len();
    let mut delta = vec![CompensatedSum::new(); nb];
    let mut count = vec![0i64; nb];
    for &(a, b, v) in intervals {
        let i = snap(&breaks, a, tol);
        let j = snap(&breaks, b, tol);
        if j <= i {
            continue;
        }
        delta[i].add(v);
        delta[j].add(-v);
        count[i] += 1;
        count[j] -= 1;
    }
    let mut values = Vec::with_capacity(nb.saturating_sub(1));
    let mut running = CompensatedSum::new();
    let mut active = 0i64;
    for k in 0..nb - 1 {
        running.add(delta[k].value());
        active += count[k];
        if active == 0 {
            running = CompensatedSum::new();
        }
        values.push(running.value().max(0.0));
    }
    ProjectedDensity { breakpoints: breaks, values, atoms: Vec::new() }
}

fn merge_atoms(mut atoms: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (y, mass) in atoms {
        match out.last_mut() {
            Some(last) if y - last.0 <= tol => last.1 += mass,
            _ => out.push((y, mass)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn ray(angle: f64, len: f64) -> Point {
        [len * angle.cos(), len * angle.sin()]
    }

    #[test]
    fn segment_perpendicular_to_light_keeps_its_density() {
        let theta0 = FRAC_PI_4;
        let seg = Segment::uniform([0.0, 0.0], ray(theta0 + FRAC_PI_2, 1.5), 0.8);
        let pd = project(&Measure::new(vec![seg], vec![]).unwrap(), Direction::new(theta0));
        assert_eq!(pd.values.len(), 1);
        assert_relative_eq!(pd.values[0], 0.8, max_relative = 1e-14);
        assert_relative_eq!(pd.breakpoints[1] - pd.breakpoints[0], 1.5, max_relative = 1e-14);
    }

    #[test]
    fn horizontal_segment_is_compressed_by_sin_theta() {
        let theta0 = FRAC_PI_6;
        let seg = Segment::uniform([0.0, 0.0], [2.0, 0.0], 1.0);
        let pd = project(&Measure::new(vec![seg], vec![]).unwrap(), Direction::new(theta0));
        assert_relative_eq!(pd.breakpoints[1] - pd.breakpoints[0], 2.0 * 0.5, max_relative = 1e-14);
        assert_relative_eq!(pd.values[0], 1.0 / 0.5, max_relative = 1e-14);
    }

    #[test]
    fn atom_projects_to_atom() {
        let m = Measure::new(vec![], vec![Atom { pos: [0.3, 0.7], mass: 1.0 }]).unwrap();
        let pd = project(&m, Direction::new(1.1));
        assert!(pd.values.is_empty());
        assert_eq!(pd.atoms.len(), 1);
        assert_eq!(pd.atoms[0].1, 1.0);
    }

    #[test]
    fn overlapping_segments_merge() {
        // θ0 = π/2: light from above, E⊥ is the horizontal axis with y = −x.
        let n = Direction::new(FRAC_PI_2);
        let s1 = Segment::uniform([0.0, 0.0], [-1.0, 0.0], 1.0);
        let s2 = Segment::uniform([-0.5, 0.0], [-1.5, 0.0], 1.0);
        let pd = project(&Measure::new(vec![s1, s2], vec![]).unwrap(), n);
        assert_eq!(pd.values.len(), 3);
        let expect = [(0.0, 0.5, 1.0), (0.5, 1.0, 2.0), (1.0, 1.5, 1.0)];
        for ((a, b, v), (ea, eb, ev)) in pd.intervals().zip(expect) {
            assert!((a - ea).abs() < 1e-14 && (b - eb).abs() < 1e-14);
            assert_eq!(v, ev);
        }
    }

    #[test]
    fn segment_parallel_to_light_becomes_an_atom() {
        let n = Direction::new(FRAC_PI_4);
        let seg = Segment::uniform([0.0, 0.0], ray(FRAC_PI_4, 2.0), 0.25);
        let pd = project(&Measure::new(vec![seg], vec![]).unwrap(), n);
        assert!(pd.values.iter().all(|&v| v == 0.0));
        assert_eq!(pd.atoms.len(), 1);
        assert_relative_eq!(pd.atoms[0].1, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn total_mass_examples() {
        assert_eq!(Measure::empty().total_mass(), 0.0);
        let s = Segment::uniform([0.0, 0.0], [2.0, 0.0], 0.5);
        assert_eq!(Measure::new(vec![s.clone()], vec![]).unwrap().total_mass(), 1.0);
        let s1 = Segment::uniform([0.0, 0.0], [1.0, 0.0], 1.0);
        let m = Measure::new(vec![s1], vec![Atom { pos: [0.0, 1.0], mass: 0.25 }]).unwrap();
        assert_eq!(m.total_mass(), 1.25);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let below = Segment::uniform([0.0, -1.0], [1.0, 0.0], 1.0);
        assert!(Measure::new(vec![below], vec![]).is_err());
        let degenerate = Segment::uniform([1.0, 1.0], [1.0, 1.0], 1.0);
        assert!(Measure::new(vec![degenerate], vec![]).is_err());
        let negative = Segment::uniform([0.0, 0.0], [1.0, 0.0], -1.0);
        assert!(Measure::new(vec![negative], vec![]).is_err());
        let overlap = Segment {
            a: [0.0, 0.0],
            b: [1.0, 0.0],
            pieces: vec![Piece { t0: 0.0, t1: 0.6, density: 1.0 }, Piece { t0: 0.5, t1: 1.0, density: 1.0 }],
        };
        assert!(Measure::new(vec![overlap], vec![]).is_err());
        assert!(Measure::new(vec![], vec![Atom { pos: [0.0, 0.0], mass: -1.0 }]).is_err());
    }

    #[test]
    fn json_round_trip_uses_documented_field_names() {
        let text = r#"{"segments":[{"a":[0,0],"b":[1,1],"pieces":[{"t0":0,"t1":0.5,"density":2}]}],
                       "atoms":[{"pos":[0.5,0.5],"mass":0.1}]}"#;
        let m: Measure = serde_json::from_str(text).unwrap();
        assert_relative_eq!(m.total_mass(), 2.0 * 0.5 * 2f64.sqrt() + 0.1, max_relative = 1e-14);
        let back: Measure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"segments":[{"a":[0,-3],"b":[1,1],"pieces":[]}]}"#;
        assert!(serde_json::from_str::<Measure>(bad).is_err());
    }
}
