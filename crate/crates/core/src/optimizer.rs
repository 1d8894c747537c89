//! Numerical maximization of `S^n(μ) − c·I^α(μ)` over a fan of rays from the
//! origin, each carrying a piecewise-constant density.
//!
//! Rays meet only at the origin, so the irrigation cost splits into one chain
//! cost per ray. Sunlight does not split: rays on the same side of the light
//! direction overlap after projection and shade each other. The optimizer keeps
//! the projected density on the common refinement of all projected cell
//! boundaries, which makes the sunlight change of a single-cell update exact
//! and cheap.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::{solve_ray, CellRule};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Exec};
use crate::irrigation::chain::{chain_cost, linear_power_integral, tail_masses, RayDensityPlan};
use crate::irrigation::{check_monotone_structure, IrrigationTree};
use crate::measure::{merge_breakpoints, snap, Direction, Measure, Segment};
use crate::numeric::{gauss_legendre_10, CompensatedSum};
use crate::sunlight::sunlight_single;

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 5, 8];
pub const DEFAULT_CELLS: usize = 256;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_PASSES: usize = 100_000;

/// One ray of the fan and its density grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayGrid {
    /// Angle in `[0, π]`, radians.
    pub angle: f64,
    /// Length `L` of the discretized interval.
    pub length: f64,
    /// Number `N` of equal cells.
    pub cells: usize,
}

impl RayGrid {
    pub fn cell_width(&self) -> f64 {
        self.length / self.cells as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayFamilyConfig {
    pub alpha: f64,
    pub c: f64,
    pub theta0: f64,
    pub rays: Vec<RayGrid>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// A run stops once a full pass improves the payoff by less than this.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_max_passes() -> usize {
    DEFAULT_MAX_PASSES
}

impl RayFamilyConfig {
    /// `2·c^{−1/α}`, twice the natural length scale of an optimal branch.
    pub fn default_length(alpha: f64, c: f64) -> f64 {
        2.0 * c.powf(-1.0 / alpha)
    }

    /// Rays at the given angles with the default grid (`N = 256`, `L = 2c^{−1/α}`).
    pub fn fan(alpha: f64, c: f64, theta0: f64, angles: &[f64]) -> Result<Self> {
        let length = Self::default_length(alpha, c);
        let cfg = Self {
            alpha,
            c,
            theta0,
            rays: angles.iter().map(|&angle| RayGrid { angle, length, cells: DEFAULT_CELLS }).collect(),
            seeds: default_seeds(),
            tolerance: DEFAULT_TOLERANCE,
            max_passes: DEFAULT_MAX_PASSES,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `m` rays at angles `kπ/m`, `k = 0..m`.
    pub fn even_fan(alpha: f64, c: f64, theta0: f64, m: usize) -> Result<Self> {
        let angles: Vec<f64> = (0..m).map(|k| k as f64 * PI / m as f64).collect();
        Self::fan(alpha, c, theta0, &angles)
    }

    /// The two rays predicted to carry the optimum: `θ0 + π/2` and `0`.
    pub fn predicted_pair(alpha: f64, c: f64, theta0: f64) -> Result<Self> {
        Self::fan(alpha, c, theta0, &[theta0 + FRAC_PI_2, 0.0])
    }

    pub fn with_cells(mut self, cells: usize) -> Self {
        for r in &mut self.rays {
            r.cells = cells;
        }
        self
    }

    pub fn with_seeds(mut self, seeds: &[u64]) -> Self {
        self.seeds = seeds.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c = {} must be positive", self.c)));
        }
        if !(0.0..=PI).contains(&self.theta0) {
            return Err(Error::Config(format!("theta0 = {} must lie in [0, π]", self.theta0)));
        }
        if self.rays.is_empty() {
            return Err(Error::Config("the family needs at least one ray".into()));
        }
        for r in &self.rays {
            if !(-1e-12..=PI + 1e-12).contains(&r.angle) {
                return Err(Error::Config(format!("ray angle {} outside [0, π]", r.angle)));
            }
            if !(r.length > 0.0 && r.length.is_finite()) || r.cells == 0 {
                return Err(Error::Config(format!("bad grid for ray at {}: L={}, N={}", r.angle, r.length, r.cells)));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.tolerance > 0.0) || self.max_passes == 0 {
            return Err(Error::Config("tolerance and pass limit must be positive".into()));
        }
        Ok(())
    }

    /// Indices of the rays closest in angle to `0` and to `θ0 + π/2`.
    pub fn predicted_rays(&self) -> [usize; 2] {
        let nearest = |target: f64| {
            let mut best = 0;
            for (i, r) in self.rays.iter().enumerate() {
                if (r.angle - target).abs() < (self.rays[best].angle - target).abs() {
                    best = i;
                }
            }
            best
        };
        [nearest(0.0), nearest(self.theta0 + FRAC_PI_2)]
    }

    fn check_densities(&self, densities: &[Vec<f64>]) -> Result<()> {
        if densities.len() != self.rays.len() {
            return Err(Error::Config(format!("{} density vectors for {} rays", densities.len(), self.rays.len())));
        }
        for (r, d) in self.rays.iter().zip(densities) {
            if d.len() != r.cells {
                return Err(Error::Config(format!("ray at {} has {} cells, got {} values", r.angle, r.cells, d.len())));
            }
            if let Some(u) = d.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
                return Err(Error::InvalidMeasure(format!("density {u} on ray at {}", r.angle)));
            }
        }
        Ok(())
    }

    /// The union measure of all rays.
    pub fn measure(&self, densities: &[Vec<f64>]) -> Result<Measure> {
        self.check_densities(densities)?;
        let segments = self
            .rays
            .iter()
            .zip(densities)
            .map(|(r, d)| Ok(RayDensityPlan::new(r.angle, r.length, d.clone())?.to_segment()))
            .collect::<Result<Vec<Segment>>>()?;
        Measure::new(segments, Vec::new())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffReport {
    pub sunlight: f64,
    pub cost: f64,
    pub net: f64,
    pub ray_angles: Vec<f64>,
    pub ray_masses: Vec<f64>,
    pub total_mass: f64,
    /// Rays nearest to the predicted optimal directions `0` and `θ0 + π/2`.
    pub predicted_rays: [usize; 2],
    /// Share of the total mass carried by the other rays.
    pub off_prediction_fraction: f64,
    /// Every ray with mass climbs in the light direction.
    pub monotone: bool,
}

pub fn evaluate_payoff(cfg: &RayFamilyConfig, densities: &[Vec<f64>]) -> Result<PayoffReport> {
    cfg.validate()?;
    let measure = cfg.measure(densities)?;
    let sunlight = sunlight_single(&measure, Direction::new(cfg.theta0));
    let mut cost = CompensatedSum::new();
    let mut ray_masses = Vec::with_capacity(cfg.rays.len());
    for (r, d) in cfg.rays.iter().zip(densities) {
        let h = r.cell_width();
        cost.add(cfg.c * chain_cost(d, h, cfg.alpha));
        ray_masses.push(tail_masses(d, h)[0]);
    }
    let cost = cost.value();
    let total_mass = ray_masses.iter().sum::<f64>();
    let predicted_rays = cfg.predicted_rays();
    let on: f64 = if predicted_rays[0] == predicted_rays[1] {
        ray_masses[predicted_rays[0]]
    } else {
        ray_masses[predicted_rays[0]] + ray_masses[predicted_rays[1]]
    };
    let off_prediction_fraction = if total_mass > 0.0 { ((total_mass - on) / total_mass).max(0.0) } else { 0.0 };

    let mut nodes = vec![[0.0, 0.0]];
    let mut edges = Vec::new();
    let mut sinks = BTreeMap::new();
    for (r, &m) in cfg.rays.iter().zip(&ray_masses) {
        if m > 0.0 {
            nodes.push([r.length * r.angle.cos(), r.length * r.angle.sin()]);
            edges.push([0, nodes.len() - 1]);
            sinks.insert(nodes.len() - 1, m);
        }
    }
    let tree = IrrigationTree::new(nodes, &edges, sinks)?;
    let monotone = check_monotone_structure(&tree, cfg.theta0).pass;

    Ok(PayoffReport {
        sunlight,
        cost,
        net: sunlight - cost,
        ray_angles: cfg.rays.iter().map(|r| r.angle).collect(),
        ray_masses,
        total_mass,
        predicted_rays,
        off_prediction_fraction,
        monotone,
    })
}

/// Outcome of a single start.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub payoff: f64,
    pub passes: usize,
    pub converged: bool,
    /// Passes whose recomputed payoff fell below the previous one.
    pub ascent_violations: usize,
    /// Accepted moves of a whole ray profile onto an angular neighbour.
    pub transfers: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Maximized {
    pub densities: Vec<Vec<f64>>,
    pub report: PayoffReport,
    pub best_seed: u64,
    pub converged: bool,
    pub runs: Vec<SeedRun>,
    /// Largest payoff gap between the best start and any other start.
    pub payoff_dispersion: f64,
    /// Largest sup-norm density gap between the best start and any other.
    pub density_dispersion: f64,
    /// Payoff after every pass of the best start, starting from the initial guess.
    pub history: Vec<f64>,
}

pub fn maximize_over_family(cfg: &RayFamilyConfig, exec: Exec) -> Result<Maximized> {
    cfg.validate()?;
    let outcomes = map_slice(exec, &cfg.seeds, |&seed| {
        let mut engine = Engine::new(cfg, initial_guess(cfg, seed));
        let (run, history) = engine.run(cfg.tolerance, cfg.max_passes);
        transfer_between_neighbours(cfg, SeedRun { seed, ..run }, engine.densities(), history)
    });

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.0.payoff > outcomes[best].0.payoff {
            best = i;
        }
    }
    let (best_run, best_dens, history) = outcomes[best].clone();
    let mut payoff_dispersion: f64 = 0.0;
    let mut density_dispersion: f64 = 0.0;
    for o in &outcomes {
        payoff_dispersion = payoff_dispersion.max(best_run.payoff - o.0.payoff);
        for (a, b) in o.1.iter().zip(&best_dens) {
            for (x, y) in a.iter().zip(b) {
                density_dispersion = density_dispersion.max((x - y).abs());
            }
        }
    }
    let report = evaluate_payoff(cfg, &best_dens)?;
    Ok(Maximized {
        densities: best_dens,
        report,
        best_seed: best_run.seed,
        converged: outcomes.iter().all(|o| o.0.converged),
        runs: outcomes.into_iter().map(|o| o.0).collect(),
        payoff_dispersion,
        density_dispersion,
        history,
    })
}

/// Coordinate ascent cannot move mass from one ray to another, so a start can
/// settle with a profile on the wrong ray of the fan. Try shifting each loaded
/// profile onto the neighbouring ray on either side, re-run the ascent, and keep
/// the result only when it ends strictly higher. `history` only grows by
/// accepted payoffs, so it stays monotone.
fn transfer_between_neighbours(
    cfg: &RayFamilyConfig,
    mut run: SeedRun,
    mut dens: Vec<Vec<f64>>,
    mut history: Vec<f64>,
) -> (SeedRun, Vec<Vec<f64>>, Vec<f64>) {
    let mut order: Vec<usize> = (0..cfg.rays.len()).collect();
    order.sort_by(|&a, &b| cfg.rays[a].angle.total_cmp(&cfg.rays[b].angle));
    let same_grid = |a: &RayGrid, b: &RayGrid| a.cells == b.cells && a.length == b.length;

    let mut rounds = 0;
    'search: while run.converged && rounds < 4 * cfg.rays.len() {
        rounds += 1;
        for (k, &from) in order.iter().enumerate() {
            if dens[from].iter().all(|&u| u == 0.0) {
                continue;
            }
            let neighbours = [k.checked_sub(1), Some(k + 1).filter(|&n| n < order.len())];
            for to in neighbours.into_iter().flatten().map(|n| order[n]) {
                if !same_grid(&cfg.rays[from], &cfg.rays[to]) {
                    continue;
                }
                let mut trial = dens.clone();
                let moved = std::mem::take(&mut trial[from]);
                trial[from] = vec![0.0; moved.len()];
                for (t, m) in trial[to].iter_mut().zip(moved) {
                    *t += m;
                }
                let mut engine = Engine::new(cfg, trial);
                let (tried, _) = engine.run(cfg.tolerance, cfg.max_passes);
                run.passes += tried.passes;
                if tried.converged && tried.payoff > run.payoff + cfg.tolerance {
                    run.payoff = tried.payoff;
                    run.ascent_violations += tried.ascent_violations;
                    run.transfers += 1;
                    history.push(tried.payoff);
                    dens = engine.densities();
                    continue 'search;
                }
            }
        }
        break;
    }
    (run, dens, history)
}

/// Random positive densities of order one, fixed by `seed`.
pub fn initial_guess(cfg: &RayFamilyConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cfg.rays
        .iter()
        .map(|r| {
            let scale = rng.gen_range(0.5..1.5);
            (0..r.cells).map(|_| scale * rng.gen_range(0.25..1.75)).collect()
        })
        .collect()
}

struct RayState {
    h: f64,
    /// `|sin(φ − θ0)|`; zero for a ray parallel to the light.
    jac: f64,
    u: Vec<f64>,
    z: Vec<f64>,
    /// Elementary projected intervals covered by each cell.
    span: Vec<(usize, usize)>,
}

/// Coordinate-ascent state for one start.
struct Engine {
    alpha: f64,
    c: f64,
    rays: Vec<RayState>,
    elen: Vec<f64>,
    /// Projected density on each elementary interval.
    phi: Vec<f64>,
    /// Typical density, used to bound proposals.
    scale: f64,
}

impl Engine {
    fn new(cfg: &RayFamilyConfig, init: Vec<Vec<f64>>) -> Self {
        let signed: Vec<f64> = cfg.rays.iter().map(|r| (r.angle - cfg.theta0).sin()).collect();
        let diam = cfg.rays.iter().map(|r| r.length).fold(1.0, f64::max);
        let tol = 1e-12 * diam;

        let mut coords = Vec::new();
        for (r, &sj) in cfg.rays.iter().zip(&signed) {
            if sj.abs() * r.length > tol {
                coords.extend((0..=r.cells).map(|k| k as f64 * r.cell_width() * sj));
            }
        }
        let breaks = merge_breakpoints(coords, tol);
        let elen: Vec<f64> = breaks.windows(2).map(|w| w[1] - w[0]).collect();

        let rays = cfg
            .rays
            .iter()
            .zip(&signed)
            .zip(init)
            .map(|((r, &sj), u)| {
                let h = r.cell_width();
                let jac = if sj.abs() * r.length > tol { sj.abs() } else { 0.0 };
                let span = (0..r.cells)
                    .map(|i| {
                        if jac == 0.0 {
                            return (0, 0);
                        }
                        let a = snap(&breaks, i as f64 * h * sj, tol);
                        let b = snap(&breaks, (i + 1) as f64 * h * sj, tol);
                        (a.min(b), a.max(b))
                    })
                    .collect();
                let z = tail_masses(&u, h);
                RayState { h, jac, u, z, span }
            })
            .collect();
        let mut e = Self { alpha: cfg.alpha, c: cfg.c, rays, phi: vec![0.0; elen.len()], elen, scale: 1.0 };
        e.refresh();
        e
    }

    fn densities(&self) -> Vec<Vec<f64>> {
        self.rays.iter().map(|r| r.u.clone()).collect()
    }

    /// Rebuild the derived arrays from the densities so rounding never drifts.
    fn refresh(&mut self) {
        self.phi.iter_mut().for_each(|p| *p = 0.0);
        for r in &mut self.rays {
            r.z = tail_masses(&r.u, r.h);
            if r.jac == 0.0 {
                continue;
            }
            for (i, &(a, b)) in r.span.iter().enumerate() {
                for p in &mut self.phi[a..b] {
                    *p += r.u[i] / r.jac;
                }
            }
        }
    }

    fn payoff(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for (l, p) in self.elen.iter().zip(&self.phi) {
            acc.add(-l * (-p).exp_m1());
        }
        for r in &self.rays {
            for j in 0..r.u.len() {
                if r.z[j] > 0.0 {
                    acc.add(-self.c * linear_power_integral(r.z[j], r.z[j + 1], r.h, self.alpha));
                }
            }
        }
        acc.value()
    }

    fn run(&mut self, tol: f64, max_passes: usize) -> (SeedRun, Vec<f64>) {
        let mut history = vec![self.payoff()];
        let mut violations = 0;
        let mut converged = false;
        let mut passes = 0;
        while passes < max_passes {
            for r in 0..self.rays.len() {
                for i in 0..self.rays[r].u.len() {
                    self.update(r, i);
                }
            }
            self.refresh();
            passes += 1;
            let now = self.payoff();
            let prev = *history.last().expect("non-empty");
            if now < prev - 1e-12 * prev.abs().max(1.0) {
                violations += 1;
            }
            debug_assert!(violations == 0, "payoff decreased from {prev} to {now}");
            history.push(now);
            if (now - prev).abs() < tol {
                converged = true;
                break;
            }
        }
        let run = SeedRun {
            seed: 0,
            payoff: *history.last().expect("non-empty"),
            passes,
            converged,
            ascent_violations: violations,
            transfers: 0,
        };
        (run, history)
    }

    /// `Σ len·e^{−Φ}` over the projected footprint of cell `i` of ray `r`.
    fn shade_weight(&self, r: usize, i: usize) -> f64 {
        let (a, b) = self.rays[r].span[i];
        let mut acc = 0.0;
        for e in a..b {
            acc += self.elen[e] * (-self.phi[e]).exp();
        }
        acc
    }

    /// Exact payoff change when `u[i]` of ray `r` grows by `delta`.
    fn gain(&self, r: usize, i: usize, delta: f64, weight: f64) -> f64 {
        let ray = &self.rays[r];
        let sun = if ray.jac > 0.0 { -weight * (-delta / ray.jac).exp_m1() } else { 0.0 };
        let (h, al) = (ray.h, self.alpha);
        let shift = delta * h;
        let mut dc = CompensatedSum::new();
        for j in 0..i {
            let (b, a) = (ray.z[j], ray.z[j + 1]);
            let old = if b > 0.0 { linear_power_integral(b, a, h, al) } else { 0.0 };
            dc.add(linear_power_integral(b + shift, a + shift, h, al) - old);
        }
        let (b, a) = (ray.z[i], ray.z[i + 1]);
        let old = if b > 0.0 { linear_power_integral(b, a, h, al) } else { 0.0 };
        let new_b = (b + shift).max(a);
        let new = if new_b > 0.0 { linear_power_integral(new_b, a, h, al) } else { 0.0 };
        dc.add(new - old);
        sun - self.c * dc.value()
    }

    /// First and second derivatives of the cost part at `delta = 0`.
    /// Requires `z[i] > 0`.
    fn cost_derivatives(&self, r: usize, i: usize) -> (f64, f64) {
        let ray = &self.rays[r];
        let (h, al) = (ray.h, self.alpha);
        let (mut d1, mut d2) = (0.0, 0.0);
        for j in 0..i {
            let (b, a) = (ray.z[j], ray.z[j + 1]);
            d1 += al * h * linear_power_integral(b, a, h, al - 1.0);
            if al < 1.0 {
                d2 += al * (al - 1.0) * h * h * linear_power_integral(b, a, h, al - 2.0);
            }
        }
        // Own cell: the inner end moves, the outer end is fixed. With τ the
        // distance from the outer end, dz/dδ = τ.
        let (b, a) = (ray.z[i], ray.z[i + 1]);
        let gl = gauss_legendre_10();
        let line = |t: f64| a + (b - a) * t / h;
        if a >= 0.05 * b {
            d1 += al * gl.integrate(0.0, h, |t| line(t).powf(al - 1.0) * t);
            if al < 1.0 {
                d2 += al * (al - 1.0) * gl.integrate(0.0, h, |t| line(t).powf(al - 2.0) * t * t);
            }
        } else {
            // Substitute w = z(τ); the moments of w^p (w − a)^k are explicit.
            let k = h / (b - a);
            let mom = |p: f64, deg: i32| -> f64 {
                let pw = |e: f64| (b.powf(e) - a.powf(e)) / e;
                if a == 0.0 {
                    return pw(p + deg as f64 + 1.0);
                }
                match deg {
                    1 => pw(p + 2.0) - a * pw(p + 1.0),
                    _ => pw(p + 3.0) - 2.0 * a * pw(p + 2.0) + a * a * pw(p + 1.0),
                }
            };
            d1 += al * k * k * mom(al - 1.0, 1);
            if al < 1.0 {
                d2 += al * (al - 1.0) * k * k * k * mom(al - 2.0, 2);
            }
        }
        (self.c * d1, self.c * d2)
    }

    fn apply(&mut self, r: usize, i: usize, delta: f64) {
        let ray = &mut self.rays[r];
        let new = (ray.u[i] + delta).max(0.0);
        let delta = new - ray.u[i];
        ray.u[i] = new;
        let shift = delta * ray.h;
        for z in &mut ray.z[..=i] {
            *z = (*z + shift).max(0.0);
        }
        if ray.jac > 0.0 {
            let (a, b) = ray.span[i];
            for p in &mut self.phi[a..b] {
                *p = (*p + delta / ray.jac).max(0.0);
            }
        }
    }

    fn update(&mut self, r: usize, i: usize) {
        let ray = &self.rays[r];
        let u = ray.u[i];
        let jac = ray.jac;
        let weight = if jac > 0.0 { self.shade_weight(r, i) } else { 0.0 };

        if ray.z[i] <= 0.0 {
            // Cell and everything beyond it are empty. The marginal cost at
            // zero is infinite for α < 1, so only finite jumps can help.
            let reference = if i == 0 { self.scale } else { ray.u[i - 1] };
            if reference <= 0.0 || jac == 0.0 {
                return;
            }
            let mut best = (0.0, 0.0);
            for f in [1.0, 0.5, 0.25] {
                let g = self.gain(r, i, f * reference, weight);
                if g > best.1 {
                    best = (f * reference, g);
                }
            }
            if best.1 > 0.0 {
                self.apply(r, i, best.0);
            }
            return;
        }

        let (c1, c2) = self.cost_derivatives(r, i);
        let (g1, g2) = if jac > 0.0 { (weight / jac - c1, -weight / (jac * jac) - c2) } else { (-c1, -c2) };
        let cap = 2.0 * u.max(self.scale);
        let mut delta = if g2 < 0.0 {
            -g1 / g2
        } else if g1 > 0.0 {
            cap
        } else {
            -u
        };
        delta = delta.clamp(-u, cap);
        if delta == 0.0 || !delta.is_finite() {
            return;
        }
        for _ in 0..60 {
            let g = self.gain(r, i, delta, weight);
            if g > 0.0 {
                self.apply(r, i, delta);
                return;
            }
            delta *= 0.5;
            if delta.abs() <= 1e-15 * u.max(1e-300) {
                break;
            }
        }
        if u > 0.0 && self.gain(r, i, -u, weight) > 0.0 {
            self.apply(r, i, -u);
        }
    }
}

/// Densities of the two predicted rays, from the closed form, on the grids of
/// `cfg.predicted_rays()`; every other ray is empty.
pub fn closed_form_densities(cfg: &RayFamilyConfig, rule: CellRule) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let [r0, r1] = cfg.predicted_rays();
    let mut out: Vec<Vec<f64>> = cfg.rays.iter().map(|r| vec![0.0; r.cells]).collect();
    for (idx, sf) in [(r0, cfg.theta0.sin()), (r1, 1.0)] {
        let r = &cfg.rays[idx];
        let sol = solve_ray(cfg.alpha, cfg.c, sf.clamp(f64::MIN_POSITIVE, 1.0), 1024)?;
        out[idx] = sol.cell_densities(r.cells, r.length, rule);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhototropismReport {
    pub bend_angle: f64,
    /// Stem along `θ0 + π/2` with its optimal density.
    pub straight: f64,
    /// The same stem rotated toward the light by `bend_angle`.
    pub bent: f64,
    pub difference: f64,
}

/// Compare the optimal straight stem with the same stem bent toward the light.
///
/// Both stems are chains from the origin with identical arclength density, so
/// their transport costs agree and the comparison is decided by sunlight.
pub fn phototropism_compare(alpha: f64, c: f64, theta0: f64, bend_angle: f64) -> Result<PhototropismReport> {
    if !(bend_angle > 0.0 && bend_angle < FRAC_PI_2) {
        return Err(Error::Domain(format!("bend angle {bend_angle} must lie in (0, π/2)")));
    }
    if !(theta0 > 0.0 && theta0 <= FRAC_PI_2 + 1e-15) {
        return Err(Error::Domain(format!("theta0 = {theta0} must lie in (0, π/2]")));
    }
    let sol = solve_ray(alpha, c, 1.0, 1024)?;
    let cells = sol.cell_densities(DEFAULT_CELLS, sol.ell, CellRule::Mass);
    let n = Direction::new(theta0);
    let h = sol.ell / cells.len() as f64;
    let cost = c * chain_cost(&cells, h, alpha);
    let payoff = |angle: f64| -> Result<f64> {
        let seg = RayDensityPlan::new(angle, sol.ell, cells.clone())?.to_segment();
        Ok(sunlight_single(&Measure::new(vec![seg], Vec::new())?, n) - cost)
    };
    let straight = payoff(theta0 + FRAC_PI_2)?;
    let bent = payoff(theta0 + FRAC_PI_2 - bend_angle)?;
    Ok(PhototropismReport { bend_angle, straight, bent, difference: straight - bent })
}
