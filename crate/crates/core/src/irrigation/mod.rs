//! Tree-structured irrigation plans rooted at the origin.
//!
//! On a tree the α-irrigation cost of a plan reduces to the Gilbert energy
//! `Σ_edges flux^α · length`, where the flux of an edge is the total sink mass
//! of the subtree below it. Densities spread along a ray (or any arclength
//! parameterized chain) are handled by [`chain`].

pub mod chain;
mod steiner;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use chain::{chain_cost, ray_cost, tail_masses, RayDensityPlan};
pub use steiner::{
    enumerate_topologies, optimal_tree_bruteforce, optimal_tree_bruteforce_with, relax_topology, BruteForceResult,
    RelaxOptions, Relaxation, Topology, MAX_BRUTEFORCE_ATOMS,
};

use crate::error::{Error, Result};
use crate::measure::{dist, Direction, Point};

/// Rooted geometric tree carrying sink masses; node 0 is the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct IrrigationTree {
    nodes: Vec<Point>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    sinks: BTreeMap<usize, f64>,
    flux: Vec<f64>,
}

/// Wire format: `{nodes:[[x,y]], edges:[[i,j]], sinks:{i:mass}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeJson {
    pub nodes: Vec<Point>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub sinks: BTreeMap<usize, f64>,
}

impl TryFrom<TreeJson> for IrrigationTree {
    type Error = Error;

    fn try_from(t: TreeJson) -> Result<Self> {
        IrrigationTree::new(t.nodes, &t.edges, t.sinks)
    }
}

impl From<&IrrigationTree> for TreeJson {
    fn from(t: &IrrigationTree) -> Self {
        TreeJson { nodes: t.nodes.clone(), edges: t.edges(), sinks: t.sinks.clone() }
    }
}

impl IrrigationTree {
    /// Validate structure, compute subtree fluxes and prune zero-flux branches.
    ///
    /// Node 0 must sit at the origin; every other node needs exactly one parent
    /// and must be reachable from node 0.
    pub fn new(nodes: Vec<Point>, edges: &[[usize; 2]], sinks: BTreeMap<usize, f64>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Structure("tree has no nodes".into()));
        }
        if nodes[0] != [0.0, 0.0] {
            return Err(Error::Structure("node 0 must be the origin".into()));
        }
        if nodes.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::Structure("non-finite node coordinate".into()));
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for &[p, c] in edges {
            if p >= n || c >= n {
                return Err(Error::Structure(format!("edge ({p}, {c}) references a missing node")));
            }
            if c == 0 {
                return Err(Error::Structure("the origin cannot have a parent".into()));
            }
            if parent[c].is_some() {
                return Err(Error::Structure(format!("node {c} has two parents")));
            }
            parent[c] = Some(p);
            children[p].push(c);
        }
        for (&k, &m) in &sinks {
            if k >= n {
                return Err(Error::Structure(format!("sink {k} is not a node")));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::Structure(format!("invalid sink mass {m} at node {k}")));
            }
        }
        let order = preorder(&children);
        if order.len() != n {
            return Err(Error::Structure("tree is not connected to the origin (or has a cycle)".into()));
        }
        let mut flux = vec![0.0; n];
        for &v in order.iter().rev() {
            let own = sinks.get(&v).copied().unwrap_or(0.0);
            flux[v] = own + children[v].iter().map(|&c| flux[c]).sum::<f64>();
        }
        let tree = Self { nodes, parent, children, sinks, flux };
        Ok(tree.pruned())
    }

    fn pruned(self) -> Self {
        let keep: Vec<bool> = (0..self.nodes.len()).map(|v| v == 0 || self.flux[v] > 0.0).collect();
        if keep.iter().all(|&k| k) {
            return self;
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (v, &k) in keep.iter().enumerate() {
            if k {
                remap[v] = nodes.len();
                nodes.push(self.nodes[v]);
            }
        }
        let edges: Vec<[usize; 2]> = (1..self.nodes.len())
            .filter(|&v| keep[v])
            .map(|v| [remap[self.parent[v].expect("non-root has parent")], remap[v]])
            .collect();
        let sinks = self.sinks.iter().filter(|(&k, &m)| keep[k] && m > 0.0).map(|(&k, &m)| (remap[k], m)).collect();
        IrrigationTree::new(nodes, &edges, sinks).expect("pruning keeps a valid tree")
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn sinks(&self) -> &BTreeMap<usize, f64> {
        &self.sinks
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Edges as `(parent, child)` pairs ordered by child index.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        (1..self.nodes.len()).filter_map(|v| self.parent[v].map(|p| [p, v])).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.flux[0]
    }

    /// Flux through the edge `parent → child`: sink mass of the child's subtree.
    pub fn edge_flux(&self, parent: usize, child: usize) -> Result<f64> {
        match self.parent.get(child) {
            Some(Some(p)) if *p == parent => Ok(self.flux[child]),
            _ => Err(Error::Structure(format!("no edge ({parent}, {child}) in tree"))),
        }
    }

    pub fn edge_length(&self, child: usize) -> f64 {
        self.parent[child].map_or(0.0, |p| dist(self.nodes[p], self.nodes[child]))
    }

    /// Gilbert energy `Σ flux^α · length`.
    pub fn cost(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(crate::numeric::compensated_sum(
            (1..self.nodes.len()).map(|v| self.flux[v].powf(alpha) * self.edge_length(v)),
        ))
    }

    /// Number of nodes that are neither the origin nor a sink.
    pub fn branch_point_count(&self) -> usize {
        (1..self.nodes.len()).filter(|v| !self.sinks.contains_key(v)).count()
    }

    fn preorder(&self) -> Vec<usize> {
        preorder(&self.children)
    }
}

fn preorder(children: &[Vec<usize>]) -> Vec<usize> {
    let mut order = Vec::with_capacity(children.len());
    let mut seen = vec![false; children.len()];
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        order.push(v);
        for &c in children[v].iter().rev() {
            stack.push(c);
        }
    }
    order
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")))
    }
}

/// `Σ flux^α · length` over the tree; see [`IrrigationTree::cost`].
pub fn tree_cost(tree: &IrrigationTree, alpha: f64) -> Result<f64> {
    tree.cost(alpha)
}

/// Outcome of [`check_monotone_structure`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub pass: bool,
    /// `(parent, child, drop)` for every edge along which the light-aligned
    /// coordinate decreases by more than the tolerance.
    pub violations: Vec<(usize, usize, f64)>,
    pub worst_drop: f64,
}

/// Check that the coordinate `⟨n, x⟩` along the light never decreases on any
/// root-to-leaf path. This is the frame in which the light comes straight
/// down; optimal irrigation paths only move away from the light source.
pub fn check_monotone_structure(tree: &IrrigationTree, theta0: f64) -> MonotoneReport {
    let n = Direction::new(theta0).unit();
    let along = |p: Point| n[0] * p[0] + n[1] * p[1];
    let scale = tree.nodes.iter().map(|p| p[0].hypot(p[1])).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for v in tree.preorder().into_iter().skip(1) {
        let p = tree.parent[v].expect("non-root");
        let drop = along(tree.nodes[p]) - along(tree.nodes[v]);
        worst = worst.max(drop);
        if drop > tol {
            violations.push((p, v, drop));
        }
    }
    MonotoneReport { pass: violations.is_empty(), violations, worst_drop: worst }
}
