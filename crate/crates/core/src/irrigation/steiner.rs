//! Exhaustive Gilbert–Steiner search for a handful of point sinks.
//!
//! Every rooted topology over the sinks is generated, where a sink may relay
//! flow to further sinks and each free branch point has at least two children.
//! Branch-point positions are then relaxed by Gauss–Seidel weighted Fermat
//! (Weiszfeld) updates, and the cheapest relaxed tree wins.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::measure::{dist, Atom, Point};

use super::{check_alpha, IrrigationTree};

/// Exhaustive search is refused above this many (positive-mass) atoms.
pub const MAX_BRUTEFORCE_ATOMS: usize = 5;

/// Combinatorial shape of a rooted tree: which node hangs below which.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Topology {
    /// The root; its children form a forest over all sinks.
    Origin(Vec<Topology>),
    /// Sink `i` (index into the atom list) and the subtrees it relays to.
    Sink(usize, Vec<Topology>),
    /// A free branch point with at least two children.
    Steiner(Vec<Topology>),
}

impl Topology {
    pub fn children(&self) -> &[Topology] {
        match self {
            Topology::Origin(c) | Topology::Sink(_, c) | Topology::Steiner(c) => c,
        }
    }

    pub fn steiner_count(&self) -> usize {
        let own = usize::from(matches!(self, Topology::Steiner(_)));
        own + self.children().iter().map(Topology::steiner_count).sum::<usize>()
    }
}

/// Compact encoding: `o` for the origin, the sink index for a sink, `*` for a
/// branch point, children in parentheses.
impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Origin(_) => write!(f, "o")?,
            Topology::Sink(i, _) => write!(f, "{i}")?,
            Topology::Steiner(_) => write!(f, "*")?,
        }
        let children = self.children();
        if !children.is_empty() {
            write!(f, "(")?;
            for (k, c) in children.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// All rooted topologies over sinks `0..n`, in a fixed canonical order.
///
/// Children are listed by their smallest sink index, so every shape appears
/// exactly once. There are 1, 4, 32, 396 and 6692 topologies for `n = 1..=5`.
pub fn enumerate_topologies(n: usize) -> Vec<Topology> {
    if n == 0 {
        return vec![Topology::Origin(Vec::new())];
    }
    let mut memo = Enumerator::default();
    let full = (1u32 << n) - 1;
    memo.forests(full, 0).into_iter().map(Topology::Origin).collect()
}

#[derive(Default)]
struct Enumerator {
    trees: HashMap<u32, Vec<Topology>>,
    forests: HashMap<(u32, usize), Vec<Vec<Topology>>>,
}

impl Enumerator {
    fn trees(&mut self, set: u32) -> Vec<Topology> {
        if let Some(t) = self.trees.get(&set) {
            return t.clone();
        }
        let mut out = Vec::new();
        for i in bits(set) {
            for f in self.forests(set & !(1 << i), 0) {
                out.push(Topology::Sink(i, f));
            }
        }
        if set.count_ones() >= 2 {
            for f in self.forests(set, 2) {
                out.push(Topology::Steiner(f));
            }
        }
        self.trees.insert(set, out.clone());
        out
    }

    /// Forests over `set` with at least `min_trees` trees.
    fn forests(&mut self, set: u32, min_trees: usize) -> Vec<Vec<Topology>> {
        if let Some(f) = self.forests.get(&(set, min_trees)) {
            return f.clone();
        }
        let mut out = Vec::new();
        if set == 0 {
            if min_trees == 0 {
                out.push(Vec::new());
            }
        } else {
            // The block holding the lowest sink comes first.
            let low = set & set.wrapping_neg();
            let rest = set & !low;
            let mut sub = rest;
            loop {
                let block = low | sub;
                let remaining = rest & !sub;
                let tails = self.forests(remaining, min_trees.saturating_sub(1));
                let heads = if tails.is_empty() { Vec::new() } else { self.trees(block) };
                for h in &heads {
                    for t in &tails {
                        let mut f = Vec::with_capacity(t.len() + 1);
                        f.push(h.clone());
                        f.extend(t.iter().cloned());
                        out.push(f);
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            // Keep the canonical order: blocks sorted by their second element.
            out.sort_by_cached_key(|f| forest_key(f));
        }
        self.forests.insert((set, min_trees), out.clone());
        out
    }
}

fn forest_key(f: &[Topology]) -> String {
    f.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

fn bits(set: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| set & (1 << i) != 0)
}

/// Tuning of the branch-point relaxation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxOptions {
    /// Stop once no branch point moves further than this in a sweep.
    pub tol: f64,
    pub max_iter: usize,
    /// Branch points this close to a neighbour are merged into it.
    pub collapse_tol: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, collapse_tol: 1e-9 }
    }
}

/// A topology with relaxed branch points, before collapsing.
#[derive(Clone, Debug)]
pub struct Relaxation {
    /// Node positions; index 0 is the origin, `1..=n` the sinks.
    pub positions: Vec<Point>,
    pub parent: Vec<Option<usize>>,
    pub flux: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Origin,
    Sink,
    Steiner,
}

struct Flat {
    kind: Vec<Kind>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

/// Number the nodes as origin, sinks `1..=n`, then branch points in preorder.
fn flatten(top: &Topology, n: usize) -> Flat {
    let mut kind = vec![Kind::Origin];
    kind.extend(std::iter::repeat_n(Kind::Sink, n));
    let mut parent = vec![None; n + 1];
    let mut children = vec![Vec::new(); n + 1];
    let mut stack: Vec<(&Topology, usize)> = top.children().iter().rev().map(|c| (c, 0)).collect();
    while let Some((t, p)) = stack.pop() {
        let id = match t {
            Topology::Sink(i, _) => i + 1,
            Topology::Steiner(_) => {
                kind.push(Kind::Steiner);
                parent.push(None);
                children.push(Vec::new());
                kind.len() - 1
            }
            Topology::Origin(_) => unreachable!("origin below the root"),
        };
        parent[id] = Some(p);
        children[p].push(id);
        for c in t.children().iter().rev() {
            stack.push((c, id));
        }
    }
    Flat { kind, parent, children }
}

fn unit(from: Point, to: Point) -> Option<Point> {
    let d = dist(from, to);
    (d > 0.0).then(|| [(to[0] - from[0]) / d, (to[1] - from[1]) / d])
}

/// Relax the branch points of `top` over the given sinks.
pub fn relax_topology(top: &Topology, atoms: &[Atom], alpha: f64, opts: &RelaxOptions) -> Result<Relaxation> {
    check_alpha(alpha)?;
    let n = atoms.len();
    let flat = flatten(top, n);
    let m = flat.kind.len();
    if (1..=n).any(|i| flat.parent[i].is_none()) {
        return Err(Error::Structure(format!("topology {top} does not cover all {n} sinks")));
    }

    let order = preorder(&flat.children);
    let mut flux = vec![0.0; m];
    for &v in order.iter().rev() {
        if flat.kind[v] == Kind::Sink {
            flux[v] += atoms[v - 1].mass;
        }
        if let Some(p) = flat.parent[v] {
            flux[p] += flux[v];
        }
    }
    let weight: Vec<f64> = flux.iter().map(|f| f.powf(alpha)).collect();

    let mut pos = vec![[0.0, 0.0]; m];
    for i in 1..=n {
        pos[i] = atoms[i - 1].pos;
    }
    // Start each branch point halfway between its parent and the mass centroid
    // of the sinks it serves.
    let centroid = subtree_centroids(&flat, &order, &pos, atoms);
    for &v in &order {
        if flat.kind[v] == Kind::Steiner {
            let p = pos[flat.parent[v].expect("branch point has a parent")];
            pos[v] = [0.5 * (p[0] + centroid[v][0]), 0.5 * (p[1] + centroid[v][1])];
        }
    }

    let scale = pos.iter().map(|p| p[0].hypot(p[1])).fold(1.0, f64::max);
    let steiner: Vec<usize> = order.iter().copied().filter(|&v| flat.kind[v] == Kind::Steiner).collect();
    let mut last_step = vec![[0.0, 0.0]; m];
    let mut iterations = 0;
    let mut converged = steiner.is_empty();
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut max_move: f64 = 0.0;
        for &v in &steiner {
            let nbrs: Vec<(Point, f64)> = std::iter::once(flat.parent[v].expect("branch point has a parent"))
                .map(|p| (pos[p], weight[v]))
                .chain(flat.children[v].iter().map(|&c| (pos[c], weight[c])))
                .collect();
            let old = pos[v];
            let mut new = fermat_step(old, &nbrs, 1e-15 * scale);
            let step = [new[0] - old[0], new[1] - old[1]];
            let prev = last_step[v];
            if step[0] * prev[0] + step[1] * prev[1] < 0.0 {
                new = [old[0] + 0.5 * step[0], old[1] + 0.5 * step[1]];
            }
            last_step[v] = [new[0] - old[0], new[1] - old[1]];
            max_move = max_move.max(dist(old, new));
            pos[v] = new;
        }
        converged = max_move < opts.tol;
    }

    let cost = (1..m).map(|v| weight[v] * dist(pos[v], pos[flat.parent[v].expect("non-root")])).sum();
    Ok(Relaxation { positions: pos, parent: flat.parent, flux, cost, iterations, converged })
}

fn preorder(children: &[Vec<usize>]) -> Vec<usize> {
    let mut order = Vec::with_capacity(children.len());
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(children[v].iter().rev());
    }
    order
}

fn subtree_centroids(flat: &Flat, order: &[usize], pos: &[Point], atoms: &[Atom]) -> Vec<Point> {
    let m = flat.kind.len();
    let mut acc = vec![[0.0, 0.0, 0.0]; m];
    for &v in order.iter().rev() {
        if flat.kind[v] == Kind::Sink {
            let w = atoms[v - 1].mass;
            acc[v][0] += w * pos[v][0];
            acc[v][1] += w * pos[v][1];
            acc[v][2] += w;
        }
        if let Some(p) = flat.parent[v] {
            let a = acc[v];
            acc[p][0] += a[0];
            acc[p][1] += a[1];
            acc[p][2] += a[2];
        }
    }
    acc.into_iter().map(|[x, y, w]| if w > 0.0 { [x / w, y / w] } else { [0.0, 0.0] }).collect()
}

/// One coordinate update of `Σ w_j |x − p_j|`.
///
/// If some neighbour satisfies the vertex optimality condition the point jumps
/// there. Otherwise a Weiszfeld step is taken, modified as in Vardi–Zhang when
/// the current point sits on a neighbour.
fn fermat_step(x: Point, nbrs: &[(Point, f64)], tiny: f64) -> Point {
    for &(cand, _) in nbrs {
        let mut pinned = 0.0;
        let mut r = [0.0, 0.0];
        for &(p, w) in nbrs {
            match unit(cand, p) {
                Some(u) if dist(cand, p) > tiny => {
                    r[0] += w * u[0];
                    r[1] += w * u[1];
                }
                _ => pinned += w,
            }
        }
        if r[0].hypot(r[1]) <= pinned {
            return cand;
        }
    }

    let mut num = [0.0, 0.0];
    let mut den = 0.0;
    let mut pinned = 0.0;
    let mut r = [0.0, 0.0];
    for &(p, w) in nbrs {
        let d = dist(x, p);
        if d <= tiny {
            pinned += w;
            continue;
        }
        num[0] += w * p[0] / d;
        num[1] += w * p[1] / d;
        den += w / d;
        r[0] += w * (p[0] - x[0]) / d;
        r[1] += w * (p[1] - x[1]) / d;
    }
    if den == 0.0 {
        return x;
    }
    let t = [num[0] / den, num[1] / den];
    if pinned == 0.0 {
        return t;
    }
    let rn = r[0].hypot(r[1]);
    if rn <= pinned {
        return x;
    }
    let keep = pinned / rn;
    [(1.0 - keep) * t[0] + keep * x[0], (1.0 - keep) * t[1] + keep * x[1]]
}

/// Optimal tree found by [`optimal_tree_bruteforce`].
#[derive(Clone, Debug)]
pub struct BruteForceResult {
    /// Node 0 is the origin, nodes `1..=k` the positive-mass atoms in input
    /// order, remaining nodes are branch points.
    pub tree: IrrigationTree,
    pub cost: f64,
    /// Encoding of the winning tree after collapsing, in the format of
    /// [`Topology`]'s `Display`.
    pub topology: String,
    pub steiner_points: usize,
    pub topologies_examined: usize,
    /// False if some relaxation hit the iteration cap.
    pub all_converged: bool,
}

/// Globally optimal Gilbert tree for at most [`MAX_BRUTEFORCE_ATOMS`] sinks.
pub fn optimal_tree_bruteforce(atoms: &[Atom], alpha: f64) -> Result<BruteForceResult> {
    optimal_tree_bruteforce_with(atoms, alpha, &RelaxOptions::default(), Exec::default())
}

pub fn optimal_tree_bruteforce_with(
    atoms: &[Atom],
    alpha: f64,
    opts: &RelaxOptions,
    exec: Exec,
) -> Result<BruteForceResult> {
    check_alpha(alpha)?;
    for a in atoms {
        if !(a.mass.is_finite() && a.mass >= 0.0 && a.pos[0].is_finite() && a.pos[1].is_finite()) {
            return Err(Error::InvalidMeasure(format!("invalid atom {a:?}")));
        }
    }
    let kept: Vec<Atom> = atoms.iter().copied().filter(|a| a.mass > 0.0).collect();
    if kept.len() > MAX_BRUTEFORCE_ATOMS {
        return Err(Error::TooManyAtoms { given: kept.len(), max: MAX_BRUTEFORCE_ATOMS });
    }

    let topologies = enumerate_topologies(kept.len());
    let candidates = exec::map_slice(exec, &topologies, |t| -> Result<Candidate> {
        let relaxed = relax_topology(t, &kept, alpha, opts)?;
        let converged = relaxed.converged;
        let tree = collapse(relaxed, &kept, opts.collapse_tol)?;
        let cost = tree.cost(alpha)?;
        let encoding = encode_tree(&tree, kept.len());
        Ok(Candidate { steiner: tree.branch_point_count(), encoding, cost, tree, converged })
    });

    let mut best: Option<Candidate> = None;
    let mut all_converged = true;
    for c in candidates {
        let c = c?;
        all_converged &= c.converged;
        best = match best {
            Some(b) if !c.beats(&b) => Some(b),
            _ => Some(c),
        };
    }
    let best = best.expect("at least one topology");
    Ok(BruteForceResult {
        cost: best.cost,
        topology: best.encoding,
        steiner_points: best.steiner,
        topologies_examined: topologies.len(),
        all_converged,
        tree: best.tree,
    })
}

struct Candidate {
    tree: IrrigationTree,
    cost: f64,
    steiner: usize,
    encoding: String,
    converged: bool,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        let scale = self.cost.abs().max(other.cost.abs()).max(f64::MIN_POSITIVE);
        if (self.cost - other.cost).abs() > 1e-12 * scale {
            return self.cost < other.cost;
        }
        (self.steiner, &self.encoding) < (other.steiner, &other.encoding)
    }
}

/// Canonical encoding of a tree whose nodes `1..=n` are the sinks.
fn encode_tree(tree: &IrrigationTree, n: usize) -> String {
    fn min_sink(tree: &IrrigationTree, n: usize, v: usize) -> usize {
        let own = if (1..=n).contains(&v) { v } else { usize::MAX };
        tree.children(v).iter().map(|&c| min_sink(tree, n, c)).fold(own, usize::min)
    }
    fn build(tree: &IrrigationTree, n: usize, v: usize) -> Topology {
        let mut kids: Vec<usize> = tree.children(v).to_vec();
        kids.sort_by_key(|&c| min_sink(tree, n, c));
        let sub = kids.into_iter().map(|c| build(tree, n, c)).collect();
        match v {
            0 => Topology::Origin(sub),
            v if v <= n => Topology::Sink(v - 1, sub),
            _ => Topology::Steiner(sub),
        }
    }
    build(tree, n, 0).to_string()
}

/// Merge branch points that sit on a neighbour, splice out branch points left
/// with a single child, and build the final tree.
fn collapse(r: Relaxation, atoms: &[Atom], tol: f64) -> Result<IrrigationTree> {
    let n = atoms.len();
    let m = r.positions.len();
    let pos = r.positions;
    let mut parent = r.parent;
    let mut alive = vec![true; m];
    let children_of = |parent: &[Option<usize>], alive: &[bool], v: usize| -> Vec<usize> {
        (0..parent.len()).filter(|&c| alive[c] && parent[c] == Some(v)).collect()
    };

    // Deepest branch points first, so merges never point at removed nodes.
    for v in (n + 1..m).rev() {
        let p = parent[v].expect("branch point has a parent");
        let kids = children_of(&parent, &alive, v);
        if dist(pos[v], pos[p]) <= tol || kids.len() < 2 {
            for c in kids {
                parent[c] = Some(p);
            }
            alive[v] = false;
        } else if let Some(&heir) = kids.iter().find(|&&c| dist(pos[v], pos[c]) <= tol) {
            for c in kids {
                if c != heir {
                    parent[c] = Some(heir);
                }
            }
            parent[heir] = Some(p);
            alive[v] = false;
        }
    }

    let mut index = vec![usize::MAX; m];
    let mut nodes = Vec::new();
    for v in 0..m {
        if alive[v] {
            index[v] = nodes.len();
            nodes.push(pos[v]);
        }
    }
    let edges: Vec<[usize; 2]> =
        (1..m).filter(|&v| alive[v]).map(|v| [index[parent[v].expect("non-root")], index[v]]).collect();
    let sinks = (1..=n).map(|i| (index[i], atoms[i - 1].mass)).collect();
    IrrigationTree::new(nodes, &edges, sinks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn atom(x: f64, y: f64, mass: f64) -> Atom {
        Atom { pos: [x, y], mass }
    }

    #[test]
    fn topology_counts() {
        let counts: Vec<usize> = (1..=5).map(|n| enumerate_topologies(n).len()).collect();
        assert_eq!(counts, vec![1, 4, 32, 396, 6692]);
    }

    #[test]
    fn topologies_are_distinct_and_sorted_children() {
        let tops = enumerate_topologies(3);
        let mut enc: Vec<String> = tops.iter().map(|t| t.to_string()).collect();
        assert!(enc.contains(&"o(0,1,2)".to_string()));
        assert!(enc.contains(&"o(*(0,*(1,2)))".to_string()));
        enc.sort();
        enc.dedup();
        assert_eq!(enc.len(), 32);
    }

    #[test]
    fn single_atom_is_a_straight_edge() {
        for alpha in [0.0, 0.3, 1.0] {
            let r = optimal_tree_bruteforce(&[atom(3.0, 4.0, 1.0)], alpha).unwrap();
            assert_relative_eq!(r.cost, 5.0, max_relative = 1e-14);
            assert_eq!(r.steiner_points, 0);
        }
    }

    #[test]
    fn symmetric_pair_forms_a_y() {
        let atoms = [atom(1.0, 0.2, 0.5), atom(1.0, -0.2, 0.5)];
        let r = optimal_tree_bruteforce(&atoms, 0.5).unwrap();
        // Branch point at (0.8, 0): 0.8 + 2·√0.5·√0.08 = 1.2.
        assert_relative_eq!(r.cost, 1.2, max_relative = 1e-9);
        assert_eq!(r.steiner_points, 1);
        let star = 2.0 * 0.5f64.sqrt() * 1.04f64.sqrt();
        let chain = 1.04f64.sqrt() + 0.5f64.sqrt() * 0.4;
        assert!(r.cost < star && r.cost < chain);
        let bp = r.tree.nodes()[3];
        assert!((bp[0] - 0.8).abs() < 1e-6 && bp[1].abs() < 1e-6);
    }

    #[test]
    fn linear_cost_gives_the_star() {
        let atoms = [atom(1.0, 2.0, 0.3), atom(-1.0, 1.0, 0.6), atom(0.5, 0.5, 1.1)];
        let r = optimal_tree_bruteforce(&atoms, 1.0).unwrap();
        let star: f64 = atoms.iter().map(|a| a.mass * a.pos[0].hypot(a.pos[1])).sum();
        assert_relative_eq!(r.cost, star, max_relative = 1e-12);
    }

    #[test]
    fn zero_mass_atoms_are_ignored_and_size_is_guarded() {
        let r = optimal_tree_bruteforce(&[atom(3.0, 4.0, 2.0), atom(9.0, 9.0, 0.0)], 1.0).unwrap();
        assert_relative_eq!(r.cost, 10.0);
        let many: Vec<Atom> = (0..6).map(|i| atom(i as f64, 1.0, 1.0)).collect();
        assert!(matches!(optimal_tree_bruteforce(&many, 0.5), Err(Error::TooManyAtoms { given: 6, max: 5 })));
    }

    #[test]
    fn sink_on_the_way_relays_flow() {
        // Collinear sinks: the chain through the nearer one is optimal for α < 1.
        let atoms = [atom(0.0, 1.0, 1.0), atom(0.0, 2.0, 1.0)];
        let r = optimal_tree_bruteforce(&atoms, 0.5).unwrap();
        assert_relative_eq!(r.cost, 2f64.sqrt() + 1.0, max_relative = 1e-12);
        assert_eq!(r.topology, "o(0(1))");
    }

    #[test]
    fn fermat_step_detects_vertex_optimum() {
        // Heavy neighbour at the origin pins the point there.
        let nbrs = [([0.0, 0.0], 3.0), ([1.0, 0.0], 1.0), ([0.0, 1.0], 1.0)];
        assert_eq!(fermat_step([0.3, 0.3], &nbrs, 1e-15), [0.0, 0.0]);
    }
}
