//! Noisy trees, their stringy unfoldings, and the explicit channel that
//! turns the two-leaf stringy tree into the `Upsilon` tree.
//!
//! A noisy tree carries a flip probability `theta` in `(0, 1/2]` on each
//! edge. The root spin is uniform on `{-1, +1}` and each child copies its
//! parent, reversed with probability `theta`. Spins are `i8` values `+-1`.
//! Leaf tuples are encoded as bitmasks: bit `i` is set when leaf `i`
//! (in [`NoisyTree::leaves`] order) is `+1`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::csv::{fmt_f64, Table};
use crate::dual::CoalescenceForest;
use crate::error::{Error, Result};
use crate::rng::{rng_from, StreamKind};

/// Largest leaf count accepted by [`exhaustive_joint`].
pub const MAX_EXHAUSTIVE_LEAVES: usize = 4;
/// Largest site count accepted by [`forest_data_processing`].
pub const MAX_FOREST_SITES: usize = 12;

/// `theta(s) = (1 - e^{-s})/2`: the flip probability of an edge of
/// duration `s` in the tree-indexed chain.
pub fn flip_prob_from_duration(s: f64) -> f64 {
    assert!(s >= 0.0, "negative duration {s}");
    -0.5 * (-s).exp_m1()
}

fn check_label(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidLabel(theta))
    }
}

/// A rooted tree with a flip probability on each edge.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyTree {
    root: usize,
    parent: Vec<Option<usize>>,
    /// Label of the edge into each node (unused at the root).
    theta: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl NoisyTree {
    /// Tree on nodes `0..n_nodes` from `(parent, child, theta)` edges.
    pub fn new(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidSize("a tree needs at least one node".into()));
        }
        let mut parent = vec![None; n_nodes];
        let mut theta = vec![0.0; n_nodes];
        let mut children = vec![Vec::new(); n_nodes];
        for &(p, c, th) in edges {
            for v in [p, c] {
                if v >= n_nodes {
                    return Err(Error::SiteOutOfRange { site: v, n_sites: n_nodes });
                }
            }
            check_label(th)?;
            if p == c || parent[c].is_some() {
                return Err(Error::InvalidArgument(format!("node {c} has more than one parent")));
            }
            parent[c] = Some(p);
            theta[c] = th;
            children[p].push(c);
        }
        let roots: Vec<usize> = (0..n_nodes).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidArgument(format!("expected one root, found {}", roots.len())));
        }
        let tree = Self { root: roots[0], parent, theta, children };
        if tree.preorder().len() != n_nodes {
            return Err(Error::InvalidArgument("tree is not connected".into()));
        }
        Ok(tree)
    }

    /// One edge `root -> leaf`.
    pub fn edge(theta: f64) -> Result<Self> {
        Self::new(2, &[(0, 1, theta)])
    }

    /// Root `0`, internal node `1`, leaves `2` and `3`.
    pub fn upsilon(theta: f64, theta1: f64, theta2: f64) -> Result<Self> {
        Self::new(4, &[(0, 1, theta), (1, 2, theta1), (1, 3, theta2)])
    }

    /// Path from the root through the given labels.
    pub fn path(labels: &[f64]) -> Result<Self> {
        let edges: Vec<_> = labels.iter().enumerate().map(|(i, &t)| (i, i + 1, t)).collect();
        Self::new(labels.len() + 1, &edges)
    }

    /// Star rooted at its center.
    pub fn star(labels: &[f64]) -> Result<Self> {
        let edges: Vec<_> = labels.iter().enumerate().map(|(i, &t)| (0, i + 1, t)).collect();
        Self::new(labels.len() + 1, &edges)
    }

    /// Parse `parent child theta` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut n_nodes = 1;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected `parent child theta`, got {line:?}")));
            }
            let p: usize = fields[0].parse().map_err(|e| err(format!("bad parent: {e}")))?;
            let c: usize = fields[1].parse().map_err(|e| err(format!("bad child: {e}")))?;
            let th: f64 = fields[2].parse().map_err(|e| err(format!("bad theta: {e}")))?;
            n_nodes = n_nodes.max(p + 1).max(c + 1);
            edges.push((p, c, th));
        }
        Self::new(n_nodes, &edges)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in self.preorder() {
            for &c in &self.children[v] {
                let _ = writeln!(s, "{v} {c} {}", fmt_f64(self.theta[c]));
            }
        }
        s
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Flip probability of the edge into `v`, `None` at the root.
    pub fn theta(&self, v: usize) -> Option<f64> {
        self.parent[v].map(|_| self.theta[v])
    }

    /// Childless nodes, increasing. A lone root is its own leaf.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&v| self.children[v].is_empty()).collect()
    }

    /// Nodes with every parent before its children.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_nodes());
        let mut stack = vec![self.root];
        let mut seen = HashSet::new();
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            out.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        out
    }

    /// Labels along the root-to-`leaf` path.
    pub fn path_labels(&self, leaf: usize) -> Vec<f64> {
        let mut labels = Vec::new();
        let mut v = leaf;
        while let Some(p) = self.parent[v] {
            labels.push(self.theta[v]);
            v = p;
        }
        labels.reverse();
        labels
    }

    /// Law of the leaf tuple given the root spin, indexed by leaf bitmask.
    pub fn leaf_law_given_root(&self, root_spin: i8) -> Vec<f64> {
        let leaves = self.leaves();
        let mut leaf_bit = vec![usize::MAX; self.n_nodes()];
        for (i, &l) in leaves.iter().enumerate() {
            leaf_bit[l] = i;
        }
        let size = 1usize << leaves.len();
        // law[v][s]: law of v's subtree leaves given v's spin (s = 0 for -1).
        let mut law: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; self.n_nodes()];
        for &v in self.preorder().iter().rev() {
            let mut pair = [vec![0.0; size], vec![0.0; size]];
            if self.children[v].is_empty() {
                pair[0][0] = 1.0;
                pair[1][1 << leaf_bit[v]] = 1.0;
            } else {
                pair[0][0] = 1.0;
                pair[1][0] = 1.0;
                for &c in &self.children[v] {
                    let th = self.theta[c];
                    for s in 0..2 {
                        let child: Vec<f64> = (0..size)
                            .map(|m| (1.0 - th) * law[c][s][m] + th * law[c][1 - s][m])
                            .collect();
                        pair[s] = or_convolve(&pair[s], &child);
                    }
                }
            }
            law[v] = pair;
        }
        std::mem::take(&mut law[self.root][usize::from(root_spin > 0)])
    }
}

/// Law of the union of two independent leaf sets with disjoint bits.
fn or_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for (i, &pa) in a.iter().enumerate().filter(|p| *p.1 != 0.0) {
        for (j, &pb) in b.iter().enumerate().filter(|p| *p.1 != 0.0) {
            out[i | j] += pa * pb;
        }
    }
    out
}

/// Edge-disjoint root-leaf paths, one per leaf of the source tree.
#[derive(Clone, Debug, PartialEq)]
pub struct StringyTree {
    paths: Vec<Vec<f64>>,
}

pub fn build_stringy(tree: &NoisyTree) -> Result<StringyTree> {
    let paths: Vec<Vec<f64>> = tree.leaves().iter().map(|&l| tree.path_labels(l)).collect();
    for &th in paths.iter().flatten() {
        check_label(th)?;
    }
    Ok(StringyTree { paths })
}

impl StringyTree {
    /// Label sequences, in the source tree's leaf order.
    pub fn paths(&self) -> &[Vec<f64>] {
        &self.paths
    }

    /// The unfolding as a tree: root `0`, then each path's nodes in turn.
    pub fn to_tree(&self) -> Result<NoisyTree> {
        let mut edges = Vec::new();
        let mut next = 1;
        for path in &self.paths {
            let mut prev = 0;
            for &th in path {
                edges.push((prev, next, th));
                prev = next;
                next += 1;
            }
        }
        NoisyTree::new(next, &edges)
    }

    /// Law of the leaf tuple given the root spin.
    pub fn leaf_law_given_root(&self, root_spin: i8) -> Vec<f64> {
        let mut law = vec![1.0];
        for (i, path) in self.paths.iter().enumerate() {
            let corr: f64 = path.iter().map(|th| 1.0 - 2.0 * th).product();
            let p_same = 0.5 * (1.0 + corr);
            let p_plus = if root_spin > 0 { p_same } else { 1.0 - p_same };
            let mut next = vec![0.0; law.len() * 2];
            for (m, &p) in law.iter().enumerate() {
                next[m] += p * (1.0 - p_plus);
                next[m | (1 << i)] += p * p_plus;
            }
            law = next;
        }
        law
    }
}

/// One draw of every node's spin.
pub fn sample_tree_spins(tree: &NoisyTree, seed: u64) -> Vec<i8> {
    let mut rng = rng_from(seed, &[StreamKind::TreeSpins as u64]);
    let mut spin = vec![0i8; tree.n_nodes()];
    for v in tree.preorder() {
        spin[v] = match tree.parent[v] {
            None => {
                if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
            Some(p) => {
                if rng.random::<f64>() < tree.theta[v] {
                    -spin[p]
                } else {
                    spin[p]
                }
            }
        };
    }
    spin
}

/// Exact joint law of the root and the leaves. Index bit 0 is the root,
/// bit `i + 1` is leaf `i`; a set bit means `+1`.
pub fn exhaustive_joint(tree: &NoisyTree) -> Result<Vec<f64>> {
    let n_leaves = tree.leaves().len();
    if n_leaves > MAX_EXHAUSTIVE_LEAVES {
        return Err(Error::Capacity(format!(
            "exhaustive joint law supports at most {MAX_EXHAUSTIVE_LEAVES} leaves, got {n_leaves}"
        )));
    }
    let mut out = vec![0.0; 2 << n_leaves];
    for (bit, spin) in [(0usize, -1i8), (1, 1)] {
        for (m, p) in tree.leaf_law_given_root(spin).into_iter().enumerate() {
            out[bit | (m << 1)] = 0.5 * p;
        }
    }
    Ok(out)
}

/// `alpha = (1 - gamma1^2) / (1 - gamma^2 gamma1^2)` with `gamma = 1 - 2 theta`.
pub fn upsilon_alpha(theta: f64, theta1: f64, theta2: f64) -> Result<f64> {
    for th in [theta, theta1, theta2] {
        check_label(th)?;
    }
    if theta1 > theta2 {
        return Err(Error::InvalidArgument(format!(
            "theta1 = {theta1} exceeds theta2 = {theta2}; swap the leaves"
        )));
    }
    if theta1 == 0.5 || theta2 == 0.5 {
        return Err(Error::InvalidArgument("a leaf label of 1/2 needs the identity channel".into()));
    }
    let g = 1.0 - 2.0 * theta;
    let g1 = 1.0 - 2.0 * theta1;
    Ok((1.0 - g1 * g1) / (1.0 - g * g * g1 * g1))
}

/// The randomized map on the stringy leaves `(s1, s2)`: keep `s1`; keep
/// `s2` with probability `alpha`, otherwise replace it by `s1 z` with an
/// independent `z = +-1` of mean `z_mean`.
pub fn apply_upsilon_channel(leaves: (i8, i8), alpha: f64, z_mean: f64, seed: u64) -> Result<(i8, i8)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} is outside [0, 1]")));
    }
    if !(z_mean > 0.0 && z_mean <= 1.0) {
        return Err(Error::InvalidArgument(format!("z mean {z_mean} is outside (0, 1]")));
    }
    let mut rng = rng_from(seed, &[StreamKind::Channel as u64]);
    Ok(channel_step(leaves, alpha, z_mean, &mut rng))
}

fn channel_step<R: Rng + ?Sized>((s1, s2): (i8, i8), alpha: f64, z_mean: f64, rng: &mut R) -> (i8, i8) {
    if rng.random::<f64>() < alpha {
        (s1, s2)
    } else {
        let z = if rng.random::<f64>() < 0.5 * (1.0 + z_mean) { 1 } else { -1 };
        (s1, s1 * z)
    }
}

/// The channel for an `Upsilon` tree with labels `(theta, theta1, theta2)`
/// in caller order. Internally the leaf with the smaller label goes first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpsilonChannel {
    pub theta: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// `None` when a leaf label is 1/2 and the identity channel is used.
    pub alpha: Option<f64>,
    pub z_mean: f64,
    /// Whether the caller's leaves were swapped to get `theta1 <= theta2`.
    pub swapped: bool,
}

impl UpsilonChannel {
    pub fn new(theta: f64, theta1: f64, theta2: f64) -> Result<Self> {
        for th in [theta, theta1, theta2] {
            check_label(th)?;
        }
        let swapped = theta1 > theta2;
        let (a, b) = if swapped { (theta2, theta1) } else { (theta1, theta2) };
        let (alpha, z_mean) = if a == 0.5 || b == 0.5 {
            (None, 1.0)
        } else {
            (Some(upsilon_alpha(theta, a, b)?), (1.0 - 2.0 * b) / (1.0 - 2.0 * a))
        };
        Ok(Self { theta, theta1, theta2, alpha, z_mean, swapped })
    }

    /// Map stringy leaves `(s1, s2)` (caller order) to outputs.
    pub fn apply<R: Rng + ?Sized>(&self, leaves: (i8, i8), rng: &mut R) -> (i8, i8) {
        let Some(alpha) = self.alpha else { return leaves };
        if self.swapped {
            let (b, a) = channel_step((leaves.1, leaves.0), alpha, self.z_mean, rng);
            (a, b)
        } else {
            channel_step(leaves, alpha, self.z_mean, rng)
        }
    }

    /// Exact law of the outputs given the stringy root spin, indexed by
    /// leaf bitmask in caller order.
    pub fn output_law_given_root(&self, root_spin: i8) -> Result<[f64; 4]> {
        let stringy = build_stringy(&NoisyTree::upsilon(self.theta, self.theta1, self.theta2)?)?;
        let input = stringy.leaf_law_given_root(root_spin);
        let Some(alpha) = self.alpha else {
            return Ok([input[0], input[1], input[2], input[3]]);
        };
        let spin = |m: usize, i: usize| if m >> i & 1 == 1 { 1i8 } else { -1 };
        let mask = |s1: i8, s2: i8| usize::from(s1 > 0) | usize::from(s2 > 0) << 1;
        // (kept, moved) leaf positions in caller order.
        let (k, v) = if self.swapped { (1, 0) } else { (0, 1) };
        let mut out = [0.0; 4];
        for (m, &p) in input.iter().enumerate() {
            let sk = spin(m, k);
            let mut put = |keep: i8, moved: i8, w: f64| {
                let (s1, s2) = if k == 0 { (keep, moved) } else { (moved, keep) };
                out[mask(s1, s2)] += w;
            };
            put(sk, spin(m, v), p * alpha);
            put(sk, sk, p * (1.0 - alpha) * 0.5 * (1.0 + self.z_mean));
            put(sk, -sk, p * (1.0 - alpha) * 0.5 * (1.0 - self.z_mean));
        }
        Ok(out)
    }

    /// Max over root spins and outputs of the gap to the `Upsilon` law.
    pub fn discrepancy(&self) -> Result<f64> {
        let tree = NoisyTree::upsilon(self.theta, self.theta1, self.theta2)?;
        let mut worst: f64 = 0.0;
        for spin in [-1i8, 1] {
            let want = tree.leaf_law_given_root(spin);
            let got = self.output_law_given_root(spin)?;
            for m in 0..4 {
                worst = worst.max((want[m] - got[m]).abs());
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelGridRow {
    pub theta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub alpha: Option<f64>,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelGridReport {
    pub rows: Vec<ChannelGridRow>,
}

impl ChannelGridReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max)
    }

    /// Whether every non-identity `alpha` lies in `[0, 1]`.
    pub fn alphas_in_unit_interval(&self) -> bool {
        self.rows.iter().filter_map(|r| r.alpha).all(|a| (0.0..=1.0).contains(&a))
    }

    /// CSV `theta,theta1,theta2,alpha,discrepancy`; `alpha` is empty for
    /// the identity channel.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["theta", "theta1", "theta2", "alpha", "discrepancy"]);
        for r in &self.rows {
            table.push(vec![
                fmt_f64(r.theta),
                fmt_f64(r.theta1),
                fmt_f64(r.theta2),
                r.alpha.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.discrepancy),
            ]);
        }
        table
    }
}

/// Check the channel on every label triple from `{k / (2 g) : k = 1..g}^3`.
pub fn channel_grid_check(g: usize) -> Result<ChannelGridReport> {
    if g == 0 {
        return Err(Error::InvalidSize("grid needs at least one point".into()));
    }
    let values: Vec<f64> = (1..=g).map(|k| k as f64 / (2 * g) as f64).collect();
    let mut rows = Vec::with_capacity(g * g * g);
    for &theta in &values {
        for &theta1 in &values {
            for &theta2 in &values {
                let ch = UpsilonChannel::new(theta, theta1, theta2)?;
                rows.push(ChannelGridRow { theta, theta1, theta2, alpha: ch.alpha, discrepancy: ch.discrepancy()? });
            }
        }
    }
    Ok(ChannelGridReport { rows })
}

/// Tree `j` of a coalescence forest as a noisy tree (root `0`), with the
/// site of each of its leaves in [`NoisyTree::leaves`] order.
pub fn forest_tree(forest: &CoalescenceForest, j: usize) -> Result<(NoisyTree, Vec<usize>)> {
    let edges = forest.edges(j);
    let root = forest.trees()[j].root;
    let mut ids = std::collections::HashMap::new();
    ids.insert(root, 0usize);
    let mut mapped = Vec::with_capacity(edges.len());
    for &(p, c, d) in &edges {
        let next = ids.len();
        let c_id = *ids.entry(c).or_insert(next);
        mapped.push((ids[&p], c_id, flip_prob_from_duration(d)));
    }
    let tree = NoisyTree::new(ids.len(), &mapped)?;
    let mut by_id = vec![0; ids.len()];
    for (&old, &new) in &ids {
        by_id[new] = old;
    }
    let sites = tree.leaves().iter().map(|&l| forest.nodes()[by_id[l]].site).collect();
    Ok((tree, sites))
}

/// Leaf law over `{0,1}^S` (state index encoding) given the root bits.
fn forest_law(parts: &[(Vec<f64>, Vec<f64>, Vec<usize>)], roots: &[bool], n_sites: usize) -> Vec<f64> {
    let mut law = vec![0.0; 1 << n_sites];
    law[0] = 1.0;
    for ((minus, plus, sites), &root) in parts.iter().zip(roots) {
        let part = if root { plus } else { minus };
        let mut next = vec![0.0; law.len()];
        for (state, &p) in law.iter().enumerate().filter(|e| *e.1 != 0.0) {
            for (m, &q) in part.iter().enumerate() {
                let mut s = state;
                for (i, &site) in sites.iter().enumerate() {
                    if m >> i & 1 == 1 {
                        s |= 1 << site;
                    }
                }
                next[s] += p * q;
            }
        }
        law = next;
    }
    law
}

/// TV between the leaf laws under two root assignments, for the forest
/// itself and for its stringy unfolding: `(tree_tv, stringy_tv)`.
pub fn forest_data_processing(forest: &CoalescenceForest, roots_a: &[bool], roots_b: &[bool]) -> Result<(f64, f64)> {
    let n = forest.n_sites();
    if n > MAX_FOREST_SITES {
        return Err(Error::Capacity(format!("forest check supports at most {MAX_FOREST_SITES} sites, got {n}")));
    }
    let m = forest.trees().len();
    for r in [roots_a, roots_b] {
        if r.len() != m {
            return Err(Error::LengthMismatch { left: r.len(), right: m });
        }
    }
    let mut tree_parts = Vec::with_capacity(m);
    let mut stringy_parts = Vec::with_capacity(m);
    for j in 0..m {
        let (tree, sites) = forest_tree(forest, j)?;
        tree_parts.push((tree.leaf_law_given_root(-1), tree.leaf_law_given_root(1), sites.clone()));
        let stringy = build_stringy(&tree)?;
        stringy_parts.push((stringy.leaf_law_given_root(-1), stringy.leaf_law_given_root(1), sites));
    }
    let tv = |parts: &[(Vec<f64>, Vec<f64>, Vec<usize>)]| {
        crate::exact::tv_slices(&forest_law(parts, roots_a, n), &forest_law(parts, roots_b, n))
    };
    Ok((tv(&tree_parts), tv(&stringy_parts)))
}
