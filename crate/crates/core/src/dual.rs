//! The coalescing backward system read off a graphical construction.
//!
//! From the site `x` at forward time `t`, the lineage `B^{x,t}` runs
//! backward in time (backward time `s = t - forward time`), jumping along
//! every voting arrow it meets. `e(x,t)` is the first backward time at which
//! the lineage sits on a rerandomization mark and `Z(x,t)` is that mark's
//! bit. Duality: `eta_t(x) = Z(x,t)` if `e(x,t) <= t`, else
//! `eta_0(B^{x,t}_t)`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::config::SpinConfiguration;
use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::graphical::{sample_events, GraphicalEvents};
use crate::kernel::RateKernel;
use crate::rng::{replica_seed, rng_from, StreamKind};
use crate::sumtree::SumTree;

/// `e(x,t)` together with `Z(x,t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FirstRerandomization {
    /// The lineage meets no rerandomization mark on `[0, t]`.
    Never,
    At { backward_time: f64, bit: bool },
}

impl FirstRerandomization {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::At { .. })
    }
}

/// An occupied site's lineage group following an arrow backward in time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupMove {
    pub backward_time: f64,
    pub from: usize,
    pub to: usize,
}

/// One realization of the dual system on `[0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualTrace {
    horizon: f64,
    paths: Vec<Vec<(f64, usize)>>,
    first: Vec<FirstRerandomization>,
    lineage: Vec<usize>,
    moves: Vec<GroupMove>,
}

/// Sample the graphical construction under `seed` and trace its dual.
pub fn sample_dual(kernel: &RateKernel, t: f64, seed: u64) -> DualTrace {
    DualTrace::from_events(&sample_events(kernel, t, seed))
}

impl DualTrace {
    pub fn from_events(events: &GraphicalEvents) -> Self {
        let n = events.n_sites();
        let t = events.horizon();

        // Arrows in decreasing forward time, i.e. increasing backward time.
        let mut arrows: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|x| events.voting(x).iter().map(move |e| (t - e.time, x, e.target)))
            .collect();
        arrows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut paths: Vec<Vec<(f64, usize)>> = (0..n).map(|x| vec![(0.0, x)]).collect();
        let mut members: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
        let mut moves = Vec::new();
        for (s, from, to) in arrows {
            if members[from].is_empty() {
                continue;
            }
            moves.push(GroupMove { backward_time: s, from, to });
            let moving = std::mem::take(&mut members[from]);
            for &m in &moving {
                paths[m].push((s, to));
            }
            members[to].extend(moving);
        }
        let mut lineage = vec![0; n];
        let mut id = 0;
        for group in members.iter().filter(|g| !g.is_empty()) {
            for &m in group {
                lineage[m] = id;
            }
            id += 1;
        }

        let first = paths
            .iter()
            .map(|path| first_mark_on_path(events, path, t))
            .collect();
        Self { horizon: t, paths, first, lineage, moves }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_sites(&self) -> usize {
        self.paths.len()
    }

    /// `B^{x,t}` as `(backward jump time, new location)`, starting `(0, x)`.
    pub fn path(&self, x: usize) -> &[(f64, usize)] {
        &self.paths[x]
    }

    /// `B^{x,t}_s`.
    pub fn location(&self, x: usize, s: f64) -> usize {
        let path = &self.paths[x];
        let i = path.partition_point(|p| p.0 <= s);
        path[i.max(1) - 1].1
    }

    /// `B^{x,t}_t`.
    pub fn endpoint(&self, x: usize) -> usize {
        self.paths[x].last().expect("paths are nonempty").1
    }

    pub fn first_rerandomization(&self, x: usize) -> FirstRerandomization {
        self.first[x]
    }

    /// Lineage id of `x`; equal ids mean the lineages have coalesced by `t`.
    pub fn lineage(&self, x: usize) -> usize {
        self.lineage[x]
    }

    pub fn n_lineages(&self) -> usize {
        self.lineage.iter().max().map_or(0, |m| m + 1)
    }

    pub fn moves(&self) -> &[GroupMove] {
        &self.moves
    }
}

fn first_mark_on_path(events: &GraphicalEvents, path: &[(f64, usize)], t: f64) -> FirstRerandomization {
    for (i, &(start, site)) in path.iter().enumerate() {
        let end = path.get(i + 1).map_or(t, |p| p.0);
        // Backward window [start, end) is forward window (t - end, t - start].
        let marks = events.rerandomizations(site);
        let hi = marks.partition_point(|m| m.time <= t - start);
        if hi > 0 {
            let m = marks[hi - 1];
            if m.time > t - end {
                return FirstRerandomization::At { backward_time: t - m.time, bit: m.bit };
            }
        }
    }
    FirstRerandomization::Never
}

/// The duality formula applied sitewise.
pub fn dual_sample_config(trace: &DualTrace, eta0: &SpinConfiguration) -> SpinConfiguration {
    assert_eq!(eta0.len(), trace.n_sites());
    SpinConfiguration::from_bits((0..trace.n_sites()).map(|x| match trace.first[x] {
        FirstRerandomization::At { bit, .. } => bit,
        FirstRerandomization::Never => eta0.get(trace.endpoint(x)),
    }))
}

/// A space-time point of the coalescence forest.
#[derive(Clone, Debug, PartialEq)]
pub struct ForestNode {
    pub site: usize,
    /// Forward time: roots at 0, leaves at the horizon.
    pub time: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestTree {
    /// Node index of the root.
    pub root: usize,
    /// The root's site `x_j`.
    pub root_site: usize,
    /// `L_j`, increasing.
    pub leaves: Vec<usize>,
}

/// The trees `T_1..T_m` of a dual trace. Each lineage merge at backward time
/// `s` creates a branch node at the site arrived at, forward time `t - s`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalescenceForest {
    horizon: f64,
    nodes: Vec<ForestNode>,
    trees: Vec<ForestTree>,
    leaf_node: Vec<usize>,
}

pub fn extract_forest(trace: &DualTrace) -> CoalescenceForest {
    let n = trace.n_sites();
    let t = trace.horizon;
    let mut nodes: Vec<ForestNode> = (0..n)
        .map(|x| ForestNode { site: x, time: t, parent: None, children: Vec::new() })
        .collect();
    // Current top node of the group occupying each site.
    let mut top: Vec<Option<usize>> = (0..n).map(Some).collect();
    let link = |nodes: &mut Vec<ForestNode>, parent: usize, child: usize| {
        nodes[child].parent = Some(parent);
        nodes[parent].children.push(child);
    };
    for mv in &trace.moves {
        let moving = top[mv.from].take().expect("moves start at occupied sites");
        match top[mv.to] {
            None => top[mv.to] = Some(moving),
            Some(resident) => {
                let branch = nodes.len();
                nodes.push(ForestNode { site: mv.to, time: t - mv.backward_time, parent: None, children: Vec::new() });
                link(&mut nodes, branch, moving);
                link(&mut nodes, branch, resident);
                top[mv.to] = Some(branch);
            }
        }
    }
    let mut trees = Vec::new();
    for (site, top_node) in top.iter().enumerate() {
        let Some(top_node) = *top_node else { continue };
        let root = if t > 0.0 {
            let r = nodes.len();
            nodes.push(ForestNode { site, time: 0.0, parent: None, children: Vec::new() });
            link(&mut nodes, r, top_node);
            r
        } else {
            top_node
        };
        trees.push(ForestTree { root, root_site: site, leaves: Vec::new() });
    }
    let mut tree_of_root = vec![usize::MAX; nodes.len()];
    for (j, tree) in trees.iter().enumerate() {
        tree_of_root[tree.root] = j;
    }
    for x in 0..n {
        let mut v = x;
        while let Some(p) = nodes[v].parent {
            v = p;
        }
        trees[tree_of_root[v]].leaves.push(x);
    }
    CoalescenceForest { horizon: t, nodes, trees, leaf_node: (0..n).collect() }
}

impl CoalescenceForest {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn nodes(&self) -> &[ForestNode] {
        &self.nodes
    }

    pub fn trees(&self) -> &[ForestTree] {
        &self.trees
    }

    pub fn n_sites(&self) -> usize {
        self.leaf_node.len()
    }

    /// Node index of the leaf for site `x`.
    pub fn leaf_node(&self, x: usize) -> usize {
        self.leaf_node[x]
    }

    /// Duration of the edge above `node` (0 for roots).
    pub fn edge_duration(&self, node: usize) -> f64 {
        match self.nodes[node].parent {
            Some(p) => self.nodes[node].time - self.nodes[p].time,
            None => 0.0,
        }
    }

    /// Edges of tree `j` as `(parent, child, duration)`, parents first.
    pub fn edges(&self, j: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![self.trees[j].root];
        while let Some(v) = stack.pop() {
            for &c in self.nodes[v].children.iter().rev() {
                out.push((v, c, self.edge_duration(c)));
                stack.push(c);
            }
        }
        out
    }

    /// CSV `tree,parent,child,parent_site,child_site,duration`.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["tree", "parent", "child", "parent_site", "child_site", "duration"]);
        for j in 0..self.trees.len() {
            for (p, c, d) in self.edges(j) {
                table.push(vec![
                    j.to_string(),
                    p.to_string(),
                    c.to_string(),
                    self.nodes[p].site.to_string(),
                    self.nodes[c].site.to_string(),
                    fmt_f64(d),
                ]);
            }
        }
        table
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        Ok(self.to_table().write_to(w)?)
    }
}

/// The tree-indexed chain: each tree starts from its root bit and every
/// child keeps its parent's value with probability `(1 + e^{-s})/2` for an
/// edge of duration `s`, independently. Returns the leaf values by site.
pub fn tree_indexed_sample(forest: &CoalescenceForest, root_bits: &[bool], seed: u64) -> Result<SpinConfiguration> {
    if root_bits.len() != forest.trees.len() {
        return Err(Error::LengthMismatch { left: root_bits.len(), right: forest.trees.len() });
    }
    let mut rng = rng_from(seed, &[StreamKind::TreeSpins as u64]);
    let mut value = vec![false; forest.nodes.len()];
    for (j, tree) in forest.trees.iter().enumerate() {
        value[tree.root] = root_bits[j];
        for (p, c, d) in forest.edges(j) {
            let keep = rng.random::<f64>() < 0.5 * (1.0 + (-d).exp());
            value[c] = value[p] == keep;
        }
    }
    Ok(SpinConfiguration::from_bits((0..forest.n_sites()).map(|x| value[forest.leaf_node[x]])))
}

/// Monte Carlo summary of coalescence of the dual lineages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoalescenceStats {
    pub n_seeds: usize,
    pub horizon: f64,
    /// Fraction of seeds in which every lineage coalesced by the horizon.
    pub p_all_coalesced: f64,
    pub p_all_coalesced_stderr: f64,
    /// Mean meeting time of two distinct uniformly chosen lineages,
    /// censored at the horizon.
    pub mean_pair_time: f64,
    pub mean_pair_time_stderr: f64,
    /// Mean time until one lineage remains, censored at the horizon.
    pub mean_all_time: f64,
    pub mean_all_time_stderr: f64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Coalescing q-chains from every site up to backward time `t`; returns
/// (pair meeting time, all-coalescence time), each `min(time, t)`.
fn coalescence_run(kernel: &RateKernel, t: f64, seed: u64) -> (f64, f64) {
    let n = kernel.n_sites();
    let mut rng = rng_from(seed, &[StreamKind::Coalescence as u64]);
    if n < 2 {
        return (0.0, 0.0);
    }
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let rates: Vec<f64> = (0..n).map(|x| kernel.exit_rate(x)).collect();
    let mut tree = SumTree::new(&rates);
    let mut occupied = vec![true; n];
    let mut groups = n;
    let (mut pa, mut pb) = (a, b);
    let mut pair_time = None;
    let mut s = 0.0;
    loop {
        let total = tree.total();
        if total <= 0.0 {
            break;
        }
        let e: f64 = Exp1.sample(&mut rng);
        s += e / total;
        if s >= t {
            break;
        }
        let x = tree.find(rng.random::<f64>() * total).min(n - 1);
        let y = kernel.sample_target(x, &mut rng);
        tree.set(x, 0.0);
        occupied[x] = false;
        if occupied[y] {
            groups -= 1;
        } else {
            occupied[y] = true;
            tree.set(y, rates[y]);
        }
        if pa == x {
            pa = y;
        }
        if pb == x {
            pb = y;
        }
        if pair_time.is_none() && pa == pb {
            pair_time = Some(s);
        }
        if groups == 1 {
            return (pair_time.unwrap_or(s), s);
        }
    }
    (pair_time.unwrap_or(t), t)
}

/// Coalescence statistics over `n_seeds` independent realizations.
pub fn coalescence_stats(kernel: &RateKernel, t: f64, n_seeds: usize, seed: u64) -> Result<CoalescenceStats> {
    use rayon::prelude::*;
    if n_seeds == 0 {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon {t} is not >= 0")));
    }
    let runs: Vec<(f64, f64)> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| coalescence_run(kernel, t, replica_seed(seed, i)))
        .collect();
    let pair: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let all: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let done: Vec<f64> = runs
        .iter()
        .map(|r| if kernel.n_sites() < 2 || r.1 < t { 1.0 } else { 0.0 })
        .collect();
    let (p, p_se) = mean_stderr(&done);
    let (mp, mp_se) = mean_stderr(&pair);
    let (ma, ma_se) = mean_stderr(&all);
    Ok(CoalescenceStats {
        n_seeds,
        horizon: t,
        p_all_coalesced: p,
        p_all_coalesced_stderr: p_se,
        mean_pair_time: mp,
        mean_pair_time_stderr: mp_se,
        mean_all_time: ma,
        mean_all_time_stderr: ma_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphical::forward_run;

    fn mixed_kernel() -> RateKernel {
        RateKernel::from_rates(3, [(0, 1, 1.0), (0, 2, 0.5), (1, 2, 2.0), (2, 0, 0.7), (1, 0, 0.2)]).unwrap()
    }

    #[test]
    fn no_arrows_means_constant_paths() {
        let zero = RateKernel::from_rates(4, []).unwrap();
        let ev = sample_events(&zero, 2.0, 5);
        let trace = DualTrace::from_events(&ev);
        for x in 0..4 {
            assert_eq!(trace.path(x), &[(0.0, x)]);
            match (trace.first_rerandomization(x), ev.rerandomizations(x).last()) {
                (FirstRerandomization::Never, None) => {}
                (FirstRerandomization::At { backward_time, bit }, Some(m)) => {
                    assert!((backward_time - (2.0 - m.time)).abs() < 1e-12);
                    assert_eq!(bit, m.bit);
                }
                other => panic!("{other:?}"),
            }
        }
        let forest = extract_forest(&trace);
        assert_eq!(forest.trees().len(), 4);
        for (j, tree) in forest.trees().iter().enumerate() {
            assert_eq!(tree.leaves, vec![j]);
            assert_eq!(tree.root_site, j);
        }
    }

    #[test]
    fn zero_horizon() {
        let trace = sample_dual(&mixed_kernel(), 0.0, 1);
        assert!((0..3).all(|x| trace.path(x).len() == 1 && !trace.first_rerandomization(x).is_finite()));
        let eta0 = SpinConfiguration::from_bits([true, false, true]);
        assert_eq!(dual_sample_config(&trace, &eta0), eta0);
        let forest = extract_forest(&trace);
        assert_eq!(forest.trees().len(), 3);
        assert!(forest.edges(0).is_empty());
    }

    #[test]
    fn duality_matches_forward_pathwise() {
        for k in [mixed_kernel(), RateKernel::star(6).unwrap(), RateKernel::cycle(5).unwrap()] {
            let n = k.n_sites();
            for seed in 0..300u64 {
                let ev = sample_events(&k, 0.2 + (seed % 7) as f64 * 0.4, seed);
                let trace = DualTrace::from_events(&ev);
                let eta0 = SpinConfiguration::from_index(seed.wrapping_mul(0x9E37) % (1 << n), n);
                assert_eq!(dual_sample_config(&trace, &eta0), forward_run(&ev, &eta0), "seed {seed}");
            }
        }
    }

    #[test]
    fn forest_structure() {
        let k = RateKernel::cycle(6).unwrap();
        for seed in 0..200 {
            let t = 0.5 + (seed % 4) as f64;
            let trace = sample_dual(&k, t, seed);
            let forest = extract_forest(&trace);
            let mut seen = vec![false; 6];
            for (j, tree) in forest.trees().iter().enumerate() {
                assert_eq!(forest.nodes()[tree.root].site, tree.root_site);
                for &x in &tree.leaves {
                    assert!(!seen[x]);
                    seen[x] = true;
                    assert_eq!(trace.lineage(x), trace.lineage(tree.leaves[0]));
                    assert_eq!(trace.endpoint(x), tree.root_site);
                    let mut v = forest.leaf_node(x);
                    let mut total = 0.0;
                    while forest.nodes()[v].parent.is_some() {
                        let d = forest.edge_duration(v);
                        assert!(d > 0.0);
                        total += d;
                        v = forest.nodes()[v].parent.unwrap();
                    }
                    assert_eq!(v, tree.root);
                    assert!((total - t).abs() < 1e-12);
                }
                assert!(forest.nodes().iter().all(|n| n.children.len() <= 2));
                assert!(forest.edges(j).iter().all(|e| e.2 > 0.0));
            }
            assert!(seen.iter().all(|&s| s));
            assert_eq!(trace.n_lineages(), forest.trees().len());
        }
    }

    #[test]
    fn two_site_merge_creates_one_branch() {
        // Site 1 copies site 0 only; lineages meet at the first arrow.
        let k = RateKernel::from_rates(2, [(1, 0, 1.0)]).unwrap();
        for seed in 0..50 {
            let ev = sample_events(&k, 3.0, seed);
            let trace = DualTrace::from_events(&ev);
            let forest = extract_forest(&trace);
            match ev.voting(1).last() {
                None => assert_eq!(forest.trees().len(), 2),
                Some(arrow) => {
                    assert_eq!(forest.trees().len(), 1);
                    let branch: Vec<_> = forest.nodes().iter().filter(|n| n.children.len() == 2).collect();
                    assert_eq!(branch.len(), 1);
                    assert_eq!(branch[0].site, 0);
                    assert!((branch[0].time - arrow.time).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dependence_on_eta0_only_through_roots() {
        let k = mixed_kernel();
        for seed in 0..200 {
            let trace = sample_dual(&k, 0.7, seed);
            let forest = extract_forest(&trace);
            let roots: Vec<usize> = forest.trees().iter().map(|t| t.root_site).collect();
            let base = SpinConfiguration::from_index(seed % 8, 3);
            let out = dual_sample_config(&trace, &base);
            for x in (0..3).filter(|x| !roots.contains(x)) {
                let mut eta = base.clone();
                eta.flip(x);
                assert_eq!(dual_sample_config(&trace, &eta), out);
            }
        }
    }

    #[test]
    fn tree_indexed_edge_cases() {
        let k = RateKernel::from_rates(1, []).unwrap();
        let forest = extract_forest(&sample_dual(&k, 0.0, 1));
        for s in 0..20 {
            assert!(tree_indexed_sample(&forest, &[true], s).unwrap().get(0));
        }
        assert!(tree_indexed_sample(&forest, &[], 0).is_err());

        let forest = extract_forest(&sample_dual(&k, 1.0, 1));
        let n = 100_000;
        let kept = (0..n)
            .filter(|&i| tree_indexed_sample(&forest, &[true], i).unwrap().get(0))
            .count() as f64
            / n as f64;
        let p = 0.5 * (1.0 + (-1.0f64).exp());
        assert!((kept - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn coalescence_trivial_kernels() {
        let zero = RateKernel::from_rates(3, []).unwrap();
        let stats = coalescence_stats(&zero, 5.0, 100, 1).unwrap();
        assert_eq!(stats.p_all_coalesced, 0.0);
        assert_eq!(stats.mean_all_time, 5.0);
        assert!(coalescence_stats(&zero, 5.0, 0, 1).is_err());

        let stats = coalescence_stats(&RateKernel::cycle(4).unwrap(), 50.0, 1000, 2).unwrap();
        assert!(stats.p_all_coalesced >= 0.99);
    }
}
