//! The `b`-ary branching random walk on a reproducible random tree.
//!
//! Edge values are never stored. The value on the edge into a node is a pure
//! function of the seed and the node's path from the root (see
//! [`TreeRandomness`]), so depth-first search, level-order sweeps and
//! brute-force enumeration all see the same realized tree.

use rayon::prelude::*;
use thiserror::Error;

use crate::barrier::BarrierCurve;
use crate::counter::{derive, mix64, unit_f64};
use crate::dist::StepDistribution;

/// Largest depth at which extremes of an unbounded law are enumerated.
pub const MAX_UNBOUNDED_EXTREMES_DEPTH: usize = 14;

const EDGE_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrwError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Counter-based randomness of one realized tree.
///
/// * root key: `mix64(seed)`
/// * key of child `c` (0-based) at depth `d ≥ 1`: `derive(parent_key, (d << 32) | c)`
/// * uniform on the edge into a node: `unit_f64(mix64(key ^ 0xD1B54A32D192ED03))`
///
/// The edge value is `dist.sample(uniform)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeRandomness {
    pub seed: u64,
    pub b: usize,
}

impl TreeRandomness {
    pub fn new(seed: u64, b: usize) -> Self {
        assert!(b >= 2, "branching factor must be >= 2");
        Self { seed, b }
    }

    #[inline]
    pub fn root_key(&self) -> u64 {
        mix64(self.seed)
    }

    #[inline]
    pub fn child_key(&self, parent_key: u64, depth: usize, child: usize) -> u64 {
        derive(parent_key, ((depth as u64) << 32) | child as u64)
    }

    #[inline]
    pub fn edge_uniform(&self, key: u64) -> f64 {
        unit_f64(mix64(key ^ EDGE_SALT))
    }

    /// Increment on the edge into the node with this key.
    #[inline]
    pub fn edge_value(&self, dist: &StepDistribution, key: u64) -> f64 {
        dist.sample(self.edge_uniform(key))
    }
}

/// Exact (or budget-limited) offset of one realized tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetResult {
    /// `min over leaves of max_{k ≤ n} S_{v^k}`; an upper bound when the budget ran out.
    pub l_n: f64,
    /// Nodes generated by the search pass that settled `l_n` (each node at most once).
    pub nodes_explored: u64,
    /// Nodes generated over the greedy descent and all passes; the budget applies here.
    pub nodes_generated: u64,
    pub budget_exhausted: bool,
    /// Proven lower bound on `L_n`; equals `l_n` unless the budget ran out.
    pub lower_bound: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// Running maximum of the path positions, root included.
    mu: f64,
    pos: f64,
    key: u64,
}

/// Writes the `b` children of `parent` into `out`, sorted by running maximum.
#[inline]
fn expand(dist: &StepDistribution, rand: &TreeRandomness, parent: Node, depth: usize, out: &mut [Node]) {
    for (c, slot) in out.iter_mut().enumerate() {
        let key = rand.child_key(parent.key, depth, c);
        let pos = parent.pos + rand.edge_value(dist, key);
        *slot = Node { mu: parent.mu.max(pos), pos, key };
    }
    // insertion sort, stable on ties
    for i in 1..out.len() {
        let mut j = i;
        while j > 0 && out[j - 1].mu > out[j].mu {
            out.swap(j - 1, j);
            j -= 1;
        }
    }
}

struct SearchOutcome {
    best: Option<f64>,
    nodes: u64,
    exhausted: bool,
}

/// Depth-first search for the best leaf with running maximum `< bound`.
///
/// Nodes whose running maximum already reaches the current bound are
/// pruned; every leaf found tightens the bound. Children are visited in
/// increasing order of running maximum, so once one child is pruned its
/// later siblings are as well.
fn bounded_search(
    dist: &StepDistribution,
    rand: &TreeRandomness,
    n: usize,
    mut bound: f64,
    budget: u64,
) -> SearchOutcome {
    let b = rand.b;
    let root = Node { mu: 0.0, pos: 0.0, key: rand.root_key() };
    let mut nodes = 1u64;
    if root.mu >= bound {
        return SearchOutcome { best: None, nodes, exhausted: false };
    }
    if nodes + b as u64 > budget {
        return SearchOutcome { best: None, nodes, exhausted: true };
    }
    let mut buf = vec![root; n * b];
    let mut cursor = vec![0usize; n];
    expand(dist, rand, root, 1, &mut buf[..b]);
    nodes += b as u64;
    let mut best = None;
    let mut d = 0usize;
    loop {
        if cursor[d] == b {
            if d == 0 {
                break;
            }
            d -= 1;
            continue;
        }
        let child = buf[d * b + cursor[d]];
        cursor[d] += 1;
        if child.mu >= bound {
            cursor[d] = b;
            continue;
        }
        if d + 1 == n {
            bound = child.mu;
            best = Some(child.mu);
            cursor[d] = b;
            continue;
        }
        if nodes + b as u64 > budget {
            return SearchOutcome { best, nodes, exhausted: true };
        }
        let next = d + 1;
        expand(dist, rand, child, next + 1, &mut buf[next * b..(next + 1) * b]);
        nodes += b as u64;
        cursor[next] = 0;
        d = next;
    }
    SearchOutcome { best, nodes, exhausted: false }
}

/// Beam search under a barrier: nodes with running maximum `≥ barrier` are
/// dropped and the `width` lowest positions are kept at each level. Returns
/// the smallest leaf running maximum found, if any leaf survives.
fn beam_descent(
    dist: &StepDistribution,
    rand: &TreeRandomness,
    n: usize,
    width: usize,
    barrier: f64,
) -> (Option<f64>, u64) {
    let b = rand.b;
    let mut level = vec![Node { mu: 0.0, pos: 0.0, key: rand.root_key() }];
    let mut next = Vec::with_capacity(width * b);
    let mut nodes = 1u64;
    for depth in 1..=n {
        next.clear();
        for &parent in &level {
            for c in 0..b {
                let key = rand.child_key(parent.key, depth, c);
                let pos = parent.pos + rand.edge_value(dist, key);
                if pos < barrier {
                    next.push(Node { mu: parent.mu.max(pos), pos, key });
                }
            }
        }
        nodes += (level.len() * b) as u64;
        if next.is_empty() {
            return (None, nodes);
        }
        if next.len() > width {
            next.select_nth_unstable_by(width - 1, |a, b| a.pos.total_cmp(&b.pos));
            next.truncate(width);
        }
        std::mem::swap(&mut level, &mut next);
    }
    (Some(level.iter().map(|v| v.mu).fold(f64::INFINITY, f64::min)), nodes)
}

/// One greedy descent, always following the child with the smallest running maximum.
fn greedy_descent(dist: &StepDistribution, rand: &TreeRandomness, n: usize) -> (f64, u64) {
    let mut node = Node { mu: 0.0, pos: 0.0, key: rand.root_key() };
    let mut kids = vec![node; rand.b];
    for depth in 1..=n {
        expand(dist, rand, node, depth, &mut kids);
        node = kids[0];
    }
    (node.mu, 1 + (n * rand.b) as u64)
}

/// Width of the beam search that refines the greedy incumbent.
pub const INCUMBENT_BEAM_WIDTH: usize = 256;

/// `L_n = min over level-n nodes v of max_{0 ≤ k ≤ n} S_{v^k}` by branch-and-bound.
///
/// `dist` must already be centered so that the minimal speed is zero; this
/// is not checked. The incumbent starts at the value of one greedy descent,
/// improved by a beam search of width [`INCUMBENT_BEAM_WIDTH`] when that
/// costs at most a quarter of the budget. The search then runs in stages
/// with an aspiration bound `A` that grows by one standard deviation of the
/// step law per stage, each stage looking only for leaves below
/// `min(A, incumbent)`. A stage that finds a leaf is exact, since every leaf
/// below the bound was considered; a stage that finds none proves `L_n ≥ A`.
/// The last possible stage uses the incumbent itself.
///
/// If more than `node_budget` nodes would be generated in total, the best
/// leaf value seen so far is returned with `budget_exhausted` set; it is then
/// an upper bound on `L_n`, and `lower_bound` holds the last aspiration
/// bound that was refuted.
pub fn exact_offset(dist: &StepDistribution, rand: &TreeRandomness, n: usize, node_budget: u64) -> OffsetResult {
    let finish = |l_n, lower_bound, nodes_explored, nodes_generated, budget_exhausted| OffsetResult {
        l_n,
        nodes_explored,
        nodes_generated,
        budget_exhausted,
        lower_bound,
        n,
        seed: rand.seed,
    };
    if n == 0 {
        return finish(0.0, 0.0, 1, 1, false);
    }
    let (mut incumbent, greedy_nodes) = greedy_descent(dist, rand, n);
    let mut total = greedy_nodes;
    let beam_cost = (n * rand.b * INCUMBENT_BEAM_WIDTH) as u64;
    if beam_cost <= node_budget / 4 {
        let (best, nodes) = beam_descent(dist, rand, n, INCUMBENT_BEAM_WIDTH, f64::INFINITY);
        incumbent = incumbent.min(best.expect("an unconstrained beam reaches level n"));
        total += nodes;
    }
    if total >= node_budget {
        return finish(incumbent, 0.0, greedy_nodes, total, true);
    }
    let step = dist.variance().sqrt();
    let mut refuted = 0.0;
    let mut aspiration = step;
    loop {
        let bound = aspiration.min(incumbent);
        let out = bounded_search(dist, rand, n, bound, node_budget - total);
        total += out.nodes;
        if out.exhausted {
            return finish(out.best.unwrap_or(incumbent).min(incumbent), refuted, out.nodes, total, true);
        }
        if let Some(best) = out.best {
            return finish(best, best, out.nodes, total, false);
        }
        if bound >= incumbent {
            return finish(incumbent, incumbent, out.nodes, total, false);
        }
        refuted = bound;
        aspiration += step;
    }
}

/// Outcome of a level-order population count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountResult {
    /// Surviving level-`n` particles; meaningless when `truncated`.
    pub count: u64,
    pub truncated: bool,
    /// Largest live population over all levels swept.
    pub peak_population: u64,
    /// Children generated over the sweep.
    pub nodes_generated: u64,
}

/// Level-order sweep keeping particles for which `keep(level, position)` holds
/// at every level `0..=n`. Killing is exact because the constraint applies
/// to every prefix of a path.
pub fn sweep_count<F>(dist: &StepDistribution, rand: &TreeRandomness, n: usize, pop_budget: u64, keep: F) -> CountResult
where
    F: Fn(usize, f64) -> bool,
{
    let mut result = CountResult { count: 0, truncated: false, peak_population: 1, nodes_generated: 0 };
    if !keep(0, 0.0) {
        result.peak_population = 0;
        return result;
    }
    let mut frontier: Vec<(f64, u64)> = vec![(0.0, rand.root_key())];
    let mut next: Vec<(f64, u64)> = Vec::new();
    for level in 1..=n {
        next.clear();
        for &(pos, key) in &frontier {
            for c in 0..rand.b {
                let ck = rand.child_key(key, level, c);
                let p = pos + rand.edge_value(dist, ck);
                if keep(level, p) {
                    next.push((p, ck));
                }
            }
        }
        result.nodes_generated += (frontier.len() * rand.b) as u64;
        std::mem::swap(&mut frontier, &mut next);
        result.peak_population = result.peak_population.max(frontier.len() as u64);
        if frontier.len() as u64 > pop_budget {
            result.truncated = true;
            return result;
        }
        if frontier.is_empty() {
            return result;
        }
    }
    result.count = frontier.len() as u64;
    result
}

/// Number of level-`n` particles whose path stays `≤ barrier` at every level.
pub fn count_below_barrier(
    dist: &StepDistribution,
    rand: &TreeRandomness,
    n: usize,
    barrier: f64,
    pop_budget: u64,
) -> CountResult {
    sweep_count(dist, rand, n, pop_budget, |_, s| s <= barrier)
}

/// Per-level open windows `(lower, upper)` derived from a barrier curve.
///
/// Level `j` belongs to window `k = min(⌊j/(εn)⌋, 1/ε − 1)`, with
/// `lower_k = (s_k − δ)·n^{1/3}` and `upper = l2·n^{1/3}`. A level sitting
/// exactly on a window boundary (`j = kεn`, `k ≥ 1`) must lie in both
/// neighbouring windows.
pub fn level_windows(curve: &BarrierCurve, n: usize, l2: f64) -> Result<Vec<(f64, f64)>, BrwError> {
    let k_count = curve.inv_epsilon;
    if k_count > n {
        return Err(BrwError::Config(format!("εn < 1: {k_count} windows for {n} levels")));
    }
    if curve.s.len() < k_count {
        return Err(BrwError::Config("barrier curve is shorter than its window count".into()));
    }
    let scale = (n as f64).cbrt();
    let lower = |k: usize| (curve.s[k] - curve.delta) * scale;
    let upper = l2 * scale;
    Ok((0..=n)
        .map(|j| {
            let raw = j * k_count / n;
            let k = raw.min(k_count - 1);
            let mut lo = lower(k);
            if (j * k_count).is_multiple_of(n) && (1..k_count).contains(&raw) {
                lo = lo.max(lower(raw - 1));
            }
            (lo, upper)
        })
        .collect())
}

/// Number of level-`n` particles whose path stays strictly inside the
/// per-level windows of [`level_windows`].
pub fn count_windowed(
    dist: &StepDistribution,
    rand: &TreeRandomness,
    n: usize,
    curve: &BarrierCurve,
    l2: f64,
    pop_budget: u64,
) -> Result<CountResult, BrwError> {
    let windows = level_windows(curve, n, l2)?;
    Ok(sweep_count(dist, rand, n, pop_budget, |j, s| windows[j].0 < s && s < windows[j].1))
}

/// Minimum and maximum level-`n` position of one realized tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub seed: u64,
    pub min: f64,
    pub max: f64,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremesSummary {
    pub n: usize,
    pub trials: Vec<Extremes>,
    pub mean_min_speed: f64,
    pub median_min_speed: f64,
    pub mean_max_speed: f64,
    pub median_max_speed: f64,
}

#[allow(clippy::too_many_arguments)]
fn extremes_dfs(
    dist: &StepDistribution,
    rand: &TreeRandomness,
    n: usize,
    (lo, hi): (f64, f64),
    depth: usize,
    pos: f64,
    key: u64,
    acc: &mut Extremes,
) {
    acc.nodes += 1;
    if depth == n {
        acc.min = acc.min.min(pos);
        acc.max = acc.max.max(pos);
        return;
    }
    let rest = (n - depth) as f64;
    if pos + rest * lo >= acc.min && pos + rest * hi <= acc.max {
        return;
    }
    for c in 0..rand.b {
        let ck = rand.child_key(key, depth + 1, c);
        let p = pos + rand.edge_value(dist, ck);
        extremes_dfs(dist, rand, n, (lo, hi), depth + 1, p, ck, acc);
    }
}

/// `m_n` and `M_n` of one tree; bounded laws prune with the support, unbounded
/// ones are enumerated up to depth [`MAX_UNBOUNDED_EXTREMES_DEPTH`].
pub fn tree_extremes(dist: &StepDistribution, rand: &TreeRandomness, n: usize) -> Result<Extremes, BrwError> {
    if !dist.is_bounded() && n > MAX_UNBOUNDED_EXTREMES_DEPTH {
        return Err(BrwError::Unsupported(format!(
            "extremes of an unbounded law need n <= {MAX_UNBOUNDED_EXTREMES_DEPTH}, got {n}"
        )));
    }
    let mut acc = Extremes { seed: rand.seed, min: f64::INFINITY, max: f64::NEG_INFINITY, nodes: 0 };
    extremes_dfs(dist, rand, n, dist.support(), 0, 0.0, rand.root_key(), &mut acc);
    Ok(acc)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Monte Carlo estimates of `m_n/n` and `M_n/n` over independent trees.
pub fn mc_extremes(dist: &StepDistribution, seeds: &[u64], b: usize, n: usize) -> Result<ExtremesSummary, BrwError> {
    if seeds.is_empty() {
        return Err(BrwError::Config("need at least one trial".into()));
    }
    if n == 0 {
        return Err(BrwError::Config("need n >= 1".into()));
    }
    let trials = seeds
        .par_iter()
        .map(|&seed| tree_extremes(dist, &TreeRandomness::new(seed, b), n))
        .collect::<Result<Vec<_>, _>>()?;
    let nf = n as f64;
    let mut mins: Vec<f64> = trials.iter().map(|t| t.min / nf).collect();
    let mut maxs: Vec<f64> = trials.iter().map(|t| t.max / nf).collect();
    let k = trials.len() as f64;
    Ok(ExtremesSummary {
        n,
        mean_min_speed: mins.iter().sum::<f64>() / k,
        mean_max_speed: maxs.iter().sum::<f64>() / k,
        median_min_speed: median(&mut mins),
        median_max_speed: median(&mut maxs),
        trials,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Every root-to-leaf path of the realized tree, as position sequences.
    pub fn all_paths(dist: &StepDistribution, rand: &TreeRandomness, n: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut path = vec![0.0];
        walk(dist, rand, n, rand.root_key(), &mut path, &mut out);
        out
    }

    fn walk(
        dist: &StepDistribution,
        rand: &TreeRandomness,
        n: usize,
        key: u64,
        path: &mut Vec<f64>,
        out: &mut Vec<Vec<f64>>,
    ) {
        let depth = path.len() - 1;
        if depth == n {
            out.push(path.clone());
            return;
        }
        for c in 0..rand.b {
            let ck = rand.child_key(key, depth + 1, c);
            let x = dist.sample(rand.edge_uniform(ck));
            path.push(path[depth] + x);
            walk(dist, rand, n, ck, path, out);
            path.pop();
        }
    }

    pub fn brute_offset(dist: &StepDistribution, rand: &TreeRandomness, n: usize) -> f64 {
        all_paths(dist, rand, n)
            .iter()
            .map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}
