//! Quenched random-walk simulation on tree environments and finite kernels,
//! plus the path statistics built on traces: hitting times, speed estimates,
//! regeneration times, visit counts, and trap events.
//!
//! A walk keeps a spine of (key, neighborhood) pairs from the root to its
//! current vertex, so stepping is O(1) amortized and never materializes more
//! of the tree than the walk touches. Visited vertices get small arena ids;
//! the arena records parent links and the two conductances (parent edge, top
//! child edge) that the trap statistics need, so traces are self-contained.
//!
//! Dust-leaf convention: stepping onto the virtual dust leaf and back takes
//! two time steps during which the reported position and depth stay those of
//! the real parent vertex.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::KernelMatrix;
use crate::pwit::{Environment, VertexId, VertexNeighborhood};

/// One transition of a tree walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    /// To the parent vertex.
    Up,
    /// To the child with this 0-based index in the descending conductance
    /// list.
    Down(u32),
    /// Onto the virtual dust leaf.
    DustOut,
    /// Back from the dust leaf (always follows DustOut).
    DustBack,
}

/// Arena record for one visited vertex.
#[derive(Clone, Debug)]
pub struct NodeInfo {
    /// (parent arena id, 1-based child index); None at the root.
    pub parent: Option<(u32, u32)>,
    pub depth: u32,
    /// Conductance of the edge to the parent; 0.0 at the root.
    pub parent_conductance: f64,
    /// Largest child-edge conductance; 0.0 if no children above cutoff.
    pub top_child_conductance: f64,
}

/// A simulated walk: per-step depths, positions (arena ids), moves, and the
/// arena of visited vertices.
#[derive(Clone, Debug)]
pub struct WalkTrace {
    depths: Vec<u32>,   // length horizon + 1
    node_ids: Vec<u32>, // length horizon + 1; dust steps report the parent
    moves: Vec<Move>,   // length horizon
    nodes: Vec<NodeInfo>,
    dust_excursions: u64,
}

impl WalkTrace {
    pub fn horizon(&self) -> u64 {
        self.moves.len() as u64
    }

    /// Reported depth |X_m| for m = 0..=horizon.
    pub fn depths(&self) -> &[u32] {
        &self.depths
    }

    /// Arena id of the occupied vertex for m = 0..=horizon.
    pub fn node_ids(&self) -> &[u32] {
        &self.node_ids
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn node(&self, id: u32) -> &NodeInfo {
        &self.nodes[id as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dust_excursions(&self) -> u64 {
        self.dust_excursions
    }

    /// True if the walker sits on the dust leaf at time m.
    pub fn in_dust(&self, m: usize) -> bool {
        m > 0 && self.moves[m - 1] == Move::DustOut
    }

    /// Reconstructs the tree path of an arena node.
    pub fn vertex_path(&self, id: u32) -> VertexId {
        let mut indices = Vec::new();
        let mut cur = id;
        while let Some((parent, k)) = self.nodes[cur as usize].parent {
            indices.push(k);
            cur = parent;
        }
        indices.reverse();
        VertexId::from_path(&indices).expect("arena indices are 1-based")
    }
}

enum StepChoice {
    Parent,
    Child(usize),
    Dust,
}

/// Samples one transition from a neighborhood: probabilities proportional to
/// the edge conductances (parent, children, dust).
fn choose_step<R: Rng + ?Sized>(nb: &VertexNeighborhood, rng: &mut R) -> Result<StepChoice> {
    let rho = nb.rho();
    if !(rho > 0.0) {
        return Err(Error::Degenerate(format!(
            "vertex weight {rho} is not positive"
        )));
    }
    let mut u = rng.gen::<f64>() * rho;
    if let Some(pc) = nb.parent_conductance {
        if u < pc {
            return Ok(StepChoice::Parent);
        }
        u -= pc;
    }
    for (i, &c) in nb.children.iter().enumerate() {
        if u < c {
            return Ok(StepChoice::Child(i));
        }
        u -= c;
    }
    if nb.dust_mass > 0.0 {
        return Ok(StepChoice::Dust);
    }
    // Floating-point fallback: land on the heaviest available edge.
    if !nb.children.is_empty() {
        Ok(StepChoice::Child(0))
    } else {
        Ok(StepChoice::Parent)
    }
}

/// Runs a walk of `steps` transitions from the root.
pub fn run_walk<E: Environment, R: Rng + ?Sized>(
    env: &E,
    steps: u64,
    rng: &mut R,
) -> Result<WalkTrace> {
    if steps == 0 {
        return Err(Error::Domain("walk needs at least one step".into()));
    }
    let (root_key, root_nb) = env.root()?;
    let mut nodes = vec![NodeInfo {
        parent: None,
        depth: 0,
        parent_conductance: 0.0,
        top_child_conductance: root_nb.children.first().copied().unwrap_or(0.0),
    }];
    // Neighborhoods of visited vertices, for cheap re-descent.
    let mut memo: Vec<Option<(E::Key, VertexNeighborhood)>> =
        vec![Some((root_key.clone(), root_nb.clone()))];
    let mut child_ids: HashMap<(u32, u32), u32> = HashMap::new();

    let cap = (steps + 1) as usize;
    let mut depths = Vec::with_capacity(cap);
    let mut node_ids = Vec::with_capacity(cap);
    let mut moves = Vec::with_capacity(steps as usize);
    depths.push(0u32);
    node_ids.push(0u32);

    // Spine of arena ids root -> current; neighborhoods live in `memo`.
    let mut spine: Vec<u32> = vec![0];
    let mut in_dust = false;
    let mut dust_excursions = 0u64;

    for _ in 0..steps {
        let cur = *spine.last().unwrap();
        if in_dust {
            in_dust = false;
            moves.push(Move::DustBack);
            depths.push(nodes[cur as usize].depth);
            node_ids.push(cur);
            continue;
        }
        let nb_ref = memo[cur as usize].as_ref().unwrap();
        let choice = choose_step(&nb_ref.1, rng)?;
        match choice {
            StepChoice::Parent => {
                spine.pop();
                let up = *spine.last().ok_or_else(|| {
                    Error::Degenerate("walk attempted to leave the root upward".into())
                })?;
                moves.push(Move::Up);
                depths.push(nodes[up as usize].depth);
                node_ids.push(up);
            }
            StepChoice::Child(i) => {
                let id = match child_ids.entry((cur, i as u32 + 1)) {
                    Entry::Occupied(e) => *e.get(),
                    Entry::Vacant(e) => {
                        let (key, nb) = memo[cur as usize].as_ref().unwrap();
                        let (child_key, child_nb) = env.child(key, nb, i)?;
                        let id = nodes.len() as u32;
                        nodes.push(NodeInfo {
                            parent: Some((cur, i as u32 + 1)),
                            depth: nodes[cur as usize].depth + 1,
                            parent_conductance: child_nb.parent_conductance.unwrap(),
                            top_child_conductance: child_nb
                                .children
                                .first()
                                .copied()
                                .unwrap_or(0.0),
                        });
                        memo.push(Some((child_key, child_nb)));
                        *e.insert(id)
                    }
                };
                spine.push(id);
                moves.push(Move::Down(i as u32));
                depths.push(nodes[id as usize].depth);
                node_ids.push(id);
            }
            StepChoice::Dust => {
                in_dust = true;
                dust_excursions += 1;
                moves.push(Move::DustOut);
                depths.push(nodes[cur as usize].depth);
                node_ids.push(cur);
            }
        }
    }
    Ok(WalkTrace {
        depths,
        node_ids,
        moves,
        nodes,
        dust_excursions,
    })
}

/// First time the walk reaches each requested depth; None if never within the
/// horizon.
pub fn hitting_times(trace: &WalkTrace, levels: &[u32]) -> Result<Vec<(u32, Option<u64>)>> {
    if levels.iter().any(|&l| l == 0) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "levels must be positive and strictly ascending".into(),
        ));
    }
    let max_level = levels.last().copied().unwrap_or(0);
    let mut first_hit: Vec<Option<u64>> = vec![None; max_level as usize + 1];
    for (t, &d) in trace.depths().iter().enumerate() {
        if d <= max_level && first_hit[d as usize].is_none() {
            first_hit[d as usize] = Some(t as u64);
        }
    }
    Ok(levels
        .iter()
        .map(|&l| (l, first_hit[l as usize]))
        .collect())
}

/// Speed statistics of one trace.
#[derive(Clone, Copy, Debug)]
pub struct SpeedEstimate {
    /// Depth gained per step after the burn-in offset.
    pub point: f64,
    /// min over dyadic windows m = 2^k ≤ horizon of depth(m)/m, a liminf
    /// proxy.
    pub windowed_min: f64,
}

pub fn speed_estimate(trace: &WalkTrace, burn_in_fraction: f64) -> Result<SpeedEstimate> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::Domain(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    let h = trace.horizon();
    let b = (burn_in_fraction * h as f64).floor() as u64;
    let point = (trace.depths()[h as usize] as f64 - trace.depths()[b as usize] as f64)
        / (h - b) as f64;
    let windowed_min = dyadic_profile(trace)
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::INFINITY, f64::min);
    Ok(SpeedEstimate {
        point,
        windowed_min,
    })
}

/// (m, depth(m)/m) for m = 2^k ≤ horizon.
pub fn dyadic_profile(trace: &WalkTrace) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    let mut m = 1u64;
    while m <= trace.horizon() {
        out.push((m, trace.depths()[m as usize] as f64 / m as f64));
        m *= 2;
    }
    out
}

/// Regeneration times of a trace: steps after which the depth never drops
/// back.
#[derive(Clone, Debug)]
pub struct RegenerationRecord {
    /// Ascending accepted regeneration times.
    pub times: Vec<u64>,
    /// Depth at each accepted time.
    pub levels: Vec<u32>,
    /// Horizon margin used for censoring.
    pub guard: u64,
}

impl RegenerationRecord {
    /// Mean gap between consecutive accepted regeneration times.
    pub fn mean_gap(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let span = (self.times.last().unwrap() - self.times[0]) as f64;
        Some(span / (self.times.len() - 1) as f64)
    }
}

/// Finds all k with depth(k) < depth(u) for every u in (k, horizon], then
/// censors candidates within `guard` of the horizon (the definition quantifies
/// over an infinite future; near-horizon candidates are unverifiable).
pub fn regeneration_times(trace: &WalkTrace, guard: u64) -> Result<RegenerationRecord> {
    if guard >= trace.horizon() {
        return Err(Error::Domain(format!(
            "guard {guard} must be below the horizon {}",
            trace.horizon()
        )));
    }
    Ok(regenerations_from_depths(trace.depths(), guard))
}

fn regenerations_from_depths(depths: &[u32], guard: u64) -> RegenerationRecord {
    let horizon = depths.len() as u64 - 1;
    let cutoff = horizon - guard;
    let mut times = Vec::new();
    let mut levels = Vec::new();
    let mut suffix_min = u32::MAX;
    for k in (0..depths.len() - 1).rev() {
        suffix_min = suffix_min.min(depths[k + 1]);
        if depths[k] < suffix_min && k as u64 <= cutoff {
            times.push(k as u64);
            levels.push(depths[k]);
        }
    }
    times.reverse();
    levels.reverse();
    RegenerationRecord {
        times,
        levels,
        guard,
    }
}

/// Occupation and exploration counts of a trace.
#[derive(Clone, Debug)]
pub struct VisitCounts {
    /// Time steps spent at the root (dust excursions excluded).
    pub l_root: u64,
    /// Per vertex: jumps from it that do not go to its parent (downward moves
    /// and dust entries).
    pub l: HashMap<u32, u64>,
    /// g[n] = number of distinct visited vertices of depth ≤ n.
    pub g: Vec<u64>,
}

pub fn visit_counts(trace: &WalkTrace) -> VisitCounts {
    let mut l_root = 0u64;
    let mut l: HashMap<u32, u64> = HashMap::new();
    let mut visited: Vec<bool> = vec![false; trace.node_count()];
    let mut max_depth = 0u32;
    for t in 0..trace.depths().len() {
        if trace.in_dust(t) {
            continue;
        }
        let id = trace.node_ids()[t];
        if !visited[id as usize] {
            visited[id as usize] = true;
            max_depth = max_depth.max(trace.node(id).depth);
        }
        if id == 0 {
            l_root += 1;
        }
        if t < trace.moves().len() {
            match trace.moves()[t] {
                Move::Down(_) | Move::DustOut => *l.entry(id).or_insert(0) += 1,
                Move::Up | Move::DustBack => {}
            }
        }
    }
    let mut per_level = vec![0u64; max_depth as usize + 1];
    for (id, &seen) in visited.iter().enumerate() {
        if seen {
            per_level[trace.node(id as u32).depth as usize] += 1;
        }
    }
    let g = per_level
        .iter()
        .scan(0u64, |acc, &c| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    VisitCounts { l_root, l, g }
}

/// One trap event: first visit to a small-parent-edge vertex and the time to
/// get tree-distance 2 away from it.
#[derive(Clone, Debug)]
pub struct TrapEvent {
    pub node: u32,
    pub c_parent: f64,
    pub c_top_child: f64,
    pub t_v: u64,
    /// First time after t_v at tree distance 2 from the vertex; None if
    /// censored by the horizon.
    pub s_v: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct TrapStats {
    pub events: Vec<TrapEvent>,
    pub threshold: f64,
}

impl TrapStats {
    /// Uncensored durations S_v − T_v.
    pub fn uncensored_durations(&self) -> Vec<u64> {
        self.events
            .iter()
            .filter_map(|e| e.s_v.map(|s| s - e.t_v))
            .collect()
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.events.is_empty() {
            return 0.0;
        }
        self.events.iter().filter(|e| e.s_v.is_none()).count() as f64 / self.events.len() as f64
    }
}

/// Tracks tree distance from a fixed vertex while replaying moves: the
/// distance is (cur_depth − lca_depth) + (v_depth − lca_depth), plus one
/// during dust excursions.
struct DistanceTracker {
    event_idx: usize,
    /// Arena ids of the root → v chain, indexed by depth.
    chain: Vec<u32>,
    v_depth: u32,
    lca_depth: u32,
}

/// Extracts trap events: for each first visit to a vertex v with parent-edge
/// conductance below `threshold`, the visit time T_v and the first later time
/// S_v at tree distance 2 from v.
pub fn trap_events(trace: &WalkTrace, threshold: f64) -> Result<TrapStats> {
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!(
            "trap threshold must be positive, got {threshold}"
        )));
    }
    let mut events: Vec<TrapEvent> = Vec::new();
    let mut trackers: Vec<DistanceTracker> = Vec::new();
    let mut seen: Vec<bool> = vec![false; trace.node_count()];

    for t in 0..trace.depths().len() {
        let id = trace.node_ids()[t];
        let is_dust = trace.in_dust(t);

        if !is_dust && !seen[id as usize] {
            seen[id as usize] = true;
            let info = trace.node(id);
            if info.parent.is_some() && info.parent_conductance < threshold {
                let mut chain = Vec::with_capacity(info.depth as usize + 1);
                let mut cur = id;
                loop {
                    chain.push(cur);
                    match trace.node(cur).parent {
                        Some((p, _)) => cur = p,
                        None => break,
                    }
                }
                chain.reverse();
                trackers.push(DistanceTracker {
                    event_idx: events.len(),
                    chain,
                    v_depth: info.depth,
                    lca_depth: info.depth,
                });
                events.push(TrapEvent {
                    node: id,
                    c_parent: info.parent_conductance,
                    c_top_child: info.top_child_conductance,
                    t_v: t as u64,
                    s_v: None,
                });
            }
        }

        if t >= trace.moves().len() {
            break;
        }
        let mv = trace.moves()[t];
        let next_id = trace.node_ids()[t + 1];
        let next_depth = trace.depths()[t + 1];
        let next_dust = mv == Move::DustOut;
        trackers.retain_mut(|tr| {
            match mv {
                Move::Up => {
                    tr.lca_depth = tr.lca_depth.min(next_depth);
                }
                Move::Down(_) => {
                    // Descending back toward v along its chain moves the LCA
                    // down with the walker.
                    if next_depth == tr.lca_depth + 1
                        && tr.lca_depth < tr.v_depth
                        && tr.chain[next_depth as usize] == next_id
                    {
                        tr.lca_depth = next_depth;
                    }
                }
                Move::DustOut | Move::DustBack => {}
            }
            let dist = (next_depth - tr.lca_depth) as u64
                + (tr.v_depth - tr.lca_depth) as u64
                + u64::from(next_dust);
            if dist >= 2 {
                events[tr.event_idx].s_v = Some(t as u64 + 1);
                false
            } else {
                true
            }
        });
    }
    Ok(TrapStats {
        events,
        threshold,
    })
}

/// Monte Carlo estimate of the escape probability β(v): the fraction of walks
/// started at v that do not hit parent(v) within `max_steps`.
///
/// Finite max_steps makes "never returns" a superset event, so the estimate is
/// biased upward; pair it with [`crate::pwit::escape_prob_bracket`].
pub fn escape_prob_mc<E: Environment, R: Rng + ?Sized>(
    env: &E,
    v: &VertexId,
    replicas: u64,
    max_steps: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if v.depth() == 0 {
        return Err(Error::Domain(
            "escape probability is defined for vertices with a parent".into(),
        ));
    }
    if replicas == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    // Spine root -> v, shared by all replicas.
    let mut base: Vec<(E::Key, VertexNeighborhood)> = Vec::with_capacity(v.depth() + 1);
    base.push(env.root()?);
    for &k in v.path() {
        let (key, nb) = {
            let (key, nb) = base.last().unwrap();
            env.child(key, nb, (k - 1) as usize)?
        };
        base.push((key, nb));
    }
    let parent_len = base.len() - 1;
    let mut escapes = 0u64;
    for _ in 0..replicas {
        let mut spine = base.clone();
        let mut in_dust = false;
        let mut survived = true;
        for _ in 0..max_steps {
            if in_dust {
                in_dust = false;
                continue;
            }
            let nb = &spine.last().unwrap().1;
            match choose_step(nb, rng)? {
                StepChoice::Parent => {
                    spine.pop();
                    if spine.len() == parent_len {
                        survived = false;
                        break;
                    }
                }
                StepChoice::Child(i) => {
                    let next = {
                        let (key, nb) = spine.last().unwrap();
                        env.child(key, nb, i)?
                    };
                    spine.push(next);
                }
                StepChoice::Dust => in_dust = true,
            }
        }
        if survived {
            escapes += 1;
        }
    }
    let p = escapes as f64 / replicas as f64;
    let stderr = (p * (1.0 - p) / replicas as f64).sqrt();
    Ok((p, stderr))
}

/// Samples the next state of the finite-kernel chain from row `v`.
fn kernel_step<R: Rng + ?Sized>(k: &KernelMatrix, v: usize, rng: &mut R) -> usize {
    let n = k.n();
    let row = &k.entries()[v * n..(v + 1) * n];
    let mut u = rng.gen::<f64>();
    for (j, &p) in row.iter().enumerate() {
        if u < p {
            return j;
        }
        u -= p;
    }
    // Floating-point fallback: heaviest entry.
    row.iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(j, _)| j)
        .unwrap()
}

/// Monte Carlo frequency of r-step returns to `v` on a finite kernel.
pub fn mc_return_frequency<R: Rng + ?Sized>(
    k: &KernelMatrix,
    v: usize,
    r: usize,
    walks: u64,
    rng: &mut R,
) -> Result<f64> {
    if v >= k.n() {
        return Err(Error::Domain(format!(
            "vertex {v} out of range for n = {}",
            k.n()
        )));
    }
    let mut returns = 0u64;
    for _ in 0..walks {
        let mut x = v;
        for _ in 0..r {
            x = kernel_step(k, x, rng);
        }
        if x == v {
            returns += 1;
        }
    }
    Ok(returns as f64 / walks as f64)
}

/// Per-state occupation counts of the finite-kernel chain started at 0.
pub fn kernel_occupancy<R: Rng + ?Sized>(
    k: &KernelMatrix,
    steps: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; k.n()];
    let mut x = 0usize;
    counts[0] += 1;
    for _ in 0..steps {
        x = kernel_step(k, x, rng);
        counts[x] += 1;
    }
    Ok(counts)
}
