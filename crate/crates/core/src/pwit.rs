//! Lazy, deterministic generation of the Poisson weighted infinite tree and
//! per-vertex quantities: neighborhoods, conductance ratios, escape-probability
//! brackets.
//!
//! Every vertex owns a random stream derived by hash-chaining the master seed
//! along its path, so any part of the tree can be regenerated on demand in
//! O(1) per step without storing state, and revisits always see the identical
//! environment. Sub-cutoff child mass is aggregated into a single virtual
//! "dust" leaf of conductance small_jump_mean(cutoff), which preserves the
//! vertex weight ρ exactly; the walker may step to the dust leaf but must step
//! straight back.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::levy::{LevyMeasureSpec, LevySampler};
use crate::seeding::{self, StreamSeed};

/// Default bound on the memoized-neighborhood cache.
pub const DEFAULT_CACHE_LIMIT: usize = 1_000_000;
/// Default node budget for the escape-probability bracket recursion.
pub const DEFAULT_BRACKET_BUDGET: usize = 100_000;

/// Tree vertex: a path of 1-based child indices from the root (empty = root).
/// Children are indexed by descending conductance, so index 1 is the heaviest
/// child edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VertexId(Vec<u32>);

impl VertexId {
    pub fn root() -> Self {
        VertexId(Vec::new())
    }

    /// Builds a vertex from explicit 1-based indices.
    pub fn from_path(path: &[u32]) -> Result<Self> {
        if path.iter().any(|&k| k == 0) {
            return Err(Error::Domain("child indices are 1-based".into()));
        }
        Ok(VertexId(path.to_vec()))
    }

    pub fn child(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("child indices are 1-based".into()));
        }
        let mut path = self.0.clone();
        path.push(k);
        Ok(VertexId(path))
    }

    pub fn parent(&self) -> Option<VertexId> {
        if self.0.is_empty() {
            None
        } else {
            Some(VertexId(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    /// Index of this vertex among its siblings (1-based); None at the root.
    pub fn last_index(&self) -> Option<u32> {
        self.0.last().copied()
    }
}

impl fmt::Display for VertexId {
    /// Slash-joined indices; the root prints as "/".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "/");
        }
        for k in &self.0 {
            write!(f, "/{k}")?;
        }
        Ok(())
    }
}

impl FromStr for VertexId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if !s.starts_with('/') {
            return Err(Error::Domain(format!("vertex path must start with '/': {s:?}")));
        }
        if s == "/" {
            return Ok(VertexId::root());
        }
        let path: Vec<u32> = s[1..]
            .split('/')
            .map(|p| {
                p.parse::<u32>()
                    .map_err(|e| Error::Domain(format!("bad vertex path {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        VertexId::from_path(&path)
    }
}

/// Local view of one vertex: the edge to the parent, the child edges in
/// descending order, and the aggregated sub-cutoff dust mass.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexNeighborhood {
    /// Conductance of the edge to the parent; None at the root.
    pub parent_conductance: Option<f64>,
    /// Child-edge conductances, strictly descending, all at or above cutoff.
    pub children: Vec<f64>,
    /// Conductance of the virtual dust leaf (compensated sub-cutoff mass).
    pub dust_mass: f64,
}

impl VertexNeighborhood {
    /// Total vertex weight ρ, recomputed from the fields on every call so it
    /// can never drift from them.
    pub fn rho(&self) -> f64 {
        self.parent_conductance.unwrap_or(0.0) + self.children.iter().sum::<f64>() + self.dust_mass
    }
}

/// Abstract tree environment the walk and the bracket recursion run on.
///
/// A key identifies a vertex cheaply (for the Poisson tree, its stream seed);
/// descending an edge yields the child's key and neighborhood. Implementations
/// must be deterministic: the same key always yields the same neighborhood.
pub trait Environment {
    type Key: Clone;

    fn root(&self) -> Result<(Self::Key, VertexNeighborhood)>;

    /// Descends to child `index` (0-based into `nb.children`).
    fn child(
        &self,
        key: &Self::Key,
        nb: &VertexNeighborhood,
        index: usize,
    ) -> Result<(Self::Key, VertexNeighborhood)>;
}

/// The Poisson weighted infinite tree with intensity Π, lazily generated.
pub struct PwitEnvironment {
    sampler: LevySampler,
    master_seed: u64,
    root_seed: StreamSeed,
    cache: RefCell<HashMap<VertexId, VertexNeighborhood>>,
    cache_limit: usize,
}

impl PwitEnvironment {
    pub fn new(spec: LevyMeasureSpec, master_seed: u64, cutoff: f64) -> Result<Self> {
        Self::with_cache_limit(spec, master_seed, cutoff, DEFAULT_CACHE_LIMIT)
    }

    pub fn with_cache_limit(
        spec: LevyMeasureSpec,
        master_seed: u64,
        cutoff: f64,
        cache_limit: usize,
    ) -> Result<Self> {
        let sampler = LevySampler::new(spec, cutoff)?;
        Ok(Self::from_sampler(sampler, master_seed, cache_limit))
    }

    /// Builds an environment around an existing sampler. Useful when many
    /// environments share one (spec, cutoff): the sampler's inversion table is
    /// the expensive part of construction.
    pub fn from_sampler(sampler: LevySampler, master_seed: u64, cache_limit: usize) -> Self {
        let root_seed = seeding::derive_seed(master_seed, &[b"pwit"]);
        PwitEnvironment {
            sampler,
            master_seed,
            root_seed,
            cache: RefCell::new(HashMap::new()),
            cache_limit,
        }
    }

    pub fn spec(&self) -> &LevyMeasureSpec {
        self.sampler.spec()
    }

    pub fn cutoff(&self) -> f64 {
        self.sampler.cutoff()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Stream seed of a vertex: the root seed chained along the path.
    fn vertex_seed(&self, path: &[u32]) -> StreamSeed {
        let mut seed = self.root_seed;
        for &k in path {
            seed = seeding::chain_seed(&seed, k as u64);
        }
        seed
    }

    /// Child arrivals and dust mass for the stream at `seed`.
    fn sample_children(&self, seed: &StreamSeed) -> Result<(Vec<f64>, f64)> {
        let mut rng = seeding::rng_from_seed(seed);
        let batch = self.sampler.sample_arrivals(1.0, &mut rng)?;
        Ok((batch.conductances, batch.residual_mean))
    }

    /// Memoized neighborhood of `v`; identical values on every query.
    pub fn neighborhood(&self, v: &VertexId) -> Result<VertexNeighborhood> {
        if let Some(nb) = self.cache.borrow().get(v) {
            return Ok(nb.clone());
        }
        let parent_conductance = match v.parent() {
            None => None,
            Some(parent) => {
                let parent_nb = self.neighborhood(&parent)?;
                let idx = (v.last_index().unwrap() - 1) as usize;
                match parent_nb.children.get(idx) {
                    Some(&c) => Some(c),
                    None => {
                        return Err(Error::Domain(format!(
                            "vertex {v} does not exist: parent has only {} children",
                            parent_nb.children.len()
                        )))
                    }
                }
            }
        };
        let (children, dust_mass) = self.sample_children(&self.vertex_seed(v.path()))?;
        let nb = VertexNeighborhood {
            parent_conductance,
            children,
            dust_mass,
        };
        let mut cache = self.cache.borrow_mut();
        if cache.len() >= self.cache_limit {
            return Err(Error::Resource(format!(
                "neighborhood cache limit {} reached at depth {}",
                self.cache_limit,
                v.depth()
            )));
        }
        cache.insert(v.clone(), nb.clone());
        Ok(nb)
    }

    /// Conductance ratio A(y) = C(parent(y), y) / C(grandparent(y), parent(y)).
    pub fn conductance_ratio(&self, y: &VertexId) -> Result<f64> {
        if y.depth() < 2 {
            return Err(Error::Domain(format!(
                "conductance ratio needs depth >= 2, got {} for {y}",
                y.depth()
            )));
        }
        let own = self.neighborhood(y)?.parent_conductance.unwrap();
        let parent = self
            .neighborhood(&y.parent().unwrap())?
            .parent_conductance
            .unwrap();
        Ok(own / parent)
    }

    /// Heaviest child-edge conductance at `v`.
    pub fn max_child_conductance(&self, v: &VertexId) -> Result<f64> {
        let nb = self.neighborhood(v)?;
        nb.children.first().copied().ok_or_else(|| {
            Error::Degenerate(format!("vertex {v} has no children above the cutoff"))
        })
    }
}

impl Environment for PwitEnvironment {
    type Key = StreamSeed;

    fn root(&self) -> Result<(StreamSeed, VertexNeighborhood)> {
        let (children, dust_mass) = self.sample_children(&self.root_seed)?;
        Ok((
            self.root_seed,
            VertexNeighborhood {
                parent_conductance: None,
                children,
                dust_mass,
            },
        ))
    }

    fn child(
        &self,
        key: &StreamSeed,
        nb: &VertexNeighborhood,
        index: usize,
    ) -> Result<(StreamSeed, VertexNeighborhood)> {
        let parent_conductance = *nb.children.get(index).ok_or_else(|| {
            Error::Domain(format!(
                "child index {index} out of range ({} children)",
                nb.children.len()
            ))
        })?;
        let seed = seeding::chain_seed(key, index as u64 + 1);
        let (children, dust_mass) = self.sample_children(&seed)?;
        Ok((
            seed,
            VertexNeighborhood {
                parent_conductance: Some(parent_conductance),
                children,
                dust_mass,
            },
        ))
    }
}

/// Resolves a vertex to its (key, neighborhood) by descending from the root.
pub fn resolve<E: Environment>(env: &E, v: &VertexId) -> Result<(E::Key, VertexNeighborhood)> {
    let (mut key, mut nb) = env.root()?;
    for &k in v.path() {
        let idx = (k - 1) as usize;
        let (next_key, next_nb) = env.child(&key, &nb, idx)?;
        key = next_key;
        nb = next_nb;
    }
    Ok((key, nb))
}

/// Deterministic bracket [lower, upper] on the quenched escape probability
/// β(v) = P(the walk started at v never hits parent(v)).
///
/// β satisfies β(x) = S/(1+S) with S = Σ_i A(y_i) β(y_i) over the children
/// y_i, A(y) = C(x, y)/C(parent(x), x). The recursion runs on the subtree of
/// v truncated at `depth`, with boundary value 1 for `upper` and 0 for
/// `lower`; the dust leaf always returns (β = 0). The node `budget` bounds the
/// expansion: an unexpanded child contributes 0 to S for the lower bound and
/// its full weight A_i to S for the upper bound, so pruning never breaks
/// soundness.
///
/// The upper bound decreases in `depth` and converges to β. The lower bound is
/// sound but degenerate: 0 is an absorbing fixed point of S ↦ S/(1+S), so any
/// finite truncation with 0-boundary propagates 0 to the root — which is also
/// the best possible quenched lower bound from a finite exploration, since the
/// unexplored subtree can be arbitrarily unfavorable. Callers wanting a sharp
/// two-sided interval should pair `upper` with a Monte Carlo estimate.
pub fn escape_prob_bracket<E: Environment>(
    env: &E,
    v: &VertexId,
    depth: usize,
    budget: usize,
) -> Result<(f64, f64)> {
    if v.depth() == 0 {
        return Err(Error::Domain(
            "escape probability is defined for vertices with a parent".into(),
        ));
    }
    let (key, nb) = resolve(env, v)?;
    bracket_rec(env, &key, &nb, depth, budget.max(1))
}

fn bracket_rec<E: Environment>(
    env: &E,
    key: &E::Key,
    nb: &VertexNeighborhood,
    depth_left: usize,
    budget: usize,
) -> Result<(f64, f64)> {
    if depth_left == 0 {
        return Ok((0.0, 1.0));
    }
    let pc = nb
        .parent_conductance
        .ok_or_else(|| Error::Domain("bracket recursion reached a parentless vertex".into()))?;
    let weight_sum: f64 = nb.children.iter().sum();
    if weight_sum == 0.0 {
        // Only the dust leaf (or nothing) below: the walk surely returns.
        return Ok((0.0, 0.0));
    }
    let available = budget.saturating_sub(1);
    let mut s_lo = 0.0;
    let mut s_hi = 0.0;
    for (i, &c) in nb.children.iter().enumerate() {
        let a = c / pc;
        let child_budget = (available as f64 * (c / weight_sum)).floor() as usize;
        if child_budget == 0 {
            s_hi += a; // unexpanded: β_i ∈ [0, 1]
            continue;
        }
        let (child_key, child_nb) = env.child(key, nb, i)?;
        let (lo, hi) = bracket_rec(env, &child_key, &child_nb, depth_left - 1, child_budget)?;
        s_lo += a * lo;
        s_hi += a * hi;
    }
    Ok((s_lo / (1.0 + s_lo), s_hi / (1.0 + s_hi)))
}

/// Synthetic half-line environment with a constant parent/child conductance
/// ratio: every vertex has one child, with child edge `ratio` times the parent
/// edge. The walk on it is a birth–death chain with escape probability
/// max(0, 1 − 1/ratio).
///
/// Neighborhoods are reported in per-vertex relative units (parent edge 1,
/// child edge `ratio`), which leaves all transition probabilities unchanged
/// and avoids overflowing `ratio^depth`.
pub struct ConstantRatioEnv {
    ratio: f64,
}

impl ConstantRatioEnv {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::Domain(format!("ratio must be positive, got {ratio}")));
        }
        Ok(ConstantRatioEnv { ratio })
    }

    /// Closed-form escape probability of the induced birth–death chain.
    pub fn escape_probability(&self) -> f64 {
        (1.0 - 1.0 / self.ratio).max(0.0)
    }
}

impl Environment for ConstantRatioEnv {
    type Key = ();

    fn root(&self) -> Result<((), VertexNeighborhood)> {
        Ok((
            (),
            VertexNeighborhood {
                parent_conductance: None,
                children: vec![1.0],
                dust_mass: 0.0,
            },
        ))
    }

    fn child(
        &self,
        _key: &(),
        nb: &VertexNeighborhood,
        index: usize,
    ) -> Result<((), VertexNeighborhood)> {
        if index >= nb.children.len() {
            return Err(Error::Domain(format!("child index {index} out of range")));
        }
        Ok((
            (),
            VertexNeighborhood {
                parent_conductance: Some(1.0),
                children: vec![self.ratio],
                dust_mass: 0.0,
            },
        ))
    }
}

/// An explicit finite tree, for tests that need hand-built geometry (star
/// traps, dead ends). Node 0 is the root.
pub struct FixedTreeEnv {
    nodes: Vec<FixedNode>,
}

/// One node of a [`FixedTreeEnv`]: child links with conductances (descending)
/// and an optional dust mass.
#[derive(Clone, Debug)]
pub struct FixedNode {
    pub children: Vec<(usize, f64)>,
    pub dust_mass: f64,
}

impl FixedTreeEnv {
    pub fn new(nodes: Vec<FixedNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Domain("tree needs at least a root".into()));
        }
        // Parent conductances are implied by the child links; every non-root
        // node must be referenced exactly once and child lists must descend.
        let mut referenced = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            for w in node.children.windows(2) {
                if w[0].1 < w[1].1 {
                    return Err(Error::Domain(format!(
                        "children of node {i} are not in descending conductance order"
                    )));
                }
            }
            for &(t, c) in &node.children {
                if t >= nodes.len() || t == 0 {
                    return Err(Error::Domain(format!("node {i} links to invalid child {t}")));
                }
                if !(c > 0.0) {
                    return Err(Error::Domain(format!(
                        "nonpositive conductance {c} on edge {i} -> {t}"
                    )));
                }
                referenced[t] += 1;
            }
            if node.dust_mass < 0.0 {
                return Err(Error::Domain(format!("negative dust mass at node {i}")));
            }
        }
        if let Some(t) = (1..nodes.len()).find(|&t| referenced[t] != 1) {
            return Err(Error::Domain(format!(
                "node {t} referenced {} times, expected 1",
                referenced[t]
            )));
        }
        Ok(FixedTreeEnv { nodes })
    }

    fn neighborhood_of(&self, id: usize, parent_conductance: Option<f64>) -> VertexNeighborhood {
        let node = &self.nodes[id];
        VertexNeighborhood {
            parent_conductance,
            children: node.children.iter().map(|&(_, c)| c).collect(),
            dust_mass: node.dust_mass,
        }
    }
}

impl Environment for FixedTreeEnv {
    type Key = usize;

    fn root(&self) -> Result<(usize, VertexNeighborhood)> {
        Ok((0, self.neighborhood_of(0, None)))
    }

    fn child(
        &self,
        key: &usize,
        _nb: &VertexNeighborhood,
        index: usize,
    ) -> Result<(usize, VertexNeighborhood)> {
        let node = &self.nodes[*key];
        let &(target, c) = node
            .children
            .get(index)
            .ok_or_else(|| Error::Domain(format!("child index {index} out of range")))?;
        Ok((target, self.neighborhood_of(target, Some(c))))
    }
}
