//! Monte Carlo simulation of the ball-growth dynamics on `T_d` and `T_d^+`.
//!
//! The tree is materialized lazily in an arena: a vertex's children are
//! allocated together, as one block, the first time a ball expansion walks
//! into them. Each generation only the frontier (vertices informed in the
//! previous generation) spreads. Older vertices have already spread and
//! their balls are fixed, so re-expanding them would inform nobody new.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::radius_dist::RadiusSource;
use crate::Graph;

const NONE: u32 = u32::MAX;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub const DEFAULT_DEPTH_TARGET: u32 = 40;
pub const DEFAULT_NODE_CAP: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub const ORIGIN: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Raised when materializing a block would exceed the arena's node cap.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("node cap of {cap} materialized vertices exceeded")]
pub struct CapExceeded {
    pub cap: usize,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    parent: u32,
    first_child: u32,
    depth: u32,
    informed: bool,
}

impl Node {
    fn new(parent: u32, depth: u32) -> Self {
        Node {
            parent,
            first_child: NONE,
            depth,
            informed: false,
        }
    }
}

/// Lazily materialized `T_d` / `T_d^+` rooted at the origin.
#[derive(Clone, Debug)]
pub struct TreeArena {
    graph: Graph,
    d: u32,
    node_cap: usize,
    nodes: Vec<Node>,
    queue: Vec<(u32, u32, u32)>,
}

impl TreeArena {
    /// Arena holding only the (uninformed) origin.
    pub fn new(graph: Graph, d: u32, node_cap: usize) -> Self {
        assert!(d >= 2, "tree degree must be at least 2");
        let mut arena = TreeArena {
            graph,
            d,
            node_cap: node_cap.max(1),
            nodes: Vec::new(),
            queue: Vec::new(),
        };
        arena.reset();
        arena
    }

    /// Drops every vertex except the origin, which becomes uninformed.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.nodes.push(Node::new(NONE, 0));
    }

    pub fn graph(&self) -> Graph {
        self.graph
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn node_cap(&self) -> usize {
        self.node_cap
    }

    pub fn set_node_cap(&mut self, cap: usize) {
        self.node_cap = cap.max(1);
    }

    /// Number of materialized vertices.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn depth(&self, id: NodeId) -> u32 {
        self.nodes[id.index()].depth
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        let p = self.nodes[id.index()].parent;
        (p != NONE).then_some(NodeId(p))
    }

    pub fn is_informed(&self, id: NodeId) -> bool {
        self.nodes[id.index()].informed
    }

    /// Marks `id` informed; returns whether it was newly informed.
    pub fn inform(&mut self, id: NodeId) -> bool {
        let node = &mut self.nodes[id.index()];
        !std::mem::replace(&mut node.informed, true)
    }

    pub fn informed_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.informed).count()
    }

    /// Number of children of `id`: `d + 1` for the origin of `T_d`, `d`
    /// otherwise.
    pub fn child_count(&self, id: NodeId) -> u32 {
        if id == NodeId::ORIGIN && self.graph == Graph::Td {
            self.d + 1
        } else {
            self.d
        }
    }

    /// Materialized children of `id`, if any.
    pub fn children(&self, id: NodeId) -> Option<impl Iterator<Item = NodeId>> {
        let first = self.nodes[id.index()].first_child;
        (first != NONE).then(|| (first..first + self.child_count(id)).map(NodeId))
    }

    /// Position of `id` among its parent's children.
    pub fn child_index(&self, id: NodeId) -> Option<u32> {
        self.parent(id)
            .map(|p| id.0 - self.nodes[p.index()].first_child)
    }

    /// Child indices along the path from the origin to `id`.
    pub fn path(&self, id: NodeId) -> Vec<u32> {
        let mut path = Vec::with_capacity(self.depth(id) as usize);
        let mut cur = id;
        while let Some(idx) = self.child_index(cur) {
            path.push(idx);
            cur = self.parent(cur).expect("non-origin vertex has a parent");
        }
        path.reverse();
        path
    }

    fn ensure_children(&mut self, id: u32) -> std::result::Result<u32, CapExceeded> {
        let first = self.nodes[id as usize].first_child;
        if first != NONE {
            return Ok(first);
        }
        let count = self.child_count(NodeId(id)) as usize;
        if self.nodes.len() + count > self.node_cap {
            return Err(CapExceeded { cap: self.node_cap });
        }
        let first = self.nodes.len() as u32;
        let depth = self.nodes[id as usize].depth + 1;
        self.nodes
            .extend(std::iter::repeat_n(Node::new(id, depth), count));
        self.nodes[id as usize].first_child = first;
        Ok(first)
    }

    /// The `index`-th child of `id`, materializing its block if needed.
    pub fn child(&mut self, id: NodeId, index: u32) -> std::result::Result<NodeId, CapExceeded> {
        assert!(index < self.child_count(id), "child index out of range");
        Ok(NodeId(self.ensure_children(id.0)? + index))
    }

    /// Graph distance between two materialized vertices.
    pub fn distance(&self, a: NodeId, b: NodeId) -> u32 {
        let (mut a, mut b) = (a.0, b.0);
        let mut dist = 0;
        while self.nodes[a as usize].depth > self.nodes[b as usize].depth {
            a = self.nodes[a as usize].parent;
            dist += 1;
        }
        while self.nodes[b as usize].depth > self.nodes[a as usize].depth {
            b = self.nodes[b as usize].parent;
            dist += 1;
        }
        while a != b {
            a = self.nodes[a as usize].parent;
            b = self.nodes[b as usize].parent;
            dist += 2;
        }
        dist
    }

    /// Informs the ball of radius `r` around `u` and returns the vertices
    /// that were not informed before.
    pub fn expand_ball(
        &mut self,
        u: NodeId,
        r: u32,
    ) -> std::result::Result<Vec<NodeId>, CapExceeded> {
        let mut out = Vec::new();
        self.expand_ball_into(u, r, &mut out)?;
        Ok(out)
    }

    /// Same as [`expand_ball`](Self::expand_ball), appending to `out`. On
    /// error the vertices informed so far stay informed and listed.
    pub fn expand_ball_into(
        &mut self,
        u: NodeId,
        r: u32,
        out: &mut Vec<NodeId>,
    ) -> std::result::Result<(), CapExceeded> {
        if r == 0 {
            return Ok(());
        }
        let mut queue = std::mem::take(&mut self.queue);
        queue.clear();
        queue.push((u.0, 0, NONE));
        let mut head = 0;
        let result = loop {
            let Some(&(x, dist, from)) = queue.get(head) else {
                break Ok(());
            };
            head += 1;
            let next_dist = dist + 1;
            let mut visit = |arena: &mut Self, y: u32| {
                let node = &mut arena.nodes[y as usize];
                if !node.informed {
                    node.informed = true;
                    out.push(NodeId(y));
                }
                if next_dist < r {
                    queue.push((y, next_dist, x));
                }
            };
            let parent = self.nodes[x as usize].parent;
            if parent != NONE && parent != from {
                visit(self, parent);
            }
            let first = match self.ensure_children(x) {
                Ok(first) => first,
                Err(e) => break Err(e),
            };
            for c in first..first + self.child_count(NodeId(x)) {
                if c != from {
                    visit(self, c);
                }
            }
        };
        self.queue = queue;
        result
    }
}

/// Finite stand-in for "the informed set is infinite": stop once a vertex at
/// depth `depth_target` is informed, after `generation_cap` generations, or
/// when the arena would exceed `node_cap` vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StopPolicy {
    pub depth_target: u32,
    pub generation_cap: u32,
    pub node_cap: usize,
}

impl StopPolicy {
    pub fn new(depth_target: u32, generation_cap: u32, node_cap: usize) -> Result<Self> {
        if depth_target == 0 {
            return Err(Error::InvalidPolicy(
                "depth target must be at least 1".into(),
            ));
        }
        if generation_cap == 0 {
            return Err(Error::InvalidPolicy(
                "generation cap must be at least 1".into(),
            ));
        }
        if node_cap == 0 {
            return Err(Error::InvalidPolicy("node cap must be at least 1".into()));
        }
        Ok(StopPolicy {
            depth_target,
            generation_cap,
            node_cap,
        })
    }

    /// Depth target `l` with generation cap `4 l` and the default node cap.
    pub fn with_depth(depth_target: u32) -> Result<Self> {
        Self::new(
            depth_target,
            depth_target.saturating_mul(4),
            DEFAULT_NODE_CAP,
        )
    }
}

impl Default for StopPolicy {
    fn default() -> Self {
        Self::with_depth(DEFAULT_DEPTH_TARGET).expect("default policy is valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EpisodeOutcome {
    ReachedDepth,
    FrontierDied,
    CapHit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EpisodeResult {
    pub outcome: EpisodeOutcome,
    pub generations_run: u32,
    pub informed_count: usize,
    pub max_depth: u32,
}

/// Runs one episode in `arena` (which is reset first). `radius_of` is asked
/// for the radius of each frontier vertex at the moment it spreads.
pub fn run_episode_with<F>(
    arena: &mut TreeArena,
    policy: &StopPolicy,
    mut radius_of: F,
) -> EpisodeResult
where
    F: FnMut(&TreeArena, NodeId) -> u32,
{
    arena.reset();
    arena.set_node_cap(policy.node_cap);
    arena.inform(NodeId::ORIGIN);
    let mut frontier = vec![NodeId::ORIGIN];
    let mut next = Vec::new();
    let mut informed_count = 1usize;
    let mut max_depth = 0u32;
    let mut generations_run = 0u32;

    let outcome = loop {
        next.clear();
        let mut capped = false;
        for &u in &frontier {
            let r = radius_of(arena, u);
            if arena.expand_ball_into(u, r, &mut next).is_err() {
                capped = true;
                break;
            }
        }
        generations_run += 1;
        informed_count += next.len();
        if let Some(deepest) = next.iter().map(|&v| arena.depth(v)).max() {
            max_depth = max_depth.max(deepest);
        }
        if max_depth >= policy.depth_target {
            break EpisodeOutcome::ReachedDepth;
        }
        if capped {
            break EpisodeOutcome::CapHit;
        }
        if next.is_empty() {
            break EpisodeOutcome::FrontierDied;
        }
        if generations_run >= policy.generation_cap {
            break EpisodeOutcome::CapHit;
        }
        std::mem::swap(&mut frontier, &mut next);
    };

    EpisodeResult {
        outcome,
        generations_run,
        informed_count,
        max_depth,
    }
}

/// [`run_episode_with`] drawing radii from `source` by depth.
pub fn run_episode_in<S, R>(
    arena: &mut TreeArena,
    source: &S,
    policy: &StopPolicy,
    rng: &mut R,
) -> EpisodeResult
where
    S: RadiusSource + ?Sized,
    R: Rng + ?Sized,
{
    run_episode_with(arena, policy, |arena, u| {
        source.dist_at(arena.depth(u)).sample(rng)
    })
}

/// One episode on a fresh arena.
pub fn run_episode<S, R>(
    graph: Graph,
    d: u32,
    source: &S,
    policy: &StopPolicy,
    rng: &mut R,
) -> EpisodeResult
where
    S: RadiusSource + ?Sized,
    R: Rng + ?Sized,
{
    let mut arena = TreeArena::new(graph, d, policy.node_cap);
    run_episode_in(&mut arena, source, policy, rng)
}

/// Starts a process from the vertex at depth `start_depth` on the leftmost
/// ray and reports whether the vertex `n` levels below it on the same ray is
/// informed within `n` generations. The arena's own node cap applies.
pub fn simulate_crossing<S, R>(
    arena: &mut TreeArena,
    source: &S,
    start_depth: u32,
    n: u32,
    rng: &mut R,
) -> std::result::Result<bool, CapExceeded>
where
    S: RadiusSource + ?Sized,
    R: Rng + ?Sized,
{
    arena.reset();
    let mut start = NodeId::ORIGIN;
    for _ in 0..start_depth {
        start = arena.child(start, 0)?;
    }
    let mut target = start;
    for _ in 0..n {
        target = arena.child(target, 0)?;
    }
    arena.inform(start);
    let mut frontier = vec![start];
    let mut next = Vec::new();
    for _ in 0..n {
        next.clear();
        for &u in &frontier {
            let r = source.dist_at(arena.depth(u)).sample(rng);
            arena.expand_ball_into(u, r, &mut next)?;
        }
        if arena.is_informed(target) {
            return Ok(true);
        }
        if next.is_empty() {
            break;
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    Ok(arena.is_informed(target))
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let phat = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (phat + z2 / (2.0 * n_f)) / denom;
    let half = z * (phat * (1.0 - phat) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let low = (center - half).max(0.0).min(phat);
    let high = (center + half).min(1.0).max(phat);
    (low, high)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SimulationConfig {
    pub graph: Graph,
    pub d: u32,
    pub policy: StopPolicy,
    pub n_runs: u64,
    pub master_seed: u64,
}

/// Aggregated survival estimate. Cap hits count as survivals in `point`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_runs: u64,
    pub reached_depth: u64,
    pub frontier_died: u64,
    pub cap_hits: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Tally {
    reached: u64,
    died: u64,
    capped: u64,
}

impl Tally {
    fn record(outcome: EpisodeOutcome) -> Self {
        let mut t = Tally::default();
        match outcome {
            EpisodeOutcome::ReachedDepth => t.reached = 1,
            EpisodeOutcome::FrontierDied => t.died = 1,
            EpisodeOutcome::CapHit => t.capped = 1,
        }
        t
    }

    fn merge(self, other: Self) -> Self {
        Tally {
            reached: self.reached + other.reached,
            died: self.died + other.died,
            capped: self.capped + other.capped,
        }
    }
}

/// Random stream of episode `index`: ChaCha8 keyed by the master seed, with
/// the episode index as stream id.
pub fn episode_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn validate(config: &SimulationConfig) -> Result<()> {
    if config.d < 2 {
        return Err(Error::InvalidDegree(config.d));
    }
    if config.n_runs == 0 {
        return Err(Error::InvalidPolicy(
            "number of runs must be at least 1".into(),
        ));
    }
    StopPolicy::new(
        config.policy.depth_target,
        config.policy.generation_cap,
        config.policy.node_cap,
    )?;
    Ok(())
}

/// Runs `n_runs` independent episodes on the current rayon pool. Episode
/// `i` uses [`episode_rng`]`(master_seed, i)`, so the result does not depend
/// on scheduling or on the number of workers.
pub fn estimate_survival<S>(config: &SimulationConfig, source: &S) -> Result<SurvivalEstimate>
where
    S: RadiusSource + ?Sized,
{
    validate(config)?;
    let tally = (0..config.n_runs)
        .into_par_iter()
        .map_init(
            || TreeArena::new(config.graph, config.d, config.policy.node_cap),
            |arena, i| {
                let mut rng = episode_rng(config.master_seed, i);
                Tally::record(run_episode_in(arena, source, &config.policy, &mut rng).outcome)
            },
        )
        .reduce(Tally::default, Tally::merge);

    let survived = tally.reached + tally.capped;
    let point = survived as f64 / config.n_runs as f64;
    let (ci_low, ci_high) = wilson_interval(survived, config.n_runs, Z_95);
    Ok(SurvivalEstimate {
        point,
        ci_low,
        ci_high,
        n_runs: config.n_runs,
        reached_depth: tally.reached,
        frontier_died: tally.died,
        cap_hits: tally.capped,
    })
}

/// [`estimate_survival`] on a dedicated pool of `threads` workers.
pub fn estimate_survival_with_threads<S>(
    config: &SimulationConfig,
    source: &S,
    threads: usize,
) -> Result<SurvivalEstimate>
where
    S: RadiusSource + ?Sized,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidPolicy(format!("cannot build worker pool: {e}")))?;
    pool.install(|| estimate_survival(config, source))
}
