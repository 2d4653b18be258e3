//! Random 2D node placement and the multi-resolution cluster hierarchy.
//!
//! The region is a square tiled by `n^(T-1)` level-1 cells of area `s`.
//! Cells are indexed in Morton (Z) order, so with `n = 4^a` the children of
//! level-`i` cluster `p` are exactly the level-`(i-1)` clusters
//! `p*n .. p*n + n`, and their union is the parent's cell.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub type NodeId = usize;

/// Re-draw budget when a level-1 cell comes up empty.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeployError {
    #[error("n must be a power of 4 (got {0})")]
    ClusterFactor(usize),
    #[error("network of {nodes} nodes is too small for cluster factor {factor} (need at least {factor})")]
    TooFewNodes { nodes: usize, factor: usize },
    #[error("level override T={levels} requires n^T <= N, but {factor}^{levels} > {nodes}")]
    LevelOverride {
        levels: u32,
        factor: usize,
        nodes: usize,
    },
    #[error("unit area must be positive and finite (got {0})")]
    UnitArea(f64),
    #[error("level-1 cell {cell} is empty")]
    EmptyCell { cell: usize },
    #[error("every level-1 cell stayed non-empty in none of {attempts} placement attempts")]
    PlacementExhausted { attempts: u32 },
    #[error("node {id} at ({x}, {y}) lies outside the {side}x{side} region")]
    OutOfRegion {
        id: NodeId,
        x: f64,
        y: f64,
        side: f64,
    },
}

/// How node positions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Independent uniform positions over the whole region.
    #[default]
    Uniform,
    /// `N / |C_1|` nodes per level-1 cell (remainder spread over randomly
    /// chosen cells), uniform inside each cell. Produces exact-power trees
    /// when `N = n^T`.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployConfig {
    pub node_count: usize,
    pub cluster_factor: usize,
    #[serde(default = "default_unit_area")]
    pub unit_area: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub level_override: Option<u32>,
    #[serde(default)]
    pub placement: Placement,
}

fn default_unit_area() -> f64 {
    1.0
}

impl DeployConfig {
    pub fn new(node_count: usize, cluster_factor: usize, seed: u64) -> Self {
        Self {
            node_count,
            cluster_factor,
            unit_area: 1.0,
            seed,
            level_override: None,
            placement: Placement::Uniform,
        }
    }

    pub fn with_levels(mut self, levels: u32) -> Self {
        self.level_override = Some(levels);
        self
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    /// `a` such that `n = 4^a`.
    pub fn factor_exponent(&self) -> Result<u32, DeployError> {
        factor_exponent(self.cluster_factor)
    }

    /// Number of hierarchy levels `T`.
    pub fn levels(&self) -> Result<u32, DeployError> {
        let n = self.cluster_factor;
        factor_exponent(n)?;
        if !(self.unit_area.is_finite() && self.unit_area > 0.0) {
            return Err(DeployError::UnitArea(self.unit_area));
        }
        match self.level_override {
            Some(t) => {
                if t == 0 || pow_le(n, t, self.node_count).is_none() {
                    return Err(DeployError::LevelOverride {
                        levels: t,
                        factor: n,
                        nodes: self.node_count,
                    });
                }
                Ok(t)
            }
            None => {
                let t = floor_log(self.node_count, n);
                if t == 0 {
                    return Err(DeployError::TooFewNodes {
                        nodes: self.node_count,
                        factor: n,
                    });
                }
                Ok(t)
            }
        }
    }

    /// Side length of the square region (`|C_1| * s` in area).
    pub fn region_side(&self) -> Result<f64, DeployError> {
        let t = self.levels()?;
        Ok(self.cell_side() * grid_width(self.factor_exponent()?, t, 1) as f64)
    }

    pub fn cell_side(&self) -> f64 {
        self.unit_area.sqrt()
    }
}

fn factor_exponent(n: usize) -> Result<u32, DeployError> {
    if n < 4 || !n.is_power_of_two() || !n.trailing_zeros().is_multiple_of(2) {
        return Err(DeployError::ClusterFactor(n));
    }
    Ok(n.trailing_zeros() / 2)
}

/// `Some(n^t)` when it does not exceed `limit`.
fn pow_le(n: usize, t: u32, limit: usize) -> Option<usize> {
    n.checked_pow(t).filter(|&p| p <= limit)
}

fn floor_log(value: usize, base: usize) -> u32 {
    let mut t = 0;
    let mut p = 1usize;
    while let Some(next) = p.checked_mul(base) {
        if next > value {
            break;
        }
        p = next;
        t += 1;
    }
    t
}

/// Cells per side of the level-`level` grid.
fn grid_width(exponent: u32, levels: u32, level: u32) -> usize {
    1usize << (exponent * (levels - level))
}

pub(crate) fn morton_encode(x: usize, y: usize) -> usize {
    let mut code = 0usize;
    for bit in 0..(usize::BITS / 2) {
        code |= ((x >> bit) & 1) << (2 * bit);
        code |= ((y >> bit) & 1) << (2 * bit + 1);
    }
    code
}

pub(crate) fn morton_decode(code: usize) -> (usize, usize) {
    let (mut x, mut y) = (0usize, 0usize);
    for bit in 0..(usize::BITS / 2) {
        x |= ((code >> (2 * bit)) & 1) << bit;
        y |= ((code >> (2 * bit + 1)) & 1) << bit;
    }
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

impl Node {
    pub fn distance(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Draws `N` node positions.
///
/// Node ids are assigned in Morton order of the level-1 cell containing the
/// node (draw order within a cell), so every cluster at every level owns a
/// contiguous id range and spatially close nodes get close ids.
pub fn deploy(config: &DeployConfig) -> Result<Vec<Node>, DeployError> {
    deploy_with_seed(config, config.seed)
}

fn deploy_with_seed(config: &DeployConfig, seed: u64) -> Result<Vec<Node>, DeployError> {
    let levels = config.levels()?;
    let exponent = config.factor_exponent()?;
    let width = grid_width(exponent, levels, 1);
    let cell = config.cell_side();
    let side = cell * width as f64;
    let mut rng = seed::rng(seed::derive(seed, &[seed::TAG_PLACEMENT]));

    let mut drawn: Vec<(usize, f64, f64)> = Vec::with_capacity(config.node_count);
    match config.placement {
        Placement::Uniform => {
            for _ in 0..config.node_count {
                let x = rng.random_range(0.0..side);
                let y = rng.random_range(0.0..side);
                drawn.push((cell_of(x, y, cell, width), x, y));
            }
        }
        Placement::Stratified => {
            let cells = width * width;
            let base = config.node_count / cells;
            let mut counts = vec![base; cells];
            let mut order: Vec<usize> = (0..cells).collect();
            // partial Fisher-Yates: the first `remainder` cells get one extra
            let remainder = config.node_count % cells;
            for i in 0..remainder {
                let j = rng.random_range(i..cells);
                order.swap(i, j);
                counts[order[i]] += 1;
            }
            for (code, &count) in counts.iter().enumerate() {
                let (cx, cy) = morton_decode(code);
                for _ in 0..count {
                    let x = (cx as f64 + rng.random_range(0.0..1.0)) * cell;
                    let y = (cy as f64 + rng.random_range(0.0..1.0)) * cell;
                    drawn.push((
                        code,
                        x.min(side * (1.0 - f64::EPSILON)),
                        y.min(side * (1.0 - f64::EPSILON)),
                    ));
                }
            }
        }
    }
    // stable sort keeps draw order within each cell
    drawn.sort_by_key(|&(code, _, _)| code);
    Ok(drawn
        .into_iter()
        .enumerate()
        .map(|(id, (_, x, y))| Node { id, x, y })
        .collect())
}

fn cell_of(x: f64, y: f64, cell: f64, width: usize) -> usize {
    let cx = ((x / cell) as usize).min(width - 1);
    let cy = ((y / cell) as usize).min(width - 1);
    morton_encode(cx, cy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub level: u32,
    pub index: usize,
    /// Level 1: node ids (ascending). Level >= 2: child cluster indices.
    pub members: Vec<usize>,
    pub head: NodeId,
    /// Sensors under this cluster, `N_i^(l)`.
    pub sensor_count: usize,
    /// Cell area `s_i`.
    pub area: f64,
    /// Sum of head-to-transmitter distances, `d_i^(l)`.
    pub distance_sum: f64,
    /// Lower-left corner of the cell.
    pub origin: (f64, f64),
    pub side: f64,
}

impl Cluster {
    pub fn contains(&self, node: &Node) -> bool {
        node.x >= self.origin.0
            && node.x < self.origin.0 + self.side
            && node.y >= self.origin.1
            && node.y < self.origin.1 + self.side
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub cluster_factor: usize,
    pub unit_area: f64,
    pub region_side: f64,
    pub seed: u64,
    pub round: u64,
    pub nodes: Vec<Node>,
    /// `levels[i - 1]` holds the level-`i` clusters in Morton order.
    pub levels: Vec<Vec<Cluster>>,
}

/// Partitions deployed nodes into the quadtree hierarchy and elects heads
/// for round 0.
pub fn build_hierarchy(nodes: &[Node], config: &DeployConfig) -> Result<ClusterTree, DeployError> {
    let levels = config.levels()?;
    let exponent = config.factor_exponent()?;
    let n = config.cluster_factor;
    let cell = config.cell_side();
    let width = grid_width(exponent, levels, 1);
    let side = cell * width as f64;

    if nodes.len() < n.pow(levels) {
        return Err(DeployError::TooFewNodes {
            nodes: nodes.len(),
            factor: n,
        });
    }

    let mut nodes: Vec<Node> = nodes.to_vec();
    nodes.sort_by_key(|node| node.id);
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); width * width];
    for node in &nodes {
        if !(node.x >= 0.0 && node.x < side && node.y >= 0.0 && node.y < side) {
            return Err(DeployError::OutOfRegion {
                id: node.id,
                x: node.x,
                y: node.y,
                side,
            });
        }
        cells[cell_of(node.x, node.y, cell, width)].push(node.id);
    }
    if let Some(cell) = cells.iter().position(Vec::is_empty) {
        return Err(DeployError::EmptyCell { cell });
    }

    let mut tree_levels: Vec<Vec<Cluster>> = Vec::with_capacity(levels as usize);
    let level_one = cells
        .into_iter()
        .enumerate()
        .map(|(index, members)| {
            let (cx, cy) = morton_decode(index);
            Cluster {
                level: 1,
                index,
                sensor_count: members.len(),
                head: members[0],
                members,
                area: config.unit_area,
                distance_sum: 0.0,
                origin: (cx as f64 * cell, cy as f64 * cell),
                side: cell,
            }
        })
        .collect();
    tree_levels.push(level_one);

    for level in 2..=levels {
        let below = &tree_levels[(level - 2) as usize];
        let count = below.len() / n;
        let cell_side = cell * (1usize << (exponent * (level - 1))) as f64;
        let clusters = (0..count)
            .map(|index| {
                let members: Vec<usize> = (index * n..index * n + n).collect();
                let (cx, cy) = morton_decode(index);
                Cluster {
                    level,
                    index,
                    sensor_count: members.iter().map(|&c| below[c].sensor_count).sum(),
                    head: below[members[0]].head,
                    members,
                    area: below[0].area * n as f64,
                    distance_sum: 0.0,
                    origin: (cx as f64 * cell_side, cy as f64 * cell_side),
                    side: cell_side,
                }
            })
            .collect();
        tree_levels.push(clusters);
    }

    let tree = ClusterTree {
        cluster_factor: n,
        unit_area: config.unit_area,
        region_side: side,
        seed: config.seed,
        round: 0,
        nodes,
        levels: tree_levels,
    };
    Ok(elect_heads(&tree, 0, config.seed))
}

/// Re-elects every head for a duty-cycle round.
///
/// A level-1 head is a uniformly random member of its cell; a level-`i` head
/// (`i >= 2`) is the head of a uniformly random child, so exactly `n - 1`
/// children transmit upward.
pub fn elect_heads(tree: &ClusterTree, round: u64, seed: u64) -> ClusterTree {
    let mut next = tree.clone();
    next.round = round;
    next.seed = seed;
    let n = next.cluster_factor;
    for depth in 0..next.levels.len() {
        let level = depth as u64 + 1;
        let (below, current) = next.levels.split_at_mut(depth);
        for cluster in current[0].iter_mut() {
            let mut rng = seed::rng(seed::derive(
                seed,
                &[seed::TAG_ELECTION, round, level, cluster.index as u64],
            ));
            if depth == 0 {
                let pick = rng.random_range(0..cluster.members.len());
                cluster.head = cluster.members[pick];
            } else {
                let children = &below[depth - 1];
                let pick = rng.random_range(0..n);
                cluster.head = children[cluster.members[pick]].head;
            }
        }
    }
    next.refresh_distances();
    next
}

/// Draws and partitions a deployment, re-drawing with derived sub-seeds when
/// a level-1 cell comes up empty.
pub fn deploy_network(config: &DeployConfig) -> Result<ClusterTree, DeployError> {
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let sub_seed = if attempt == 0 {
            config.seed
        } else {
            config.seed ^ seed::mix64(attempt as u64)
        };
        let nodes = deploy_with_seed(config, sub_seed)?;
        match build_hierarchy(&nodes, config) {
            Ok(tree) => {
                if attempt > 0 {
                    log::debug!(
                        "deployment seed {} needed {} re-draws",
                        config.seed,
                        attempt
                    );
                }
                return Ok(tree);
            }
            Err(DeployError::EmptyCell { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(DeployError::PlacementExhausted {
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    pub p1: f64,
    /// Absent when `N' = N - n^T` is zero.
    pub p2: Option<f64>,
}

pub fn coverage_stats(tree: &ClusterTree) -> CoverageStats {
    coverage(tree.nodes.len(), tree.cluster_factor, tree.level_count())
}

/// `P1 = n^T / N` and `P2 = n^(T-1) / N'` with `N' = N - n^T`.
pub fn coverage(node_count: usize, cluster_factor: usize, levels: u32) -> CoverageStats {
    let n = cluster_factor as f64;
    let t = levels as i32;
    let total = node_count as f64;
    let full = n.powi(t);
    let remainder = total - full;
    CoverageStats {
        p1: 1.0 / (1.0 + remainder / full),
        p2: (remainder > 0.0).then(|| n.powi(t - 1) / remainder),
    }
}

impl ClusterTree {
    pub fn level_count(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Clusters of level `level` (1-based).
    pub fn level(&self, level: u32) -> &[Cluster] {
        &self.levels[(level - 1) as usize]
    }

    pub fn top(&self) -> &Cluster {
        &self.levels.last().expect("tree has at least one level")[0]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    /// Index of the parent (level `level + 1`) of a level-`level` cluster.
    pub fn parent_index(&self, index: usize) -> usize {
        index / self.cluster_factor
    }

    /// Node ids under a cluster, ascending.
    pub fn sensors(&self, level: u32, index: usize) -> Vec<NodeId> {
        let mut ids = Vec::new();
        self.collect_sensors(level, index, &mut ids);
        ids.sort_unstable();
        ids
    }

    fn collect_sensors(&self, level: u32, index: usize, out: &mut Vec<NodeId>) {
        let cluster = &self.level(level)[index];
        if level == 1 {
            out.extend_from_slice(&cluster.members);
        } else {
            for &child in &cluster.members {
                self.collect_sensors(level - 1, child, out);
            }
        }
    }

    /// Highest level at which each node serves as head (0 for leaves).
    pub fn head_levels(&self) -> Vec<u32> {
        let mut roles = vec![0u32; self.nodes.len()];
        for clusters in &self.levels {
            for cluster in clusters {
                roles[cluster.head] = roles[cluster.head].max(cluster.level);
            }
        }
        roles
    }

    fn refresh_distances(&mut self) {
        for depth in 0..self.levels.len() {
            let (below, current) = self.levels.split_at_mut(depth);
            for cluster in current[0].iter_mut() {
                let head = self.nodes[cluster.head];
                cluster.distance_sum = if depth == 0 {
                    cluster
                        .members
                        .iter()
                        .filter(|&&id| id != cluster.head)
                        .map(|&id| self.nodes[id].distance(&head))
                        .sum()
                } else {
                    let children = &below[depth - 1];
                    cluster
                        .members
                        .iter()
                        .map(|&c| children[c].head)
                        .filter(|&h| h != cluster.head)
                        .map(|h| self.nodes[h].distance(&head))
                        .sum()
                };
            }
        }
    }

    /// Canonical text form: one tab-separated line per cluster, ordered by
    /// (level, cluster index), preceded by a header. Floats use Rust's
    /// shortest round-trip formatting.
    ///
    /// Columns: `level cluster head sensors area distance_sum members`, where
    /// `members` is a comma-separated list of node ids (level 1) or child
    /// cluster indices (level >= 2).
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# cluster-tree v1 factor={} levels={} nodes={} unit_area={} seed={} round={}",
            self.cluster_factor,
            self.level_count(),
            self.node_count(),
            self.unit_area,
            self.seed,
            self.round
        );
        out.push_str("level\tcluster\thead\tsensors\tarea\tdistance_sum\tmembers\n");
        for clusters in &self.levels {
            for c in clusters {
                let members = c
                    .members
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(",");
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    c.level, c.index, c.head, c.sensor_count, c.area, c.distance_sum, members
                );
            }
        }
        out
    }
}
