//! Aggregation protocols over a cluster tree.
//!
//! * HDACS: leaves send raw samples to their level-1 head; every head
//!   re-sparsifies what it holds in the DCT domain and forwards
//!   `ceil(K log2 N_i)` measurements, which its parent decodes with CoSaMP.
//! * NCS: every node forwards a global-size measurement vector
//!   (`ceil(K log2 N)` units), summed in-network along the same tree.
//! * HCS: raw forwarding at the leaves, global-size measurement vectors from
//!   every head upward.
//!
//! Transmission levels follow the receiving cluster: a level-`i`
//! transmission is addressed to a level-`i` head.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cs::{self, RecoveryConfig, RecoveryError, RecoveryModel};
use crate::deployment::{ClusterTree, NodeId};
use crate::field::{self, SignalVector};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("field has {field} samples but the tree has {nodes} nodes")]
    FieldMismatch { field: usize, nodes: usize },
    #[error("sparsity K must be at least 1")]
    ZeroSparsity,
    #[error("frame size m must be at least 1")]
    ZeroFrameSize,
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Hdacs,
    Ncs,
    Hcs,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [ProtocolKind::Hdacs, ProtocolKind::Ncs, ProtocolKind::Hcs];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Hdacs => "hdacs",
            ProtocolKind::Ncs => "ncs",
            ProtocolKind::Hcs => "hcs",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `ceil(K log2 count)`, exact for powers of two, and never below one unit.
pub fn measurement_threshold(sparsity: usize, count: usize) -> usize {
    if count <= 1 {
        return 1;
    }
    let units = if count.is_power_of_two() {
        sparsity * count.trailing_zeros() as usize
    } else {
        (sparsity as f64 * (count as f64).log2()).ceil() as usize
    };
    units.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub sparsity: usize,
    pub frame_size: usize,
    pub network_size: usize,
}

impl Thresholds {
    pub fn new(
        sparsity: usize,
        frame_size: usize,
        network_size: usize,
    ) -> Result<Self, ProtocolError> {
        if sparsity == 0 {
            return Err(ProtocolError::ZeroSparsity);
        }
        if frame_size == 0 {
            return Err(ProtocolError::ZeroFrameSize);
        }
        Ok(Self {
            sparsity,
            frame_size,
            network_size,
        })
    }

    /// Per-cluster threshold `M_i^(l)` for a cluster holding `sensors` samples.
    pub fn cluster(&self, sensors: usize) -> usize {
        measurement_threshold(self.sparsity, sensors)
    }

    /// Global threshold `M = ceil(K log2 N)`, capped at `N`.
    pub fn global(&self) -> usize {
        measurement_threshold(self.sparsity, self.network_size).min(self.network_size.max(1))
    }

    /// Units an HDACS head forwards: the threshold, or its raw samples when
    /// that is smaller.
    pub fn hdacs_payload(&self, sensors: usize) -> usize {
        self.cluster(sensors).min(sensors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunOptions {
    pub recovery: RecoveryConfig,
    /// HCS heads forward raw data until they hold at least `M` samples,
    /// instead of always sending `M` units.
    pub strict_hcs: bool,
}

pub fn frame_count(units: usize, frame_size: usize) -> usize {
    units.div_ceil(frame_size.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub protocol: ProtocolKind,
    pub level: u32,
    pub cluster: usize,
    pub sender: NodeId,
    /// `None` for the sink uplink of the top head.
    pub receiver: Option<NodeId>,
    pub units: usize,
    pub frames: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub degraded: bool,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub level: u32,
    pub cluster: usize,
    pub head: NodeId,
    pub sensors: usize,
    /// Size of the data this head forwards (nominal for the top cluster).
    pub payload_units: usize,
    /// Size of the data this head receives or holds before forwarding.
    pub received_units: usize,
    /// Set when this cluster's payload was decoded from measurements.
    pub decode: Option<DecodeDiagnostics>,
    pub flagged: bool,
}

impl ClusterRecord {
    pub fn compression_ratio(&self) -> f64 {
        self.payload_units as f64 / self.received_units as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeTraffic {
    pub node: NodeId,
    /// Highest level at which the node is a head, 0 for leaves.
    pub role: u32,
    pub units: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationTrace {
    pub protocol: ProtocolKind,
    pub levels: u32,
    pub frame_size: usize,
    pub sparsity: usize,
    pub transmissions: Vec<Transmission>,
    pub nodes: Vec<NodeTraffic>,
    /// Ordered by (level, cluster).
    pub clusters: Vec<ClusterRecord>,
    /// Field estimate at the top head, ascending node id.
    pub recovered: SignalVector,
}

impl AggregationTrace {
    pub fn total_units(&self) -> usize {
        self.transmissions.iter().map(|t| t.units).sum()
    }

    pub fn total_frames(&self) -> usize {
        self.transmissions.iter().map(|t| t.frames).sum()
    }

    /// Transmitted units per receiving level, index 0 = level 1.
    pub fn level_totals(&self) -> Vec<usize> {
        let mut totals = vec![0usize; self.levels as usize];
        for t in &self.transmissions {
            totals[(t.level - 1) as usize] += t.units;
        }
        totals
    }

    pub fn flagged_clusters(&self) -> Vec<(u32, usize)> {
        self.clusters
            .iter()
            .filter(|c| c.flagged)
            .map(|c| (c.level, c.cluster))
            .collect()
    }

    pub fn clusters_at(&self, level: u32) -> impl Iterator<Item = &ClusterRecord> {
        self.clusters.iter().filter(move |c| c.level == level)
    }
}

/// Mean compression ratio `gamma_i` per level (index 0 = level 1).
///
/// Level 1: forwarded units over the cluster's raw sample count. Level `i >=
/// 2`: forwarded units over the sum of all `n` children's payloads.
pub fn compression_ratios(trace: &AggregationTrace) -> Vec<f64> {
    (1..=trace.levels)
        .map(|level| {
            let (sum, count) = trace.clusters_at(level).fold((0.0, 0usize), |(s, c), r| {
                (s + r.compression_ratio(), c + 1)
            });
            sum / count as f64
        })
        .collect()
}

struct TraceBuilder<'a> {
    protocol: ProtocolKind,
    tree: &'a ClusterTree,
    thresholds: Thresholds,
    transmissions: Vec<Transmission>,
    clusters: Vec<ClusterRecord>,
}

impl<'a> TraceBuilder<'a> {
    fn new(protocol: ProtocolKind, tree: &'a ClusterTree, thresholds: Thresholds) -> Self {
        Self {
            protocol,
            tree,
            thresholds,
            transmissions: Vec::new(),
            clusters: Vec::new(),
        }
    }

    fn send(
        &mut self,
        level: u32,
        cluster: usize,
        sender: NodeId,
        receiver: Option<NodeId>,
        units: usize,
    ) {
        let distance = receiver.map_or(0.0, |r| self.tree.node(sender).distance(self.tree.node(r)));
        self.transmissions.push(Transmission {
            protocol: self.protocol,
            level,
            cluster,
            sender,
            receiver,
            units,
            frames: frame_count(units, self.thresholds.frame_size),
            distance,
        });
    }

    fn finish(mut self, recovered: Vec<f64>) -> AggregationTrace {
        let roles = self.tree.head_levels();
        let mut nodes: Vec<NodeTraffic> = roles
            .iter()
            .enumerate()
            .map(|(node, &role)| NodeTraffic {
                node,
                role,
                units: 0,
                frames: 0,
            })
            .collect();
        for t in &self.transmissions {
            nodes[t.sender].units += t.units;
            nodes[t.sender].frames += t.frames;
        }
        self.clusters.sort_by_key(|c| (c.level, c.cluster));
        AggregationTrace {
            protocol: self.protocol,
            levels: self.tree.level_count(),
            frame_size: self.thresholds.frame_size,
            sparsity: self.thresholds.sparsity,
            transmissions: self.transmissions,
            nodes,
            clusters: self.clusters,
            recovered: SignalVector::from_raw(recovered),
        }
    }
}

fn check_field(tree: &ClusterTree, field: &SignalVector) -> Result<(), ProtocolError> {
    if field.len() != tree.node_count() {
        return Err(ProtocolError::FieldMismatch {
            field: field.len(),
            nodes: tree.node_count(),
        });
    }
    Ok(())
}

fn measurement_seed(run_seed: u64, level: u32, cluster: usize) -> u64 {
    seed::derive(run_seed, &[seed::TAG_MEASURE, level as u64, cluster as u64])
}

/// Samples held by a head: node ids ascending with their (estimated) values.
#[derive(Debug, Clone, Default)]
struct Block {
    ids: Vec<NodeId>,
    values: Vec<f64>,
}

impl Block {
    fn merge(parts: Vec<Block>) -> Block {
        let mut pairs: Vec<(NodeId, f64)> = parts
            .into_iter()
            .flat_map(|b| b.ids.into_iter().zip(b.values))
            .collect();
        pairs.sort_by_key(|&(id, _)| id);
        let (ids, values) = pairs.into_iter().unzip();
        Block { ids, values }
    }
}

/// What a receiving head reconstructs from one child's payload.
struct Decoded {
    units: usize,
    values: Vec<f64>,
    diagnostics: Option<DecodeDiagnostics>,
    failed: bool,
}

/// Compresses a head's block to `payload` units and decodes it at the
/// receiver. Blocks no larger than the payload travel raw.
fn encode_decode(
    block: &Block,
    payload: usize,
    sparsity: usize,
    matrix_seed: u64,
    cfg: &RecoveryConfig,
) -> Decoded {
    let len = block.values.len();
    if payload >= len {
        return Decoded {
            units: len,
            values: block.values.clone(),
            diagnostics: None,
            failed: false,
        };
    }
    let k = sparsity.min(payload);
    let coefficients = field::dct_forward(&SignalVector::from_raw(block.values.clone()));
    let sparse = match cfg.model {
        RecoveryModel::Plain => field::truncate_to(&coefficients, k),
        RecoveryModel::DctModel => field::truncate_in_band(&coefficients, k, cfg.band_for(k)),
    };
    let approximation = field::dct_inverse(&sparse.to_signal());
    let outcome = cs::measure(&approximation, payload, matrix_seed)
        .map(|y| y.with_sparsity(k))
        .and_then(|y| cs::recover_from_dct(&y, k, cfg));
    match outcome {
        Ok((values, rec)) => Decoded {
            units: payload,
            failed: rec.degraded,
            diagnostics: Some(DecodeDiagnostics {
                iterations: rec.iterations,
                converged: rec.converged,
                degraded: rec.degraded,
                relative_residual: rec.relative_residual(),
            }),
            values: values.into_values(),
        },
        Err(err) => {
            log::warn!("decode failed for seed {matrix_seed}: {err}");
            Decoded {
                units: payload,
                values: vec![0.0; len],
                diagnostics: None,
                failed: true,
            }
        }
    }
}

/// Leaves send one raw unit each to their level-1 head.
fn raw_leaf_uplinks(builder: &mut TraceBuilder<'_>, units_per_leaf: usize) {
    let tree = builder.tree;
    for cluster in tree.level(1) {
        for &member in &cluster.members {
            if member != cluster.head {
                builder.send(1, cluster.index, member, Some(cluster.head), units_per_leaf);
            }
        }
    }
}

pub fn run_hdacs(
    tree: &ClusterTree,
    field: &SignalVector,
    thresholds: &Thresholds,
    options: &RunOptions,
    seed: u64,
) -> Result<AggregationTrace, ProtocolError> {
    check_field(tree, field)?;
    let th = *thresholds;
    let mut builder = TraceBuilder::new(ProtocolKind::Hdacs, tree, th);
    raw_leaf_uplinks(&mut builder, 1);

    let mut blocks: Vec<Block> = tree
        .level(1)
        .iter()
        .map(|c| Block {
            ids: c.members.clone(),
            values: c.members.iter().map(|&id| field.values()[id]).collect(),
        })
        .collect();
    for c in tree.level(1) {
        builder.clusters.push(ClusterRecord {
            level: 1,
            cluster: c.index,
            head: c.head,
            sensors: c.sensor_count,
            payload_units: th.hdacs_payload(c.sensor_count),
            received_units: c.sensor_count,
            decode: None,
            flagged: false,
        });
    }

    for level in 1..tree.level_count() {
        let children = tree.level(level);
        let parents = tree.level(level + 1);
        // clusters within a level are independent
        let decoded: Vec<Vec<Option<Decoded>>> = parents
            .par_iter()
            .map(|parent| {
                parent
                    .members
                    .iter()
                    .map(|&ci| {
                        let child = &children[ci];
                        (child.head != parent.head).then(|| {
                            encode_decode(
                                &blocks[ci],
                                th.hdacs_payload(child.sensor_count),
                                th.sparsity,
                                measurement_seed(seed, level, ci),
                                &options.recovery,
                            )
                        })
                    })
                    .collect()
            })
            .collect();

        let mut next_blocks = Vec::with_capacity(parents.len());
        for (parent, outcomes) in parents.iter().zip(decoded) {
            let mut parts = Vec::with_capacity(parent.members.len());
            for (&ci, outcome) in parent.members.iter().zip(outcomes) {
                let child = &children[ci];
                match outcome {
                    None => parts.push(std::mem::take(&mut blocks[ci])),
                    Some(d) => {
                        builder.send(
                            level + 1,
                            parent.index,
                            child.head,
                            Some(parent.head),
                            d.units,
                        );
                        let record = builder
                            .clusters
                            .iter_mut()
                            .find(|r| r.level == level && r.cluster == ci)
                            .expect("child record exists");
                        record.decode = d.diagnostics;
                        record.flagged = d.failed;
                        parts.push(Block {
                            ids: std::mem::take(&mut blocks[ci].ids),
                            values: d.values,
                        });
                    }
                }
            }
            let received = parent
                .members
                .iter()
                .map(|&ci| th.hdacs_payload(children[ci].sensor_count))
                .sum();
            builder.clusters.push(ClusterRecord {
                level: level + 1,
                cluster: parent.index,
                head: parent.head,
                sensors: parent.sensor_count,
                payload_units: th.hdacs_payload(parent.sensor_count),
                received_units: received,
                decode: None,
                flagged: false,
            });
            next_blocks.push(Block::merge(parts));
        }
        blocks = next_blocks;
    }

    let top = blocks.pop().expect("one top cluster");
    Ok(builder.finish(top.values))
}

/// Recovery at the top head from the global measurement vector `Phi x`
/// (the in-network sum of every node's contribution).
fn recover_global(
    field: &SignalVector,
    th: &Thresholds,
    options: &RunOptions,
    seed: u64,
) -> (Vec<f64>, Option<DecodeDiagnostics>, bool) {
    let block = Block {
        ids: (0..field.len()).collect(),
        values: field.values().to_vec(),
    };
    let global = th.global();
    if global >= field.len() {
        return (block.values, None, false);
    }
    let seed = measurement_seed(seed, 0, 0);
    let k = th.sparsity.min(global);
    let outcome = cs::measure(field, global, seed)
        .map(|y| y.with_sparsity(k))
        .and_then(|y| cs::recover_from_dct(&y, k, &options.recovery));
    match outcome {
        Ok((values, rec)) => (
            values.into_values(),
            Some(DecodeDiagnostics {
                iterations: rec.iterations,
                converged: rec.converged,
                degraded: rec.degraded,
                relative_residual: rec.relative_residual(),
            }),
            rec.degraded,
        ),
        Err(err) => {
            log::warn!("global recovery failed: {err}");
            (vec![0.0; field.len()], None, true)
        }
    }
}

fn head_uplinks(builder: &mut TraceBuilder<'_>, units: impl Fn(u32, usize) -> usize) {
    let tree = builder.tree;
    for level in 1..tree.level_count() {
        let parents = tree.level(level + 1);
        for (ci, child) in tree.level(level).iter().enumerate() {
            let parent = &parents[tree.parent_index(ci)];
            if child.head != parent.head {
                builder.send(
                    level + 1,
                    parent.index,
                    child.head,
                    Some(parent.head),
                    units(level, ci),
                );
            }
        }
    }
}

fn attach_top_diagnostics(
    trace: &mut AggregationTrace,
    diagnostics: Option<DecodeDiagnostics>,
    failed: bool,
) {
    if let Some(top) = trace.clusters.last_mut() {
        top.decode = diagnostics;
        top.flagged = failed;
    }
}

/// Plain compressive data gathering: every node, the top head included
/// (uplink to the co-located sink), transmits `M` units.
pub fn run_ncs(
    tree: &ClusterTree,
    field: &SignalVector,
    thresholds: &Thresholds,
    options: &RunOptions,
    seed: u64,
) -> Result<AggregationTrace, ProtocolError> {
    check_field(tree, field)?;
    let th = *thresholds;
    let global = th.global();
    let mut builder = TraceBuilder::new(ProtocolKind::Ncs, tree, th);
    raw_leaf_uplinks(&mut builder, global);
    head_uplinks(&mut builder, |_, _| global);
    let top = tree.top();
    builder.send(tree.level_count(), top.index, top.head, None, global);

    for (depth, clusters) in tree.levels.iter().enumerate() {
        for c in clusters {
            builder.clusters.push(ClusterRecord {
                level: depth as u32 + 1,
                cluster: c.index,
                head: c.head,
                sensors: c.sensor_count,
                payload_units: global,
                // incoming vectors are summed into one M-vector
                received_units: global,
                decode: None,
                flagged: false,
            });
        }
    }
    let (recovered, diagnostics, failed) = recover_global(field, &th, options, seed);
    let mut trace = builder.finish(recovered);
    attach_top_diagnostics(&mut trace, diagnostics, failed);
    Ok(trace)
}

/// Hybrid CS: raw at the leaves, `M` units from every transmitting head. With
/// `strict_hcs`, a head holding fewer than `M` samples forwards them raw.
pub fn run_hcs(
    tree: &ClusterTree,
    field: &SignalVector,
    thresholds: &Thresholds,
    options: &RunOptions,
    seed: u64,
) -> Result<AggregationTrace, ProtocolError> {
    check_field(tree, field)?;
    let th = *thresholds;
    let global = th.global();
    let payload = |sensors: usize| {
        if options.strict_hcs {
            sensors.min(global)
        } else {
            global
        }
    };
    let mut builder = TraceBuilder::new(ProtocolKind::Hcs, tree, th);
    raw_leaf_uplinks(&mut builder, 1);
    head_uplinks(&mut builder, |level, ci| {
        payload(tree.level(level)[ci].sensor_count)
    });

    for (depth, clusters) in tree.levels.iter().enumerate() {
        let level = depth as u32 + 1;
        for c in clusters {
            let received = if level == 1 {
                c.sensor_count
            } else {
                c.members
                    .iter()
                    .map(|&ci| payload(tree.level(level - 1)[ci].sensor_count))
                    .sum()
            };
            builder.clusters.push(ClusterRecord {
                level,
                cluster: c.index,
                head: c.head,
                sensors: c.sensor_count,
                payload_units: payload(c.sensor_count),
                received_units: received,
                decode: None,
                flagged: false,
            });
        }
    }

    // a single cluster, or strict mode with every head below M, leaves the
    // top head holding raw data only
    let compressed = tree.level_count() > 1
        && (!options.strict_hcs
            || tree.levels[..tree.levels.len() - 1]
                .iter()
                .flatten()
                .any(|c| c.sensor_count >= global));
    let (recovered, diagnostics, failed) = if compressed {
        recover_global(field, &th, options, seed)
    } else {
        (field.values().to_vec(), None, false)
    };
    let mut trace = builder.finish(recovered);
    attach_top_diagnostics(&mut trace, diagnostics, failed);
    Ok(trace)
}

pub fn run_protocol(
    kind: ProtocolKind,
    tree: &ClusterTree,
    field: &SignalVector,
    thresholds: &Thresholds,
    options: &RunOptions,
    seed: u64,
) -> Result<AggregationTrace, ProtocolError> {
    match kind {
        ProtocolKind::Hdacs => run_hdacs(tree, field, thresholds, options, seed),
        ProtocolKind::Ncs => run_ncs(tree, field, thresholds, options, seed),
        ProtocolKind::Hcs => run_hcs(tree, field, thresholds, options, seed),
    }
}
