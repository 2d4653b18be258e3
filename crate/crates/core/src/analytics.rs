//! Closed-form measurement and energy expressions for an `N`-node,
//! `T`-level tree with cluster factor `n`, each paired with a direct
//! per-level summation so the two can be checked against each other.
//!
//! Logarithms are base 2 throughout.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deployment::{self, ClusterTree};
use crate::protocols::{AggregationTrace, ProtocolKind, Thresholds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("n must be a power of 4 (got {0})")]
    ClusterFactor(usize),
    #[error("T must be at least 1")]
    Levels,
    #[error("n^T must not exceed N, but {factor}^{levels} > {nodes}")]
    TooManyLevels {
        nodes: usize,
        factor: usize,
        levels: u32,
    },
    #[error("sparsity K must be at least 1")]
    Sparsity,
    #[error("{name} must be positive and finite (got {value})")]
    Constant { name: &'static str, value: f64 },
}

fn powi(n: f64, e: i32) -> f64 {
    n.powi(e)
}

/// `S1 = sum_{i=1}^{T-1} i / n^i`.
pub fn series_s1(n: f64, levels: u32) -> f64 {
    if levels <= 1 {
        return 0.0;
    }
    let t = levels as i32;
    let q = 1.0 / n;
    (q * (1.0 - powi(q, t - 1))) / ((1.0 - q) * (1.0 - q))
        - (t - 1) as f64 / (powi(n, t) * (1.0 - q))
}

/// `S2 = sum_{i=1}^{T-1} 1 / n^i`.
pub fn series_s2(n: f64, levels: u32) -> f64 {
    if levels <= 1 {
        return 0.0;
    }
    let q = 1.0 / n;
    q * (1.0 - powi(q, levels as i32 - 1)) / (1.0 - q)
}

/// `S1' = sum_{i=1}^{T-1} i n^(-i/2)`.
pub fn series_s1p(n: f64, levels: u32) -> f64 {
    if levels <= 1 {
        return 0.0;
    }
    let t = levels as f64;
    let r = n.powf(-0.5);
    r * (1.0 - n.powf(-(t - 1.0) / 2.0)) / ((1.0 - r) * (1.0 - r))
        - (t - 1.0) * n.powf(-t / 2.0) / (1.0 - r)
}

/// `S2' = sum_{i=1}^{T-1} n^(-i/2)`.
pub fn series_s2p(n: f64, levels: u32) -> f64 {
    if levels <= 1 {
        return 0.0;
    }
    let r = n.powf(-0.5);
    r * (1.0 - n.powf(-(levels as f64 - 1.0) / 2.0)) / (1.0 - r)
}

/// Term-by-term sums backing the closed forms above. Empty sums are `+0`.
pub mod direct {
    pub fn s1(n: f64, levels: u32) -> f64 {
        (1..levels)
            .map(|i| i as f64 / n.powi(i as i32))
            .fold(0.0, |acc, t| acc + t)
    }

    pub fn s2(n: f64, levels: u32) -> f64 {
        (1..levels)
            .map(|i| 1.0 / n.powi(i as i32))
            .fold(0.0, |acc, t| acc + t)
    }

    pub fn s1p(n: f64, levels: u32) -> f64 {
        (1..levels)
            .map(|i| i as f64 * n.powf(-(i as f64) / 2.0))
            .fold(0.0, |acc, t| acc + t)
    }

    pub fn s2p(n: f64, levels: u32) -> f64 {
        (1..levels)
            .map(|i| n.powf(-(i as f64) / 2.0))
            .fold(0.0, |acc, t| acc + t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticParams {
    pub node_count: usize,
    pub cluster_factor: usize,
    pub levels: u32,
    pub sparsity: usize,
    /// Startup energy per transmission, `c_s`.
    pub startup: f64,
    /// Energy per payload unit per unit distance, `c`.
    pub per_unit_distance: f64,
    /// Level-1 cell area `s`.
    pub unit_area: f64,
}

impl AnalyticParams {
    /// Unit constants and `K = 1`.
    pub fn new(node_count: usize, cluster_factor: usize, levels: u32) -> Self {
        Self {
            node_count,
            cluster_factor,
            levels,
            sparsity: 1,
            startup: 1.0,
            per_unit_distance: 1.0,
            unit_area: 1.0,
        }
    }

    /// Uses the tree's active level count and area.
    pub fn for_tree(tree: &ClusterTree, sparsity: usize) -> Self {
        Self {
            sparsity,
            unit_area: tree.unit_area,
            ..Self::new(tree.node_count(), tree.cluster_factor, tree.level_count())
        }
    }

    pub fn with_sparsity(mut self, sparsity: usize) -> Self {
        self.sparsity = sparsity;
        self
    }

    pub fn with_energy(mut self, startup: f64, per_unit_distance: f64) -> Self {
        self.startup = startup;
        self.per_unit_distance = per_unit_distance;
        self
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let n = self.cluster_factor;
        if n < 4 || !n.is_power_of_two() || !n.trailing_zeros().is_multiple_of(2) {
            return Err(AnalyticsError::ClusterFactor(n));
        }
        if self.levels == 0 {
            return Err(AnalyticsError::Levels);
        }
        let fits = (n as u128)
            .checked_pow(self.levels)
            .is_some_and(|full| full <= self.node_count as u128);
        if !fits {
            return Err(AnalyticsError::TooManyLevels {
                nodes: self.node_count,
                factor: n,
                levels: self.levels,
            });
        }
        if self.sparsity == 0 {
            return Err(AnalyticsError::Sparsity);
        }
        for (name, value) in [
            ("c_s", self.startup),
            ("c", self.per_unit_distance),
            ("s", self.unit_area),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(AnalyticsError::Constant { name, value });
            }
        }
        Ok(())
    }

    fn n(&self) -> f64 {
        self.cluster_factor as f64
    }

    fn k(&self) -> f64 {
        self.sparsity as f64
    }

    fn total(&self) -> f64 {
        self.node_count as f64
    }

    /// `n^(T-1)`, the number of level-1 clusters.
    fn leaf_clusters(&self) -> f64 {
        powi(self.n(), self.levels as i32 - 1)
    }

    /// `c (pi/12) s^(1/2)`.
    fn distance_scale(&self) -> f64 {
        self.per_unit_distance * PI / 12.0 * self.unit_area.sqrt()
    }

    fn startup_total(&self) -> f64 {
        self.leaf_clusters() * self.startup * (1.0 + series_s2(self.n(), self.levels))
    }
}

/// `(Omega(M), O(M))`.
pub fn measurement_bounds(p: &AnalyticParams) -> (f64, f64) {
    let (n, t) = (p.n(), p.levels);
    let raw = p.total() - p.leaf_clusters();
    let scale = p.k() * (n - 1.0) * p.leaf_clusters() * n.log2();
    let s1 = series_s1(n, t);
    (raw + scale * s1, raw + scale * (s1 + series_s2(n, t)))
}

/// `(M_NCS, M_HCS)`.
pub fn baseline_measurements(p: &AnalyticParams) -> (f64, f64) {
    let log_total = p.total().log2();
    let ncs = p.total() * p.k() * log_total;
    let hcs = p.total() - p.leaf_clusters()
        + p.k() * (p.n() - 1.0) * p.leaf_clusters() * log_total * series_s2(p.n(), p.levels);
    (ncs, hcs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Lower,
    Upper,
}

/// Payload of a level-`i` child head under each bound: `K i log n` for the
/// lower bound and `K (i + 1) log n` for the upper.
fn child_payload(p: &AnalyticParams, child_level: u32, bound: Bound) -> f64 {
    let i = match bound {
        Bound::Lower => child_level,
        Bound::Upper => child_level + 1,
    };
    p.k() * i as f64 * p.n().log2()
}

/// Per-level summation of transmitted units: level 1 sends `N - n^(T-1)`
/// raw units; each of the `n^(T-i)` level-`i` clusters receives `n - 1`
/// child payloads.
pub fn measurement_sum(p: &AnalyticParams, protocol: ProtocolKind, bound: Bound) -> f64 {
    let n = p.n();
    let t = p.levels as i32;
    let log_total = p.total().log2();
    let raw = p.total() - p.leaf_clusters();
    let heads = |payload: &dyn Fn(u32) -> f64| -> f64 {
        (2..=p.levels)
            .map(|i| powi(n, t - i as i32) * (n - 1.0) * payload(i - 1))
            .sum()
    };
    match protocol {
        ProtocolKind::Hdacs => raw + heads(&|child| child_payload(p, child, bound)),
        ProtocolKind::Hcs => raw + heads(&|_| p.k() * log_total),
        ProtocolKind::Ncs => p.total() * p.k() * log_total,
    }
}

/// Quarter-disk approximation of the summed head-to-transmitter distance in
/// a level-`level` cluster. `level_one_members` replaces `n` by `N_1` at
/// level 1.
pub fn expected_distance(level: u32, p: &AnalyticParams, level_one_members: Option<f64>) -> f64 {
    let scale = PI / 12.0 * p.unit_area.sqrt();
    match (level, level_one_members) {
        (1, Some(members)) => scale * (members - 1.0),
        _ => scale * p.n().powf((level as f64 - 1.0) / 2.0) * (p.n() - 1.0),
    }
}

/// The same expectation written as `4 (n-1)/s_i` times the quarter-disk
/// integral `pi b^3 / 6`, with `b = s_i^(1/2) / 2`.
pub fn quarter_disk_distance(level: u32, p: &AnalyticParams) -> f64 {
    let area = p.unit_area * powi(p.n(), level as i32 - 1);
    let b = area.sqrt() / 2.0;
    4.0 * (p.n() - 1.0) / area * PI * b.powi(3) / 6.0
}

/// `int_0^b int_0^b sqrt(x^2 + y^2) dx dy`.
pub fn square_quadrant_integral(b: f64) -> f64 {
    b.powi(3) * (2f64.sqrt() + (1.0 + 2f64.sqrt()).ln()) / 3.0
}

/// Expectation with the exact square-cell integral in place of the
/// quarter disk (about 1.46 times larger).
pub fn square_cell_distance(level: u32, p: &AnalyticParams) -> f64 {
    let area = p.unit_area * powi(p.n(), level as i32 - 1);
    let b = area.sqrt() / 2.0;
    4.0 * (p.n() - 1.0) / area * square_quadrant_integral(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBounds {
    pub lower: f64,
    pub upper: f64,
    pub ncs: f64,
    pub hcs: f64,
}

pub fn energy_bounds(p: &AnalyticParams) -> EnergyBounds {
    let (n, t) = (p.n(), p.levels);
    let raw = p.total() - p.leaf_clusters();
    let heads = p.k() * (n - 1.0) * p.leaf_clusters();
    let log_total = p.total().log2();
    let s1p = series_s1p(n, t);
    let s2p = series_s2p(n, t);
    let base = p.startup_total();
    let scale = p.distance_scale();
    EnergyBounds {
        lower: base + scale * (raw + heads * s1p * n.log2()),
        upper: base + scale * (raw + heads * (s1p + s2p) * n.log2()),
        ncs: base + scale * log_total * (raw + heads * s2p),
        hcs: base + scale * (raw + heads * log_total * s2p),
    }
}

/// Per-level summation: each level-1 cluster costs `c_s + c d_1` with
/// `d_1` over `N_1 - 1` transmitters; each level-`i` cluster costs
/// `c_s + c d_i M` with `M` the protocol's child payload.
///
/// For NCS the leaf term carries `log N` without `K`, as in the published
/// closed form.
pub fn energy_sum(p: &AnalyticParams, protocol: ProtocolKind, bound: Bound) -> f64 {
    let n = p.n();
    let t = p.levels as i32;
    let log_total = p.total().log2();
    let scale = PI / 12.0 * p.unit_area.sqrt();
    // level-1 distances summed over clusters: sum (N_1 - 1) = N - n^(T-1)
    let leaf_distance = scale * (p.total() - p.leaf_clusters());
    let leaf_payload = match protocol {
        ProtocolKind::Ncs => log_total,
        _ => 1.0,
    };
    let mut energy =
        p.leaf_clusters() * p.startup + p.per_unit_distance * leaf_distance * leaf_payload;
    for i in 2..=p.levels {
        let clusters = powi(n, t - i as i32);
        let payload = match protocol {
            ProtocolKind::Hdacs => child_payload(p, i - 1, bound),
            _ => p.k() * log_total,
        };
        energy +=
            clusters * (p.startup + p.per_unit_distance * expected_distance(i, p, None) * payload);
    }
    energy
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub params: AnalyticParams,
    pub s1: f64,
    pub s2: f64,
    pub s1p: f64,
    pub s2p: f64,
    pub m_lower: f64,
    pub m_upper: f64,
    pub m_ncs: f64,
    pub m_hcs: f64,
    pub e_lower: f64,
    pub e_upper: f64,
    pub e_ncs: f64,
    pub e_hcs: f64,
    /// Quarter-disk `d_i`, index 0 = level 1 (with `N_1 = n`).
    pub distances: Vec<f64>,
    pub p1: f64,
    pub p2: Option<f64>,
}

pub fn analyze(p: &AnalyticParams) -> Result<AnalyticReport, AnalyticsError> {
    p.validate()?;
    let (n, t) = (p.n(), p.levels);
    let (m_lower, m_upper) = measurement_bounds(p);
    let (m_ncs, m_hcs) = baseline_measurements(p);
    let e = energy_bounds(p);
    let coverage = deployment::coverage(p.node_count, p.cluster_factor, t);
    Ok(AnalyticReport {
        params: *p,
        s1: series_s1(n, t),
        s2: series_s2(n, t),
        s1p: series_s1p(n, t),
        s2p: series_s2p(n, t),
        m_lower,
        m_upper,
        m_ncs,
        m_hcs,
        e_lower: e.lower,
        e_upper: e.upper,
        e_ncs: e.ncs,
        e_hcs: e.hcs,
        distances: (1..=t).map(|i| expected_distance(i, p, None)).collect(),
        p1: coverage.p1,
        p2: coverage.p2,
    })
}

impl AnalyticReport {
    /// `key<TAB>value` lines; `p2` is written as `absent` when undefined.
    pub fn to_key_value(&self) -> String {
        let p = &self.params;
        let mut out = String::from("key\tvalue\n");
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key}\t{value}");
        };
        put("N", p.node_count.to_string());
        put("n", p.cluster_factor.to_string());
        put("T", p.levels.to_string());
        put("K", p.sparsity.to_string());
        put("c_s", p.startup.to_string());
        put("c", p.per_unit_distance.to_string());
        put("s", p.unit_area.to_string());
        for (key, value) in [
            ("S1", self.s1),
            ("S2", self.s2),
            ("S1p", self.s1p),
            ("S2p", self.s2p),
            ("M_lower", self.m_lower),
            ("M_upper", self.m_upper),
            ("M_NCS", self.m_ncs),
            ("M_HCS", self.m_hcs),
            ("E_lower", self.e_lower),
            ("E_upper", self.e_upper),
            ("E_NCS", self.e_ncs),
            ("E_HCS", self.e_hcs),
        ] {
            put(key, value.to_string());
        }
        for (i, d) in self.distances.iter().enumerate() {
            put(&format!("d_{}", i + 1), d.to_string());
        }
        put("P1", self.p1.to_string());
        put(
            "P2",
            self.p2
                .map_or_else(|| "absent".to_string(), |v| v.to_string()),
        );
        out
    }
}

/// One closed form compared against its direct evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub closed_form: f64,
    pub direct: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn new(name: &str, closed_form: f64, direct: f64, tolerance: f64) -> Self {
        let relative_error = relative_error(closed_form, direct);
        Self {
            name: name.to_string(),
            closed_form,
            direct,
            relative_error,
            tolerance,
            pass: relative_error <= tolerance,
        }
    }
}

/// `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub const SERIES_TOLERANCE: f64 = 1e-12;
pub const ENERGY_TOLERANCE: f64 = 1e-9;

/// Every closed form against its summation oracle. The series use
/// [`SERIES_TOLERANCE`]; measurement and energy totals use
/// [`ENERGY_TOLERANCE`] since they compound several floating sums.
pub fn oracle_checks(p: &AnalyticParams) -> Vec<OracleCheck> {
    let (n, t) = (p.n(), p.levels);
    let (m_lower, m_upper) = measurement_bounds(p);
    let (m_ncs, m_hcs) = baseline_measurements(p);
    let e = energy_bounds(p);
    vec![
        OracleCheck::new("S1", series_s1(n, t), direct::s1(n, t), SERIES_TOLERANCE),
        OracleCheck::new("S2", series_s2(n, t), direct::s2(n, t), SERIES_TOLERANCE),
        OracleCheck::new("S1p", series_s1p(n, t), direct::s1p(n, t), SERIES_TOLERANCE),
        OracleCheck::new("S2p", series_s2p(n, t), direct::s2p(n, t), SERIES_TOLERANCE),
        OracleCheck::new(
            "M_lower",
            m_lower,
            measurement_sum(p, ProtocolKind::Hdacs, Bound::Lower),
            ENERGY_TOLERANCE,
        ),
        OracleCheck::new(
            "M_upper",
            m_upper,
            measurement_sum(p, ProtocolKind::Hdacs, Bound::Upper),
            ENERGY_TOLERANCE,
        ),
        OracleCheck::new(
            "M_NCS",
            m_ncs,
            measurement_sum(p, ProtocolKind::Ncs, Bound::Lower),
            ENERGY_TOLERANCE,
        ),
        OracleCheck::new(
            "M_HCS",
            m_hcs,
            measurement_sum(p, ProtocolKind::Hcs, Bound::Lower),
            ENERGY_TOLERANCE,
        ),
        OracleCheck::new(
            "E_lower",
            e.lower,
            energy_sum(p, ProtocolKind::Hdacs, Bound::Lower),
            ENERGY_TOLERANCE,
        ),
        OracleCheck::new(
            "E_upper",
            e.upper,
            energy_sum(p, ProtocolKind::Hdacs, Bound::Upper),
            ENERGY_TOLERANCE,
        ),
        OracleCheck::new(
            "E_NCS",
            e.ncs,
            energy_sum(p, ProtocolKind::Ncs, Bound::Lower),
            ENERGY_TOLERANCE,
        ),
        OracleCheck::new(
            "E_HCS",
            e.hcs,
            energy_sum(p, ProtocolKind::Hcs, Bound::Lower),
            ENERGY_TOLERANCE,
        ),
    ]
}

/// Total rounding added by integer payloads in an HDACS run: the sum over
/// compressed head transmissions of `ceil(K log2 N_i) - K log2 N_i`.
pub fn hdacs_ceiling_slack(tree: &ClusterTree, thresholds: &Thresholds) -> f64 {
    let k = thresholds.sparsity as f64;
    let mut slack = 0.0;
    for level in 1..tree.level_count() {
        let parents = tree.level(level + 1);
        for (ci, child) in tree.level(level).iter().enumerate() {
            if child.head == parents[tree.parent_index(ci)].head {
                continue;
            }
            let sensors = child.sensor_count;
            let units = thresholds.hdacs_payload(sensors);
            if units < sensors {
                slack += units as f64 - k * (sensors as f64).log2();
            }
        }
    }
    slack
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub startup: f64,
    pub per_unit_distance: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            startup: 1.0,
            per_unit_distance: 1.0,
        }
    }
}

impl From<&AnalyticParams> for EnergyParams {
    fn from(p: &AnalyticParams) -> Self {
        Self {
            startup: p.startup,
            per_unit_distance: p.per_unit_distance,
        }
    }
}

/// `c_s + c d M`, or `c_s f + c d f m` for `f` frames of size `m`.
pub fn transmission_energy(
    units: usize,
    frames: usize,
    distance: f64,
    params: &EnergyParams,
    frame_size: Option<usize>,
) -> f64 {
    match frame_size {
        Some(m) => {
            params.startup * frames as f64
                + params.per_unit_distance * distance * (frames * m) as f64
        }
        None => params.startup + params.per_unit_distance * distance * units as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEnergy {
    pub protocol: ProtocolKind,
    pub per_node: Vec<f64>,
    /// Index 0 = transmissions received at level 1.
    pub per_level: Vec<f64>,
    pub total: f64,
}

pub fn protocol_energy(
    trace: &AggregationTrace,
    params: &EnergyParams,
    frame_mode: bool,
) -> ProtocolEnergy {
    let frame_size = frame_mode.then_some(trace.frame_size);
    let mut per_node = vec![0.0; trace.nodes.len()];
    let mut per_level = vec![0.0; trace.levels as usize];
    for t in &trace.transmissions {
        let e = transmission_energy(t.units, t.frames, t.distance, params, frame_size);
        per_node[t.sender] += e;
        per_level[(t.level - 1) as usize] += e;
    }
    ProtocolEnergy {
        protocol: trace.protocol,
        total: per_node.iter().sum(),
        per_node,
        per_level,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeEnergy {
    pub node: usize,
    pub role: u32,
    pub hdacs: Option<f64>,
    pub ncs: Option<f64>,
    pub hcs: Option<f64>,
    /// HDACS over NCS; absent when either side is missing or zero.
    pub ratio1: Option<f64>,
    /// HDACS over HCS.
    pub ratio2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub frame_mode: bool,
    pub nodes: Vec<NodeEnergy>,
    pub protocols: BTreeMap<ProtocolKind, ProtocolEnergy>,
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some(a / b),
        _ => None,
    }
}

/// Per-node energy for every supplied trace (all over the same tree) and
/// the HDACS ratios against the baselines.
pub fn per_node_energy(
    traces: &[AggregationTrace],
    params: &EnergyParams,
    frame_mode: bool,
) -> EnergyReport {
    let protocols: BTreeMap<ProtocolKind, ProtocolEnergy> = traces
        .iter()
        .map(|t| (t.protocol, protocol_energy(t, params, frame_mode)))
        .collect();
    let roles: Vec<u32> = traces
        .first()
        .map(|t| t.nodes.iter().map(|n| n.role).collect())
        .unwrap_or_default();
    let lookup = |kind: ProtocolKind, node: usize| protocols.get(&kind).map(|e| e.per_node[node]);
    let nodes = roles
        .iter()
        .enumerate()
        .map(|(node, &role)| {
            let hdacs = lookup(ProtocolKind::Hdacs, node);
            let ncs = lookup(ProtocolKind::Ncs, node);
            let hcs = lookup(ProtocolKind::Hcs, node);
            NodeEnergy {
                node,
                role,
                hdacs,
                ncs,
                hcs,
                ratio1: ratio(hdacs, ncs),
                ratio2: ratio(hdacs, hcs),
            }
        })
        .collect();
    EnergyReport {
        frame_mode,
        nodes,
        protocols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        relative_error(a, b) <= tol
    }

    #[test]
    fn series_examples() {
        assert!(close(series_s1(4.0, 3), 0.375, 1e-15));
        assert!(close(series_s2(4.0, 3), 0.3125, 1e-15));
        assert!(close(series_s1(4.0, 5), 0.4375, 1e-15));
        assert!(close(series_s2(4.0, 5), 85.0 / 256.0, 1e-15));
        assert!(close(series_s1p(4.0, 5), 1.625, 1e-14));
        assert!(close(series_s1p(4.0, 2), 0.5, 1e-15));
        assert!(close(series_s2p(4.0, 2), 0.5, 1e-15));
        assert!(close(series_s2p(16.0, 3), 0.3125, 1e-15));
        for f in [series_s1, series_s2, series_s1p, series_s2p] {
            assert_eq!(f(4.0, 1), 0.0);
        }
    }

    #[test]
    fn measurement_examples() {
        let p = AnalyticParams::new(1024, 4, 5);
        let (lo, hi) = measurement_bounds(&p);
        assert!(close(lo, 1440.0, 1e-12));
        assert!(close(hi, 1950.0, 1e-12));
        let (ncs, hcs) = baseline_measurements(&p);
        assert!(close(ncs, 10240.0, 1e-12));
        assert!(close(hcs, 3318.0, 1e-12));

        let single = AnalyticParams::new(4, 4, 1);
        assert_eq!(measurement_bounds(&single), (3.0, 3.0));
        assert_eq!(baseline_measurements(&single).1, 3.0);
    }

    #[test]
    fn distance_examples() {
        let p = AnalyticParams::new(64, 4, 3);
        assert!(close(expected_distance(2, &p, None), PI / 2.0, 1e-15));
        assert!(close(expected_distance(1, &p, Some(5.0)), PI / 3.0, 1e-15));
        for i in 1..=6 {
            assert!(close(
                quarter_disk_distance(i, &p),
                expected_distance(i, &p, None),
                1e-13
            ));
        }
        let ratio = square_cell_distance(3, &p) / quarter_disk_distance(3, &p);
        assert!((ratio - 1.4615).abs() < 1e-3);
    }

    #[test]
    fn energy_example_and_degenerate_tree() {
        let p = AnalyticParams::new(1024, 4, 5);
        let e = energy_bounds(&p);
        assert!(close(e.lower, 341.0 + PI / 12.0 * 3264.0, 1e-12));
        let single = AnalyticParams::new(4, 4, 1);
        let e = energy_bounds(&single);
        let expected = 1.0 + PI / 12.0 * 3.0;
        for v in [e.lower, e.upper, e.hcs] {
            assert!(close(v, expected, 1e-15));
        }
    }

    #[test]
    fn oracle_checks_pass_on_exact_powers() {
        for (n, t) in [(4usize, 1), (4, 5), (16, 3), (64, 2)] {
            let nodes = n.pow(t);
            let p = AnalyticParams::new(nodes, n, t)
                .with_sparsity(2)
                .with_energy(0.5, 3.0);
            for check in oracle_checks(&p) {
                assert!(check.pass, "{n} {t} {check:?}");
            }
        }
    }

    #[test]
    fn validation_names_the_problem() {
        let err = AnalyticParams::new(100, 3, 2).validate().unwrap_err();
        assert_eq!(err.to_string(), "n must be a power of 4 (got 3)");
        assert!(AnalyticParams::new(100, 4, 4).validate().is_err());
        assert!(AnalyticParams::new(100, 4, 3)
            .with_energy(0.0, 1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn report_key_value_table() {
        let r = analyze(&AnalyticParams::new(1024, 4, 5)).unwrap();
        let text = r.to_key_value();
        assert!(text.starts_with("key\tvalue\n"));
        assert!(text.contains("M_lower\t1440\n"));
        assert!(text.contains("P2\tabsent\n"));
        assert_eq!(r.distances.len(), 5);
    }

    #[test]
    fn energy_formula_and_frames() {
        let params = EnergyParams::default();
        assert_eq!(transmission_energy(3, 1, 2.0, &params, None), 7.0);
        assert_eq!(transmission_energy(5, 2, 1.0, &params, Some(4)), 2.0 + 8.0);
    }
}
