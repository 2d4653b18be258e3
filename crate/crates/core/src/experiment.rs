//! Config-driven runs and parameter sweeps.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{self, AnalyticParams, AnalyticReport, EnergyParams, EnergyReport};
use crate::cs::{self, RecoveryConfig, Snr};
use crate::deployment::{self, ClusterTree, DeployConfig, DeployError, Placement};
use crate::field::{self, FieldConfig, FieldError, GaussianBump, SignalVector};
use crate::protocols::{
    self, AggregationTrace, ProtocolError, ProtocolKind, RunOptions, Thresholds,
};
use crate::seed;

/// A config value that failed validation, named by its dotted path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid value for `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl ToString) -> Self {
        Self {
            field: field.to_string(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Deploy(#[from] DeployError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analytics(#[from] analytics::AnalyticsError),
}

impl ExperimentError {
    /// Validation and parse problems, as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(self, ExperimentError::Config(_) | ExperimentError::Parse(_))
    }
}

fn default_seed() -> u64 {
    1
}

fn default_protocols() -> Vec<ProtocolKind> {
    ProtocolKind::ALL.to_vec()
}

fn default_unit_area() -> f64 {
    1.0
}

fn default_base_level() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    0.01
}

fn default_frame_size() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSection {
    pub node_count: usize,
    pub cluster_factor: usize,
    /// Forces `T`; otherwise the largest `T` with `n^T <= N`.
    #[serde(default)]
    pub levels: Option<u32>,
    #[serde(default = "default_unit_area")]
    pub unit_area: f64,
    #[serde(default)]
    pub placement: Placement,
    /// Election round; round 0 is the initial election.
    #[serde(default)]
    pub round: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default = "default_base_level")]
    pub base_level: f64,
    #[serde(default)]
    pub bumps: Vec<GaussianBump>,
    #[serde(default)]
    pub noise_halfwidth: f64,
    #[serde(default = "default_alpha")]
    pub truncation_alpha: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            base_level: default_base_level(),
            bumps: Vec::new(),
            noise_halfwidth: 0.0,
            truncation_alpha: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    /// Fixed `K`; when absent, `K` is the support size of the whole field's
    /// DCT after `alpha` truncation.
    #[serde(default)]
    pub sparsity: Option<usize>,
    #[serde(default = "default_frame_size")]
    pub frame_size: usize,
    #[serde(default)]
    pub frame_mode: bool,
    #[serde(default)]
    pub strict_hcs: bool,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            sparsity: None,
            frame_size: default_frame_size(),
            frame_mode: false,
            strict_hcs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_sweep_nodes")]
    pub node_counts: Vec<usize>,
    #[serde(default = "default_sweep_factors")]
    pub cluster_factors: Vec<usize>,
    #[serde(default = "default_sweep_seeds")]
    pub seeds: Vec<u64>,
    /// Network size for the per-method totals and ratio tables.
    #[serde(default = "default_fixed_nodes")]
    pub fixed_node_count: usize,
    #[serde(default = "default_fixed_factors")]
    pub fixed_cluster_factors: Vec<usize>,
    #[serde(default = "default_energy_nodes")]
    pub energy_node_counts: Vec<usize>,
    #[serde(default = "default_energy_factor")]
    pub energy_cluster_factor: usize,
}

fn default_sweep_nodes() -> Vec<usize> {
    vec![300, 400, 500, 600, 700]
}

fn default_sweep_factors() -> Vec<usize> {
    vec![4, 16]
}

fn default_sweep_seeds() -> Vec<u64> {
    vec![1]
}

fn default_fixed_nodes() -> usize {
    1024
}

fn default_fixed_factors() -> Vec<usize> {
    vec![4, 16, 64]
}

fn default_energy_nodes() -> Vec<usize> {
    vec![300, 400, 500, 600, 700, 800]
}

fn default_energy_factor() -> usize {
    4
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            node_counts: default_sweep_nodes(),
            cluster_factors: default_sweep_factors(),
            seeds: default_sweep_seeds(),
            fixed_node_count: default_fixed_nodes(),
            fixed_cluster_factors: default_fixed_factors(),
            energy_node_counts: default_energy_nodes(),
            energy_cluster_factor: default_energy_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolKind>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub deployment: DeploymentSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn check_factor(field: &str, n: usize) -> Result<(), ConfigError> {
    if n >= 4 && n.is_power_of_two() && n.trailing_zeros().is_multiple_of(2) {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("n must be a power of 4 (got {n})"),
        ))
    }
}

fn check_positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must be positive and finite (got {value})"),
        ))
    }
}

fn check_non_empty<T>(field: &str, list: &[T]) -> Result<(), ConfigError> {
    if list.is_empty() {
        Err(ConfigError::new(field, "must not be empty"))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    /// The reference setup: 400 nodes, `n = 4`, `T = 3`, flat field,
    /// `alpha = 0.01`, frames of 4 units.
    pub fn preset() -> Self {
        Self {
            seed: default_seed(),
            protocols: default_protocols(),
            out_dir: None,
            deployment: DeploymentSection {
                node_count: 400,
                cluster_factor: 4,
                levels: Some(3),
                unit_area: 1.0,
                placement: Placement::Uniform,
                round: 0,
            },
            field: FieldSection::default(),
            thresholds: ThresholdSection::default(),
            energy: EnergyParams::default(),
            recovery: RecoveryConfig::default(),
            sweep: SweepSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_non_empty("protocols", &self.protocols)?;
        let d = &self.deployment;
        check_factor("deployment.cluster_factor", d.cluster_factor)?;
        if d.node_count < d.cluster_factor {
            return Err(ConfigError::new(
                "deployment.node_count",
                format!(
                    "need at least n = {} nodes (got {})",
                    d.cluster_factor, d.node_count
                ),
            ));
        }
        if let Some(t) = d.levels {
            let fits = t >= 1
                && (d.cluster_factor as u128)
                    .checked_pow(t)
                    .is_some_and(|full| full <= d.node_count as u128);
            if !fits {
                return Err(ConfigError::new(
                    "deployment.levels",
                    format!("need 1 <= T and n^T <= N (got T = {t})"),
                ));
            }
        }
        check_positive("deployment.unit_area", d.unit_area)?;

        let f = &self.field;
        if !f.base_level.is_finite() {
            return Err(ConfigError::new("field.base_level", "must be finite"));
        }
        if !(f.noise_halfwidth.is_finite() && f.noise_halfwidth >= 0.0) {
            return Err(ConfigError::new("field.noise_halfwidth", "must be >= 0"));
        }
        if !(f.truncation_alpha > 0.0 && f.truncation_alpha <= 1.0) {
            return Err(ConfigError::new(
                "field.truncation_alpha",
                "must lie in (0, 1]",
            ));
        }
        if f.bumps.iter().any(|b| b.width.is_nan() || b.width <= 0.0) {
            return Err(ConfigError::new(
                "field.bumps",
                "every bump width must be positive",
            ));
        }

        let th = &self.thresholds;
        if th.sparsity == Some(0) {
            return Err(ConfigError::new(
                "thresholds.sparsity",
                "K must be at least 1",
            ));
        }
        if th.frame_size == 0 {
            return Err(ConfigError::new(
                "thresholds.frame_size",
                "m must be at least 1",
            ));
        }
        check_positive("energy.startup", self.energy.startup)?;
        check_positive("energy.per_unit_distance", self.energy.per_unit_distance)?;
        if self.recovery.max_iterations == 0 {
            return Err(ConfigError::new(
                "recovery.max_iterations",
                "must be at least 1",
            ));
        }
        check_positive("recovery.tolerance", self.recovery.tolerance)?;
        if self.recovery.band == Some(0) {
            return Err(ConfigError::new("recovery.band", "must be at least 1"));
        }

        let s = &self.sweep;
        check_non_empty("sweep.node_counts", &s.node_counts)?;
        check_non_empty("sweep.cluster_factors", &s.cluster_factors)?;
        check_non_empty("sweep.seeds", &s.seeds)?;
        check_non_empty("sweep.fixed_cluster_factors", &s.fixed_cluster_factors)?;
        check_non_empty("sweep.energy_node_counts", &s.energy_node_counts)?;
        for &n in s.cluster_factors.iter().chain(&s.fixed_cluster_factors) {
            check_factor("sweep.cluster_factors", n)?;
        }
        check_factor("sweep.energy_cluster_factor", s.energy_cluster_factor)?;
        for (name, list) in [
            ("sweep.node_counts", &s.node_counts),
            ("sweep.energy_node_counts", &s.energy_node_counts),
        ] {
            if let Some(&bad) = list.iter().find(|&&v| v < 4) {
                return Err(ConfigError::new(
                    name,
                    format!("network sizes must be at least 4 (got {bad})"),
                ));
            }
        }
        if s.fixed_node_count < 4 {
            return Err(ConfigError::new(
                "sweep.fixed_node_count",
                "must be at least 4",
            ));
        }
        Ok(())
    }

    pub fn deploy_config(&self) -> DeployConfig {
        let d = &self.deployment;
        DeployConfig {
            node_count: d.node_count,
            cluster_factor: d.cluster_factor,
            unit_area: d.unit_area,
            seed: self.seed,
            level_override: d.levels,
            placement: d.placement,
        }
    }

    pub fn field_config(&self) -> FieldConfig {
        let f = &self.field;
        FieldConfig {
            base_level: f.base_level,
            bumps: f.bumps.clone(),
            noise_halfwidth: f.noise_halfwidth,
            truncation_alpha: f.truncation_alpha,
            seed: self.seed,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            recovery: self.recovery,
            strict_hcs: self.thresholds.strict_hcs,
        }
    }

    /// Same experiment with a different deployment and seed.
    fn at(
        &self,
        node_count: usize,
        cluster_factor: usize,
        seed: u64,
        placement: Placement,
    ) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg.deployment.node_count = node_count;
        cfg.deployment.cluster_factor = cluster_factor;
        cfg.deployment.levels = None;
        cfg.deployment.placement = placement;
        cfg
    }
}

/// `K` from the config, or from `alpha`-truncating the whole field's DCT.
pub fn sparsity_for(cfg: &ExperimentConfig, field: &SignalVector) -> Result<usize, FieldError> {
    if let Some(k) = cfg.thresholds.sparsity {
        return Ok(k);
    }
    let sparse = field::truncate(&field::dct_forward(field), cfg.field.truncation_alpha)?;
    Ok(field::estimate_sparsity(&sparse).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub protocol: ProtocolKind,
    pub total_units: usize,
    pub total_frames: usize,
    pub level_totals: Vec<usize>,
    pub gammas: Vec<f64>,
    pub energy: f64,
    pub snr: Snr,
    pub flagged_clusters: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub tree: ClusterTree,
    pub field: SignalVector,
    pub thresholds: Thresholds,
    pub traces: Vec<AggregationTrace>,
    pub summaries: Vec<ProtocolSummary>,
    pub energy: EnergyReport,
    pub analytic: AnalyticReport,
    pub ceiling_slack: f64,
}

impl ExperimentOutcome {
    pub fn trace(&self, kind: ProtocolKind) -> Option<&AggregationTrace> {
        self.traces.iter().find(|t| t.protocol == kind)
    }

    pub fn summary(&self, kind: ProtocolKind) -> Option<&ProtocolSummary> {
        self.summaries.iter().find(|s| s.protocol == kind)
    }
}

pub fn deploy(cfg: &ExperimentConfig) -> Result<ClusterTree, DeployError> {
    let tree = deployment::deploy_network(&cfg.deploy_config())?;
    Ok(if cfg.deployment.round > 0 {
        deployment::elect_heads(&tree, cfg.deployment.round, cfg.seed)
    } else {
        tree
    })
}

/// Runs every configured protocol on one deployment and field.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    let tree = deploy(cfg)?;
    let field = field::sample_field(&cfg.field_config(), &tree.nodes)?;
    let sparsity = sparsity_for(cfg, &field)?;
    let thresholds = Thresholds::new(sparsity, cfg.thresholds.frame_size, tree.node_count())?;
    let options = cfg.run_options();
    let run_seed = seed::derive(cfg.seed, &[cfg.deployment.round]);

    let mut kinds = cfg.protocols.clone();
    kinds.sort();
    kinds.dedup();
    let traces = kinds
        .iter()
        .map(|&k| protocols::run_protocol(k, &tree, &field, &thresholds, &options, run_seed))
        .collect::<Result<Vec<_>, _>>()?;
    for t in &traces {
        for (level, cluster) in t.flagged_clusters() {
            log::warn!(
                "{}: recovery degraded at level {level} cluster {cluster}",
                t.protocol
            );
        }
    }

    let energy = analytics::per_node_energy(&traces, &cfg.energy, cfg.thresholds.frame_mode);
    let summaries = traces
        .iter()
        .map(|t| {
            let snr = cs::snr(&field, &t.recovered).unwrap_or(Snr::Decibels(f64::NEG_INFINITY));
            ProtocolSummary {
                protocol: t.protocol,
                total_units: t.total_units(),
                total_frames: t.total_frames(),
                level_totals: t.level_totals(),
                gammas: protocols::compression_ratios(t),
                energy: energy.protocols[&t.protocol].total,
                snr,
                flagged_clusters: t.flagged_clusters().len(),
            }
        })
        .collect();

    let params = AnalyticParams::for_tree(&tree, sparsity)
        .with_energy(cfg.energy.startup, cfg.energy.per_unit_distance);
    let analytic = analytics::analyze(&params)?;
    let ceiling_slack = analytics::hdacs_ceiling_slack(&tree, &thresholds);
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        tree,
        field,
        thresholds,
        traces,
        summaries,
        energy,
        analytic,
        ceiling_slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Simulated,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Simulated => "simulated",
        }
    }
}

/// One value in a comparison table. `level` is 0 for whole-network values;
/// `seed` is 0 for analytic rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub source: Source,
    pub node_count: usize,
    pub cluster_factor: usize,
    pub levels: u32,
    pub level: u32,
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub name: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTables {
    /// Totals per method at the fixed network size, per cluster factor.
    pub totals_by_factor: SweepTable,
    /// Totals per method against network size.
    pub totals_by_size: SweepTable,
    /// Compression ratio per level.
    pub compression: SweepTable,
    /// Closed-form energy against network size.
    pub energy_analytic: SweepTable,
    /// Simulated energy totals against network size, one row per seed.
    pub energy_simulated: SweepTable,
}

impl SweepTables {
    pub fn all(&self) -> [&SweepTable; 5] {
        [
            &self.totals_by_factor,
            &self.totals_by_size,
            &self.compression,
            &self.energy_analytic,
            &self.energy_simulated,
        ]
    }
}

fn max_levels(node_count: usize, n: usize) -> u32 {
    let mut t = 0;
    let mut full = 1usize;
    while full.saturating_mul(n) <= node_count {
        full *= n;
        t += 1;
    }
    t
}

fn analytic_row(method: &str, p: &AnalyticParams, level: u32, value: f64) -> SweepRow {
    SweepRow {
        method: method.to_string(),
        source: Source::Analytic,
        node_count: p.node_count,
        cluster_factor: p.cluster_factor,
        levels: p.levels,
        level,
        seed: 0,
        value,
    }
}

fn simulated_row(
    method: ProtocolKind,
    out: &ExperimentOutcome,
    level: u32,
    value: f64,
) -> SweepRow {
    SweepRow {
        method: method.name().to_string(),
        source: Source::Simulated,
        node_count: out.tree.node_count(),
        cluster_factor: out.tree.cluster_factor,
        levels: out.tree.level_count(),
        level,
        seed: out.config.seed,
        value,
    }
}

fn measurement_rows(p: &AnalyticParams) -> Vec<SweepRow> {
    let (lo, hi) = analytics::measurement_bounds(p);
    let (ncs, hcs) = analytics::baseline_measurements(p);
    vec![
        analytic_row("hdacs_lower", p, 0, lo),
        analytic_row("hdacs_upper", p, 0, hi),
        analytic_row("ncs", p, 0, ncs),
        analytic_row("hcs", p, 0, hcs),
    ]
}

fn total_rows(out: &ExperimentOutcome) -> Vec<SweepRow> {
    out.summaries
        .iter()
        .map(|s| simulated_row(s.protocol, out, 0, s.total_units as f64))
        .collect()
}

/// Closed-form compression ratio per level on an exact-power tree.
pub fn analytic_gamma(kind: ProtocolKind, p: &AnalyticParams, level: u32) -> f64 {
    let n = p.cluster_factor as f64;
    let k = p.sparsity as f64;
    let global = k * (p.node_count as f64).log2();
    match (kind, level) {
        (ProtocolKind::Ncs, _) => 1.0,
        (ProtocolKind::Hdacs, 1) => (k * n.log2() / n).min(1.0),
        (ProtocolKind::Hdacs, i) => i as f64 / (n * (i - 1) as f64),
        (ProtocolKind::Hcs, 1) => global / n,
        (ProtocolKind::Hcs, _) => 1.0 / n,
    }
}

/// Runs the sweep points in parallel; rows come back in a fixed order
/// regardless of scheduling.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepTables, ExperimentError> {
    cfg.validate()?;
    let s = &cfg.sweep;
    let k = cfg.thresholds.sparsity.unwrap_or(1);
    let params = |nodes: usize, n: usize| AnalyticParams {
        sparsity: k,
        startup: cfg.energy.startup,
        per_unit_distance: cfg.energy.per_unit_distance,
        unit_area: cfg.deployment.unit_area,
        ..AnalyticParams::new(nodes, n, max_levels(nodes, n))
    };

    let mut points: Vec<(usize, usize, u64, Placement)> = Vec::new();
    for &n in &s.fixed_cluster_factors {
        for &seed in &s.seeds {
            points.push((s.fixed_node_count, n, seed, Placement::Stratified));
        }
    }
    for &n in &s.cluster_factors {
        for &nodes in &s.node_counts {
            for &seed in &s.seeds {
                points.push((nodes, n, seed, Placement::Uniform));
            }
        }
    }
    for &nodes in &s.energy_node_counts {
        for &seed in &s.seeds {
            points.push((nodes, s.energy_cluster_factor, seed, Placement::Uniform));
        }
    }
    let outcomes: Vec<ExperimentOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(index, &(nodes, n, seed, placement))| {
            log::debug!("sweep point {index}: N={nodes} n={n} seed={seed}");
            let mut point = cfg.at(nodes, n, seed, placement);
            point.protocols = default_protocols();
            run_experiment(&point)
        })
        .collect::<Result<_, _>>()?;
    let (fixed, rest) = outcomes.split_at(s.fixed_cluster_factors.len() * s.seeds.len());
    let (by_size, energy) =
        rest.split_at(s.cluster_factors.len() * s.node_counts.len() * s.seeds.len());

    let mut totals_by_factor = Vec::new();
    for &n in &s.fixed_cluster_factors {
        totals_by_factor.extend(measurement_rows(&params(s.fixed_node_count, n)));
    }
    fixed
        .iter()
        .for_each(|o| totals_by_factor.extend(total_rows(o)));

    let mut totals_by_size = Vec::new();
    for &n in &s.cluster_factors {
        for &nodes in &s.node_counts {
            totals_by_size.extend(measurement_rows(&params(nodes, n)));
        }
    }
    by_size
        .iter()
        .for_each(|o| totals_by_size.extend(total_rows(o)));

    let mut compression = Vec::new();
    for &n in &s.cluster_factors {
        let p = params(s.fixed_node_count, n);
        for kind in ProtocolKind::ALL {
            for level in 1..=p.levels {
                compression.push(analytic_row(
                    kind.name(),
                    &p,
                    level,
                    analytic_gamma(kind, &p, level),
                ));
            }
        }
    }
    for o in fixed
        .iter()
        .filter(|o| s.cluster_factors.contains(&o.tree.cluster_factor))
    {
        for summary in &o.summaries {
            for (i, &g) in summary.gammas.iter().enumerate() {
                compression.push(simulated_row(summary.protocol, o, i as u32 + 1, g));
            }
        }
    }

    let mut energy_analytic = Vec::new();
    for &nodes in &s.energy_node_counts {
        let p = params(nodes, s.energy_cluster_factor);
        let e = analytics::energy_bounds(&p);
        energy_analytic.extend([
            analytic_row("hdacs_lower", &p, 0, e.lower),
            analytic_row("hdacs_upper", &p, 0, e.upper),
            analytic_row("ncs", &p, 0, e.ncs),
            analytic_row("hcs", &p, 0, e.hcs),
        ]);
    }
    let energy_simulated = energy
        .iter()
        .flat_map(|o| {
            o.summaries
                .iter()
                .map(move |s| simulated_row(s.protocol, o, 0, s.energy))
        })
        .collect();

    Ok(SweepTables {
        totals_by_factor: SweepTable {
            name: "totals_by_factor".into(),
            rows: totals_by_factor,
        },
        totals_by_size: SweepTable {
            name: "totals_by_size".into(),
            rows: totals_by_size,
        },
        compression: SweepTable {
            name: "compression".into(),
            rows: compression,
        },
        energy_analytic: SweepTable {
            name: "energy_analytic".into(),
            rows: energy_analytic,
        },
        energy_simulated: SweepTable {
            name: "energy_simulated".into(),
            rows: energy_simulated,
        },
    })
}
