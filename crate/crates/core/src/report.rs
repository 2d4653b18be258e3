//! Delimited-text outputs. Every table is comma-separated with a one-line
//! header; floats use Rust's shortest round-trip formatting so identical
//! runs produce identical bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::experiment::{ExperimentOutcome, SweepTable};
use crate::field::SignalVector;
use crate::protocols::AggregationTrace;

pub const TRACE_COLUMNS: [&str; 8] = [
    "protocol", "level", "cluster", "sender", "receiver", "units", "frames", "distance",
];
pub const SWEEP_COLUMNS: [&str; 8] = [
    "method",
    "source",
    "node_count",
    "cluster_factor",
    "levels",
    "level",
    "seed",
    "value",
];

fn table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per transmission; the receiver is `sink` for the top uplink.
pub fn trace_table(traces: &[AggregationTrace]) -> String {
    table(
        &TRACE_COLUMNS,
        traces.iter().flat_map(|t| {
            t.transmissions.iter().map(|x| {
                vec![
                    x.protocol.to_string(),
                    x.level.to_string(),
                    x.cluster.to_string(),
                    x.sender.to_string(),
                    x.receiver
                        .map_or_else(|| "sink".to_string(), |r| r.to_string()),
                    x.units.to_string(),
                    x.frames.to_string(),
                    x.distance.to_string(),
                ]
            })
        }),
    )
}

pub fn cluster_table(traces: &[AggregationTrace]) -> String {
    table(
        &[
            "protocol",
            "level",
            "cluster",
            "head",
            "sensors",
            "payload_units",
            "received_units",
            "iterations",
            "converged",
            "degraded",
            "flagged",
        ],
        traces.iter().flat_map(|t| {
            t.clusters.iter().map(move |c| {
                let d = c.decode;
                vec![
                    t.protocol.to_string(),
                    c.level.to_string(),
                    c.cluster.to_string(),
                    c.head.to_string(),
                    c.sensors.to_string(),
                    c.payload_units.to_string(),
                    c.received_units.to_string(),
                    d.map(|d| d.iterations.to_string()).unwrap_or_default(),
                    d.map(|d| d.converged.to_string()).unwrap_or_default(),
                    d.map(|d| d.degraded.to_string()).unwrap_or_default(),
                    c.flagged.to_string(),
                ]
            })
        }),
    )
}

/// Per-node energy and the HDACS ratios; blank cells mean "not defined".
pub fn energy_table(outcome: &ExperimentOutcome) -> String {
    table(
        &["node", "role", "hdacs", "ncs", "hcs", "ratio1", "ratio2"],
        outcome.energy.nodes.iter().map(|n| {
            vec![
                n.node.to_string(),
                n.role.to_string(),
                opt(n.hdacs),
                opt(n.ncs),
                opt(n.hcs),
                opt(n.ratio1),
                opt(n.ratio2),
            ]
        }),
    )
}

pub fn summary_table(outcome: &ExperimentOutcome) -> String {
    table(
        &[
            "protocol",
            "total_units",
            "total_frames",
            "energy",
            "snr_db",
            "flagged_clusters",
        ],
        outcome.summaries.iter().map(|s| {
            vec![
                s.protocol.to_string(),
                s.total_units.to_string(),
                s.total_frames.to_string(),
                s.energy.to_string(),
                s.snr.to_string(),
                s.flagged_clusters.to_string(),
            ]
        }),
    )
}

/// Transmitted units and compression ratio per protocol and level.
pub fn level_table(outcome: &ExperimentOutcome) -> String {
    table(
        &["protocol", "level", "units", "gamma"],
        outcome.summaries.iter().flat_map(|s| {
            s.level_totals
                .iter()
                .zip(&s.gammas)
                .enumerate()
                .map(move |(i, (u, g))| {
                    vec![
                        s.protocol.to_string(),
                        (i + 1).to_string(),
                        u.to_string(),
                        g.to_string(),
                    ]
                })
        }),
    )
}

/// Node id and sampled value.
pub fn field_table(field: &SignalVector) -> String {
    table(
        &["node", "value"],
        field
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), v.to_string()]),
    )
}

/// The closed-form report plus run-specific extras.
pub fn analytic_text(outcome: &ExperimentOutcome) -> String {
    let mut text = outcome.analytic.to_key_value();
    text.push_str(&format!("ceiling_slack\t{}\n", outcome.ceiling_slack));
    text
}

pub fn sweep_table(t: &SweepTable) -> String {
    table(
        &SWEEP_COLUMNS,
        t.rows.iter().map(|r| {
            vec![
                r.method.clone(),
                r.source.name().to_string(),
                r.node_count.to_string(),
                r.cluster_factor.to_string(),
                r.levels.to_string(),
                r.level.to_string(),
                r.seed.to_string(),
                r.value.to_string(),
            ]
        }),
    )
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Writes every run output into `dir` and returns the paths in a fixed
/// order.
pub fn write_run(outcome: &ExperimentOutcome, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("trace.csv", trace_table(&outcome.traces)),
        ("clusters.csv", cluster_table(&outcome.traces)),
        ("energy.csv", energy_table(outcome)),
        ("summary.csv", summary_table(outcome)),
        ("levels.csv", level_table(outcome)),
        ("field.csv", field_table(&outcome.field)),
        ("analytic.txt", analytic_text(outcome)),
        ("tree.txt", outcome.tree.to_canonical_string()),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            write_atomic(&path, body.as_bytes())?;
            Ok(path)
        })
        .collect()
}

pub fn write_sweep(tables: &[&SweepTable], dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    tables
        .iter()
        .map(|t| {
            let path = dir.join(format!("{}.csv", t.name));
            write_atomic(&path, sweep_table(t).as_bytes())?;
            Ok(path)
        })
        .collect()
}
