//! Static SVG line plots of sweep tables. Reads only the table, never
//! recomputes anything.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use hdacs_core::report::SWEEP_COLUMNS;

#[derive(Debug, Clone, PartialEq)]
pub enum PlotError {
    Read {
        table: String,
        message: String,
    },
    MissingColumn {
        table: String,
        column: String,
    },
    BadValue {
        table: String,
        line: usize,
        column: String,
    },
    Empty {
        table: String,
    },
}

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlotError::Read { table, message } => write!(f, "cannot read table {table}: {message}"),
            PlotError::MissingColumn { table, column } => {
                write!(f, "table {table} is missing column `{column}`")
            }
            PlotError::BadValue {
                table,
                line,
                column,
            } => {
                write!(
                    f,
                    "table {table} line {line}: column `{column}` is not a number"
                )
            }
            PlotError::Empty { table } => write!(f, "table {table} has no rows; nothing to plot"),
        }
    }
}

impl std::error::Error for PlotError {}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    series: String,
    node_count: f64,
    cluster_factor: f64,
    level: f64,
    value: f64,
}

/// Series name to `(x, mean y)` points, sorted by x.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: &'static str,
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
}

fn parse_rows(name: &str, text: &str) -> Result<Vec<Row>, PlotError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| PlotError::Read {
            table: name.to_string(),
            message: e.to_string(),
        })?
        .clone();
    let index = |column: &str| {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| PlotError::MissingColumn {
                table: name.to_string(),
                column: column.to_string(),
            })
    };
    let cols: Vec<usize> = SWEEP_COLUMNS
        .iter()
        .map(|c| index(c))
        .collect::<Result<_, _>>()?;
    let [method, source, node_count, cluster_factor, _, level, _, value] = cols[..] else {
        unreachable!("column list has eight entries")
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PlotError::Read {
            table: name.to_string(),
            message: e.to_string(),
        })?;
        let line = i + 2;
        let num = |col: usize| {
            record
                .get(col)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| PlotError::BadValue {
                    table: name.to_string(),
                    line,
                    column: headers[col].to_string(),
                })
        };
        let factor = num(cluster_factor)?;
        rows.push(Row {
            series: format!("{} {} n={}", &record[method], &record[source], factor),
            node_count: num(node_count)?,
            cluster_factor: factor,
            level: num(level)?,
            value: num(value)?,
        });
    }
    Ok(rows)
}

/// Picks the varying column as the x axis: level, then network size, then
/// cluster factor.
pub fn figure_from_table(name: &str, text: &str) -> Result<Figure, PlotError> {
    let rows = parse_rows(name, text)?;
    if rows.is_empty() {
        return Err(PlotError::Empty {
            table: name.to_string(),
        });
    }
    let varies = |f: fn(&Row) -> f64| rows.iter().any(|r| f(r) != f(&rows[0]));
    let (x_label, x_of): (&'static str, fn(&Row) -> f64) = if varies(|r| r.level) {
        ("level", |r| r.level)
    } else if varies(|r| r.node_count) {
        ("network size N", |r| r.node_count)
    } else {
        ("cluster factor n", |r| r.cluster_factor)
    };
    let mut sums: BTreeMap<String, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in &rows {
        // with the cluster factor on the x axis the series must not split on it
        let series = if x_label == "cluster factor n" {
            r.series
                .rsplit_once(" n=")
                .map_or(r.series.clone(), |(s, _)| s.to_string())
        } else {
            r.series.clone()
        };
        let slot = sums
            .entry(series)
            .or_default()
            .entry(x_of(r).to_bits())
            .or_insert((0.0, 0));
        slot.0 += r.value;
        slot.1 += 1;
    }
    let series = sums
        .into_iter()
        .map(|(name, points)| {
            let mut pts: Vec<(f64, f64)> = points
                .into_iter()
                .map(|(x, (sum, count))| (f64::from_bits(x), sum / count as f64))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (name, pts)
        })
        .collect();
    Ok(Figure {
        title: name.to_string(),
        x_label,
        series,
    })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

pub fn render_svg(fig: &Figure) -> String {
    let points = || fig.series.values().flatten();
    let (x0, x1) = range(points().map(|p| p.0));
    let (y_lo, y1) = range(points().map(|p| p.1));
    let y0 = y_lo.min(0.0);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&fig.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + plot_h + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        fig.x_label
    );
    for (i, (name, pts)) in fig.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = TOP + 12.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#,
            lx + 24.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders `table` to `<out_dir>/<stem>.svg`.
pub fn plot_file(
    table: &Path,
    out_dir: &Path,
) -> Result<std::path::PathBuf, Box<dyn std::error::Error>> {
    let name = table.display().to_string();
    let text = std::fs::read_to_string(table).map_err(|e| PlotError::Read {
        table: name.clone(),
        message: e.to_string(),
    })?;
    let stem = table
        .file_stem()
        .map_or_else(|| "plot".to_string(), |s| s.to_string_lossy().into_owned());
    let mut fig = figure_from_table(&name, &text)?;
    fig.title = stem.clone();
    let out = out_dir.join(format!("{stem}.svg"));
    std::fs::create_dir_all(out_dir)?;
    hdacs_core::report::write_atomic(&out, render_svg(&fig).as_bytes())?;
    Ok(out)
}
