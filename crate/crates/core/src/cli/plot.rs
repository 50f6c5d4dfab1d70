//! Minimal SVG line plots of run outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::output::{Series, FINAL_SNAPSHOT, SERIES_FILE, SNAPSHOT_DIR};
use super::snapshot::SnapshotFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Panel {
    Linf,
    Entropy,
    Dissipation,
    N0,
    MassBelow,
    /// `f(ε)` of every saved snapshot.
    Occupation,
}

impl Panel {
    pub const ALL: [Panel; 6] = [
        Panel::Linf,
        Panel::Entropy,
        Panel::Dissipation,
        Panel::N0,
        Panel::MassBelow,
        Panel::Occupation,
    ];

    fn file_stem(self) -> &'static str {
        match self {
            Panel::Linf => "linf",
            Panel::Entropy => "entropy",
            Panel::Dissipation => "dissipation",
            Panel::N0 => "n0",
            Panel::MassBelow => "mass_below",
            Panel::Occupation => "occupation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub curves: Vec<Curve>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
            let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }

    fn tick_value(&self, frac: f64) -> f64 {
        let v = self.lo + frac * (self.hi - self.lo);
        if self.log {
            10f64.powf(v)
        } else {
            v
        }
    }
}

fn usable(p: &(f64, f64), log_x: bool, log_y: bool) -> bool {
    p.0.is_finite() && p.1.is_finite() && (!log_x || p.0 > 0.0) && (!log_y || p.1 > 0.0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a figure. Output depends only on the figure.
pub fn render_svg(fig: &Figure) -> String {
    let pts = || {
        fig.curves
            .iter()
            .flat_map(|c| c.points.iter())
            .filter(|p| usable(p, fig.log_x, fig.log_y))
    };
    let xa = Axis::fit(pts().map(|p| p.0), fig.log_x);
    let ya = Axis::fit(pts().map(|p| p.1), fig.log_y);
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (x0 + x1) / 2.0,
        escape(&fig.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let x = x0 + frac * (x1 - x0);
        let y = y0 + frac * (y1 - y0);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{:.3e}</text>"#,
            y0 + 18.0,
            xa.tick_value(frac)
        );
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{:.3e}</text>"#,
            x0 - 8.0,
            y + 4.0,
            ya.tick_value(frac)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(&axis_label(&fig.x_label, fig.log_x))
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&axis_label(&fig.y_label, fig.log_y))
    );

    for (i, c) in fig.curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mapped: Vec<(f64, f64)> = c
            .points
            .iter()
            .filter(|p| usable(p, fig.log_x, fig.log_y))
            .map(|&(x, y)| (xa.map(x, x0, x1), ya.map(y, y0, y1)))
            .collect();
        if mapped.len() == 1 {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                mapped[0].0, mapped[0].1
            );
        } else if !mapped.is_empty() {
            let path: Vec<String> = mapped.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = y1 + 16.0 * i as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x1 + 35.0, ly + 4.0, escape(&c.label));
    }
    s.push_str("</svg>\n");
    s
}

fn axis_label(label: &str, log: bool) -> String {
    if log {
        format!("{label} (log)")
    } else {
        label.to_string()
    }
}

fn time_series(series: &Series, title: &str, columns: &[String], log_y: bool) -> Result<Figure> {
    let t = series.column("t")?;
    let mut curves = Vec::new();
    for col in columns {
        let y = series.column(col)?;
        curves.push(Curve {
            label: col.clone(),
            points: t.iter().copied().zip(y).collect(),
        });
    }
    Ok(Figure {
        title: title.to_string(),
        x_label: "t".into(),
        y_label: title.to_string(),
        log_x: false,
        log_y,
        curves,
    })
}

/// Snapshot files of a run, in time order, final state last.
pub fn snapshot_paths(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = run_dir.join(SNAPSHOT_DIR);
    let mut paths = Vec::new();
    if dir.is_dir() {
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.starts_with("snapshot_") && name.ends_with(".json") {
                paths.push(path);
            }
        }
    }
    paths.sort();
    let last = dir.join(FINAL_SNAPSHOT);
    if last.is_file() {
        paths.push(last);
    }
    Ok(paths)
}

fn occupation_figure(run_dir: &Path, log_log: bool) -> Result<Figure> {
    let paths = snapshot_paths(run_dir)?;
    if paths.is_empty() {
        return Err(Error::Parse(format!("no snapshots under {}", run_dir.join(SNAPSHOT_DIR).display())));
    }
    let mut curves = Vec::new();
    for path in &paths {
        let snap = SnapshotFile::load(path)?;
        let dist = snap.to_distribution()?;
        let f = dist.occupation_values();
        let label = if path.ends_with(FINAL_SNAPSHOT) {
            format!("final t={:.4}", snap.t)
        } else {
            format!("t={:.4}", snap.t)
        };
        curves.push(Curve {
            label,
            points: dist.grid().nodes().iter().copied().zip(f).collect(),
        });
    }
    Ok(Figure {
        title: "occupation f(ε)".into(),
        x_label: "ε".into(),
        y_label: "f".into(),
        log_x: log_log,
        log_y: log_log,
        curves,
    })
}

/// Writes one SVG per panel into `out_dir` and returns the written paths.
pub fn plot_run(run_dir: &Path, panels: &[Panel], log_log: bool, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let series = Series::load(&run_dir.join(SERIES_FILE))?;
    if series.rows.is_empty() {
        return Err(Error::Parse(format!("{} has no data rows", run_dir.join(SERIES_FILE).display())));
    }
    let mut figures = Vec::new();
    for &panel in panels {
        let fig = match panel {
            Panel::Linf => time_series(&series, "linf", &["linf".into()], false)?,
            Panel::Entropy => time_series(&series, "S", &["S".into()], false)?,
            Panel::Dissipation => time_series(&series, "D", &["D".into()], false)?,
            Panel::N0 => time_series(&series, "n0", &["n0".into()], false)?,
            Panel::MassBelow => {
                let cols: Vec<String> = series
                    .header
                    .iter()
                    .filter(|h| h.starts_with("mass_below_R"))
                    .cloned()
                    .collect();
                if cols.is_empty() {
                    return Err(Error::Parse("missing column `mass_below_R*`".into()));
                }
                time_series(&series, "mass_below", &cols, false)?
            }
            Panel::Occupation => occupation_figure(run_dir, log_log)?,
        };
        figures.push((panel, fig));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (panel, fig) in figures {
        let path = out_dir.join(format!("{}.svg", panel.file_stem()));
        std::fs::write(&path, render_svg(&fig)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure(points: Vec<(f64, f64)>, log: bool) -> Figure {
        Figure {
            title: "a<b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: log,
            log_y: log,
            curves: vec![Curve {
                label: "c".into(),
                points,
            }],
        }
    }

    #[test]
    fn render_is_deterministic_and_escaped() {
        let fig = figure(vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)], false);
        let a = render_svg(&fig);
        assert_eq!(a, render_svg(&fig));
        assert!(a.contains("a&lt;b"));
        assert!(a.contains("<polyline"));
        assert!(a.ends_with("</svg>\n"));
    }

    #[test]
    fn single_point_and_log_filtering() {
        let one = render_svg(&figure(vec![(1.0, 1.0)], false));
        assert!(one.contains("<circle"));
        let log = render_svg(&figure(vec![(0.0, 1.0), (1.0, 0.0), (2.0, 3.0)], true));
        assert!(log.contains("<circle"));
        assert!(!log.contains("NaN") && !log.contains("inf"));
    }
}
