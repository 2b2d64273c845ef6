//! Output tree `{raw, processed, figures}`, run manifests and SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{hex, ExperimentConfig};
use crate::error::{Error, Result};

/// Files written by one driver invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub experiment: String,
    pub raw: Vec<PathBuf>,
    pub processed: Vec<PathBuf>,
    pub figures: Vec<PathBuf>,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    kind: &'static str,
    path: String,
    sha256: String,
    config_hash: String,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    package: &'static str,
    version: &'static str,
    config_hash: String,
    seed: u64,
    config: &'a ExperimentConfig,
    files: Vec<ManifestEntry>,
}

pub(crate) struct ArtifactWriter {
    root: PathBuf,
    experiment: String,
    raw: Vec<PathBuf>,
    processed: Vec<PathBuf>,
    figures: Vec<PathBuf>,
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(bytes)))
}

impl ArtifactWriter {
    pub fn new(root: &Path, experiment: &str) -> Result<Self> {
        for sub in ["raw", "processed", "figures"] {
            create_dir(&root.join(sub))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            experiment: experiment.to_string(),
            raw: Vec::new(),
            processed: Vec::new(),
            figures: Vec::new(),
        })
    }

    pub fn raw_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let p = self.root.join("raw").join(format!("{name}.csv"));
        write_rows(&p, rows)?;
        self.raw.push(p.clone());
        Ok(p)
    }

    /// Records a raw file written elsewhere.
    pub fn register_raw(&mut self, path: PathBuf) {
        self.raw.push(path);
    }

    pub fn processed_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let p = self.root.join("processed").join(format!("{name}.csv"));
        write_rows(&p, rows)?;
        self.processed.push(p.clone());
        Ok(p)
    }

    /// Writes `name.svg` and the plotted series as `name.csv`.
    pub fn figure(&mut self, name: &str, plot: &LinePlot) -> Result<PathBuf> {
        let dir = self.root.join("figures");
        let svg = dir.join(format!("{name}.svg"));
        fs::write(&svg, plot.render()).map_err(|e| Error::io(&svg, e))?;
        let csv = dir.join(format!("{name}.csv"));
        write_rows(&csv, &plot.rows())?;
        self.figures.push(svg.clone());
        self.figures.push(csv);
        Ok(svg)
    }

    pub fn finish(self, config: &ExperimentConfig) -> Result<RunArtifacts> {
        let config_hash = config.hash();
        let mut files = Vec::new();
        for (kind, list) in [
            ("raw", &self.raw),
            ("processed", &self.processed),
            ("figure", &self.figures),
        ] {
            for p in list {
                files.push(ManifestEntry {
                    kind,
                    path: p.strip_prefix(&self.root).unwrap_or(p).display().to_string(),
                    sha256: file_hash(p)?,
                    config_hash: config_hash.clone(),
                    seed: config.seed,
                });
            }
        }
        let manifest = Manifest {
            experiment: &self.experiment,
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_hash,
            seed: config.seed,
            config,
            files,
        };
        let path = self.root.join(format!("manifest_{}.json", self.experiment));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(RunArtifacts {
            experiment: self.experiment,
            raw: self.raw,
            processed: self.processed,
            figures: self.figures,
            manifest: path,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
struct PlotRow<'a> {
    series: &'a str,
    x: f64,
    y: f64,
}

/// Minimal SVG line chart.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    fn rows(&self) -> Vec<PlotRow<'_>> {
        self.series
            .iter()
            .flat_map(|s| s.points.iter().map(move |&(x, y)| PlotRow { series: &s.name, x, y }))
            .collect()
    }

    fn map(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let tx = if self.log_x { x.log10() } else { x };
        let ty = if self.log_y { y.log10() } else { y };
        (tx.is_finite() && ty.is_finite()).then_some((tx, ty))
    }

    pub fn render(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().filter_map(|&(x, y)| self.map(x, y)))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
        );
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 <= 0.0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        let (y0, y1) = (y0 - pad, y1 + pad);
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (tx, ty) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let lx = if self.log_x { 10f64.powf(tx) } else { tx };
            let ly = if self.log_y { 10f64.powf(ty) } else { ty };
            let _ = writeln!(
                out,
                r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##,
                sx(tx),
                TOP,
                TOP + ph,
                TOP + ph + 16.0,
                tick(lx)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="#ddd"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                sy(ty),
                LEFT,
                LEFT + pw,
                LEFT - 6.0,
                sy(ty) + 4.0,
                tick(ly)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = s
                .points
                .iter()
                .filter_map(|&(x, y)| self.map(x, y))
                .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                path.join(" ")
            );
            if !s.dashed {
                for p in &path {
                    let (cx, cy) = p.split_once(',').expect("formatted pair");
                    let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
                }
            }
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 22.0,
                lx + 28.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_each_series() {
        let plot = LinePlot::new("t", "M", "E<x>")
            .log_log()
            .with(Series::new("oracle", vec![(1000.0, 0.3), (8000.0, 0.15)]))
            .with(Series::new("theory", vec![(1000.0, 0.3), (8000.0, 0.13)]).dashed());
        let svg = plot.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("E&lt;x&gt;"));
        assert_eq!(plot.rows().len(), 4);
    }

    #[test]
    fn degenerate_plots_render() {
        let svg = LinePlot::new("", "", "")
            .with(Series::new("one", vec![(1.0, 1.0)]))
            .render();
        assert!(!svg.contains("NaN"));
        let empty = LinePlot::new("", "", "").log_log().render();
        assert!(!empty.contains("NaN"));
    }

    #[test]
    fn manifest_lists_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::for_testbeds(&[crate::models::Testbed::GG1]);
        let mut w = ArtifactWriter::new(dir.path(), "demo").unwrap();
        #[derive(Serialize)]
        struct Row {
            a: f64,
            b: Option<f64>,
        }
        w.raw_csv("r", &[Row { a: 0.1, b: None }]).unwrap();
        w.figure("f", &LinePlot::new("", "", "").with(Series::new("s", vec![(0.0, 1.0)])))
            .unwrap();
        let art = w.finish(&cfg).unwrap();
        let text = fs::read_to_string(&art.manifest).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let files = v["files"].as_array().unwrap();
        assert_eq!(files.len(), 3);
        assert!(files
            .iter()
            .all(|f| f["config_hash"] == cfg.hash().as_str() && f["seed"] == cfg.seed));
        assert_eq!(fs::read_to_string(&art.raw[0]).unwrap(), "a,b\n0.1,\n");
    }
}
