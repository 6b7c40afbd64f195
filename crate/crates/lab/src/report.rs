//! Scenario outputs: CSV tables, SVG line plots and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    /// Both sides vanish (`0/0`).
    #[serde(rename = "PASS-degenerate")]
    Degenerate,
    /// A precondition is not met; results are reported anyway.
    #[serde(rename = "FLAG")]
    Flag,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Degenerate => "PASS-degenerate",
            Verdict::Flag => "FLAG",
            Verdict::Fail => "FAIL",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::Degenerate)
    }

    /// Overall verdict of a list: any failure fails, then any flag flags,
    /// and an all-degenerate list is degenerate.
    pub fn combine(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        let vs: Vec<Verdict> = vs.into_iter().collect();
        if vs.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if vs.contains(&Verdict::Flag) {
            Verdict::Flag
        } else if !vs.is_empty() && vs.iter().all(|v| *v == Verdict::Degenerate) {
            Verdict::Degenerate
        } else {
            Verdict::Pass
        }
    }
}

/// `value ≤ bound` style assertion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, verdict: Verdict, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            verdict,
            value,
            bound,
            detail: String::new(),
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, Verdict::from_bool(value <= bound), value, bound)
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

/// Formats a float with the shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// File stem suffix: the file is `<scenario>_<name>.csv`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Table of checks, one per row.
    pub fn of_checks(name: &str, checks: &[Check]) -> Self {
        let mut t = Self::new(name, &["check", "value", "bound", "verdict", "detail"]);
        for c in checks {
            t.push(vec![
                c.name.clone(),
                num(c.value),
                num(c.bound),
                c.verdict.as_str().into(),
                c.detail.clone(),
            ]);
        }
        t
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, LabError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| LabError::Csv(e.into_error().into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Plot {
    /// A plain line plot; non-finite points and non-positive values on log
    /// axes are dropped.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 60.0);
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let keep = |&(x, y): &(f64, f64)| {
            x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0)
        };
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied().filter(keep))
            .map(|(x, y)| (tx(x), ty(y)))
            .collect();
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
        let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
        let sx = |v: f64| pad + (v - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |v: f64| h - pad - (v - y0) / (y1 - y0) * (h - 2.0 * pad);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * pad,
            h - 2.0 * pad
        );
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle">{}</text>"#, w / 2.0, esc(&self.title));
        let axis = |log: bool, label: &str| if log { format!("log10 {label}") } else { label.to_string() };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            w / 2.0,
            h - 16.0,
            esc(&axis(self.log_x, &self.x_label))
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            esc(&axis(self.log_y, &self.y_label))
        );
        for (v, anchor, x, y) in [
            (x0, "start", pad, h - pad + 16.0),
            (x1, "end", w - pad, h - pad + 16.0),
        ] {
            let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#);
        }
        for (v, y) in [(y0, h - pad), (y1, pad + 10.0)] {
            let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{v:.3}</text>"#, pad - 4.0);
        }
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .copied()
                .filter(keep)
                .map(|(x, y)| format!("{:.2},{:.2}", sx(tx(x)), sy(ty(y))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                w - pad - 150.0,
                pad + 16.0 * (i as f64 + 1.0),
                esc(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Everything one scenario produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub kind: String,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    /// Headline numbers, also recorded in the manifest.
    pub metrics: BTreeMap<String, f64>,
}

impl ScenarioReport {
    pub fn new(name: &str, kind: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: kind.to_string(),
            checks: Vec::new(),
            tables: Vec::new(),
            plots: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn verdict(&self) -> Verdict {
        Verdict::combine(self.checks.iter().map(|c| c.verdict))
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioEntry {
    pub name: String,
    pub kind: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub outputs: Vec<OutputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub verdict: Verdict,
    pub scenarios: Vec<ScenarioEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn write(dir: &Path, file: &str, bytes: &[u8]) -> Result<OutputFile, LabError> {
    let path: PathBuf = dir.join(file);
    std::fs::write(&path, bytes).map_err(|e| LabError::Io { path, source: e })?;
    Ok(OutputFile {
        file: file.to_string(),
        sha256: sha256_hex(bytes),
    })
}

/// Writes every table (and plot, when enabled) of every scenario plus
/// `manifest.json` into `dir`, returning the manifest.
pub fn emit_report(
    dir: &Path,
    config_sha256: &str,
    seed: u64,
    reports: &[(ScenarioReport, Option<f64>)],
    plots: bool,
) -> Result<RunManifest, LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut entries = Vec::new();
    for (r, secs) in reports {
        let mut outputs = Vec::new();
        for t in &r.tables {
            outputs.push(write(dir, &format!("{}_{}.csv", r.name, t.name), &t.to_csv()?)?);
        }
        if plots {
            for p in &r.plots {
                outputs.push(write(dir, &format!("{}_{}.svg", r.name, p.name), p.to_svg().as_bytes())?);
            }
        }
        entries.push(ScenarioEntry {
            name: r.name.clone(),
            kind: r.kind.clone(),
            verdict: r.verdict(),
            checks: r.checks.clone(),
            metrics: r.metrics.clone(),
            outputs,
            wall_clock_s: *secs,
        });
    }
    let versions = BTreeMap::from([
        ("halfspace".to_string(), halfspace::VERSION.to_string()),
        ("halfspace-lab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ]);
    let manifest = RunManifest {
        config_sha256: config_sha256.to_string(),
        seed,
        versions,
        verdict: Verdict::combine(entries.iter().map(|e| e.verdict)),
        scenarios: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(dir, "manifest.json", json.as_bytes())?;
    Ok(manifest)
}
