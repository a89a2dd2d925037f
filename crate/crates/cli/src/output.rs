use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::spec::{Format, RunSpec};

pub const CSV_HEADER: &str = "a,z,p,gamma,method,value,stderr,seed";

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub a: Option<usize>,
    pub z: Option<usize>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub method: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: Option<u64>,
}

impl Record {
    pub fn point(a: usize, z: usize, p: f64, gamma: f64, method: &str, value: f64) -> Self {
        Self {
            a: Some(a),
            z: Some(z),
            p: Some(p),
            gamma: Some(gamma),
            method: method.to_string(),
            value,
            stderr: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub tolerance: f64,
    pub observed: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, observed: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), tolerance, observed, pass: observed <= tolerance }
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub records: Vec<Record>,
    pub checks: Vec<Check>,
    /// Command-specific fields added to the JSON object.
    pub extra: Option<(String, serde_json::Value)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Plain decimal with ten significant digits.
pub fn sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).clamp(0, 400) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit
    let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
    if digits > 10 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_csv(report: &Report) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.records {
        let row = [
            opt(r.a),
            opt(r.z),
            r.p.map(sig10).unwrap_or_default(),
            r.gamma.map(sig10).unwrap_or_default(),
            r.method.clone(),
            sig10(r.value),
            r.stderr.map(sig10).unwrap_or_default(),
            opt(r.seed),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn render_json(spec: &RunSpec, report: &Report) -> Result<String> {
    let mut doc = serde_json::json!({
        "spec": spec,
        "results": report.records,
        "checks": report.checks,
    });
    if let Some((key, value)) = &report.extra {
        doc[key] = value.clone();
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

pub fn render(spec: &RunSpec, report: &Report) -> Result<String> {
    match spec.format {
        Format::Csv => Ok(render_csv(report)),
        Format::Json => render_json(spec, report),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("moving output into {}", path.display()))?;
    Ok(())
}
