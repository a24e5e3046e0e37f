//! CSV and JSON-lines output.
//!
//! Every CSV starts with a `# pmelab <kind> v<version> key=value ...` comment
//! line. Floats are printed in shortest round-trip exponent form, so the same
//! run always yields the same bytes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{Boundary, BoxGrid, Geometry, GridField, RadialGrid};
use crate::harness::dichotomy::{DichotomyResult, Sensitivity};
use crate::harness::experiments::TraceCheck;
use crate::harness::validate::Check;
use crate::necessary::EnvelopeConstant;
use crate::norms::NormValue;
use crate::params::ProblemParams;
use crate::solver::SolveReport;

pub const CSV_VERSION: u32 = 1;

/// Shortest round-trip rendering in exponent form (`1.5e-3`, `0e0`, `inf`).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn header_line(kind: &str, meta: &[(&str, String)]) -> String {
    let mut s = format!("# pmelab {kind} v{CSV_VERSION}");
    for (k, v) in meta {
        s.push(' ');
        s.push_str(k);
        s.push('=');
        s.push_str(v);
    }
    s.push('\n');
    s
}

/// Comment header plus a table written through the `csv` crate.
pub struct CsvTable {
    head: String,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new(kind: &str, meta: &[(&str, String)], columns: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(columns).map_err(io_err)?;
        Ok(Self { head: header_line(kind, meta), writer })
    }

    pub fn row<I, S>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells).map_err(io_err)
    }

    pub fn finish(self) -> Result<String> {
        let body = self.writer.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
        let body = String::from_utf8(body).map_err(|e| LabError::Io(e.to_string()))?;
        Ok(self.head + &body)
    }
}

fn io_err(e: csv::Error) -> LabError {
    LabError::Io(e.to_string())
}

/// One JSON object per line.
pub fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| LabError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn geometry_meta(g: &Geometry) -> Vec<(&'static str, String)> {
    match g {
        Geometry::Box(b) => vec![
            ("geometry", "box".into()),
            ("dim", b.dim.to_string()),
            ("nx", b.cells[0].to_string()),
            ("ny", b.cells[1].to_string()),
            ("lower", format!("{};{}", fmt_f64(b.lower[0]), fmt_f64(b.lower[1]))),
            ("h", fmt_f64(b.h)),
            ("boundary", b.boundary.to_string()),
        ],
        Geometry::Radial(r) => vec![
            ("geometry", "radial".into()),
            ("dim", r.dim.to_string()),
            ("cells", r.cells.to_string()),
            ("h", fmt_f64(r.h)),
        ],
    }
}

/// Cell centres and values; the header records the grid exactly.
pub fn field_csv(f: &GridField) -> Result<String> {
    let g = f.geometry();
    let meta = geometry_meta(g);
    let cols: &[&str] = match g {
        Geometry::Box(b) if b.dim == 2 => &["x", "y", "u"],
        Geometry::Box(_) => &["x", "u"],
        Geometry::Radial(_) => &["r", "u"],
    };
    let mut t = CsvTable::new("field", &meta, cols)?;
    for (k, &v) in f.values().iter().enumerate() {
        let p = g.point(k);
        match cols.len() {
            3 => t.row([fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(v)])?,
            _ => t.row([fmt_f64(p[0]), fmt_f64(v)])?,
        }
    }
    t.finish()
}

fn parse_meta(line: &str) -> BTreeMap<String, String> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|tok| tok.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn meta_num<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| LabError::Config { line: 1, message: format!("field header lacks a valid '{key}'") })
}

/// Read a field written by [`field_csv`], or a bare `x[,y],u` table on a uniform
/// box grid (the spacing is inferred and `boundary` applies).
pub fn read_field_csv(text: &str, boundary: Boundary) -> Result<GridField> {
    let first = text.lines().next().unwrap_or("");
    let meta = if first.starts_with("# pmelab field") { parse_meta(first) } else { BTreeMap::new() };
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(io_err)?.clone();
    let ncol = headers.len();
    if !(2..=3).contains(&ncol) {
        return Err(LabError::Config { line: 1, message: format!("expected 2 or 3 columns, found {ncol}") });
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let row = rec
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| LabError::Config { line, message: format!("'{c}' is not a number") }))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != ncol {
            return Err(LabError::Config { line, message: "ragged row".into() });
        }
        rows.push(row);
    }
    let values: Vec<f64> = rows.iter().map(|r| r[ncol - 1]).collect();
    let geometry = if let Some(kind) = meta.get("geometry") {
        let dim: usize = meta_num(&meta, "dim")?;
        let h: f64 = meta_num(&meta, "h")?;
        match kind.as_str() {
            "radial" => Geometry::Radial(RadialGrid::new(dim, meta_num::<usize>(&meta, "cells")? as f64 * h, h)?),
            "box" => {
                let lower: Vec<f64> = meta
                    .get("lower")
                    .map(|s| s.split(';').filter_map(|v| v.parse().ok()).collect())
                    .unwrap_or_default();
                if lower.len() != 2 {
                    return Err(LabError::Config { line: 1, message: "field header has a malformed 'lower'".into() });
                }
                let b = match meta.get("boundary") {
                    Some(s) => s.parse()?,
                    None => boundary,
                };
                Geometry::Box(BoxGrid::new(dim, [meta_num(&meta, "nx")?, meta_num(&meta, "ny")?], [lower[0], lower[1]], h, b)?)
            }
            other => return Err(LabError::Config { line: 1, message: format!("unknown geometry '{other}'") }),
        }
    } else {
        infer_box(&rows, ncol - 1, boundary)?
    };
    if geometry.len() != values.len() {
        return Err(LabError::Config {
            line: 1,
            message: format!("grid has {} cells but the table has {} rows", geometry.len(), values.len()),
        });
    }
    GridField::new(geometry, values)
}

fn infer_box(rows: &[Vec<f64>], dim: usize, boundary: Boundary) -> Result<Geometry> {
    let axis = |a: usize| -> Result<(f64, usize, f64)> {
        let mut xs: Vec<f64> = rows.iter().map(|r| r[a]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|p, q| (*p - *q).abs() <= 1e-9 * q.abs().max(1.0));
        if xs.len() < 2 {
            return Ok((xs.first().copied().unwrap_or(0.0), xs.len(), f64::NAN));
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        if xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
            return Err(LabError::Config { line: 2, message: "coordinates are not uniformly spaced".into() });
        }
        Ok((xs[0], xs.len(), h))
    };
    let (x0, nx, hx) = axis(0)?;
    let (y0, ny, hy) = if dim == 2 { axis(1)? } else { (0.0, 1, hx) };
    let h = if hx.is_nan() { hy } else { hx };
    if !(h > 0.0) || (dim == 2 && ny > 1 && (hx - hy).abs() > 1e-6 * h) {
        return Err(LabError::Config { line: 2, message: "cannot infer a uniform square grid".into() });
    }
    let g = BoxGrid::new(dim, [nx, ny], [x0 - h / 2.0, y0 - h / 2.0], h, boundary)?;
    // rows must be in storage order
    for (k, r) in rows.iter().enumerate() {
        let c = g.center(k);
        if (0..dim).any(|a| (c[a] - r[a]).abs() > 1e-6 * h) {
            return Err(LabError::Config { line: k + 2, message: "rows are not in x-fastest grid order".into() });
        }
    }
    Ok(Geometry::Box(g))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), fmt_f64)
}

fn params_meta(p: &ProblemParams) -> Vec<(&'static str, String)> {
    vec![("N", p.dim().to_string()), ("m", fmt_f64(p.m())), ("p", fmt_f64(p.p()))]
}

/// Time series of one run: `t, step, linf, mass` and one column per monitor.
pub fn series_csv(report: &SolveReport) -> Result<String> {
    let mut meta = params_meta(&report.params);
    meta.push(("status", report.status.label().to_string()));
    meta.push(("t_end", fmt_f64(report.status.time())));
    meta.push(("steps", report.stats.steps.to_string()));
    meta.push(("source", report.source.to_string()));
    let mut cols: Vec<&str> = vec!["t", "step", "linf", "mass"];
    cols.extend(report.monitor_labels.iter().map(String::as_str));
    let mut t = CsvTable::new("series", &meta, &cols)?;
    for s in &report.series {
        let mut row = vec![fmt_f64(s.t), s.step.to_string(), fmt_f64(s.linf), fmt_f64(s.mass)];
        row.extend(s.norms.iter().map(|v| fmt_f64(*v)));
        t.row(row)?;
    }
    t.finish()
}

/// One row per trial, sorted by `c`; the bracket and optional sensitivity go in comments.
pub fn dichotomy_csv(result: &DichotomyResult, sensitivity: Option<&Sensitivity>) -> Result<String> {
    let mut meta = params_meta(&result.params);
    meta.extend([
        ("family", result.family.to_string()),
        ("horizon", fmt_f64(result.meta.horizon)),
        ("h", fmt_f64(result.meta.geometry.h())),
        ("cells", result.meta.geometry.len().to_string()),
        ("steps", result.meta.steps.to_string()),
        ("i_factor", fmt_f64(result.meta.i_factor)),
        ("j", result.meta.j.to_string()),
    ]);
    let mut t = CsvTable::new("dichotomy", &meta, &["c", "outcome", "status", "t_end", "steps", "i", "envelope_margin"])?;
    for tr in &result.trials {
        t.row([
            fmt_f64(tr.c),
            (if tr.blow_up() { "blowup" } else { "exist" }).to_string(),
            tr.status.label().to_string(),
            fmt_f64(tr.status.time()),
            tr.steps.to_string(),
            fmt_f64(tr.i),
            opt(tr.envelope.map(|e| e.margin)),
        ])?;
    }
    let mut out = t.finish()?;
    let mut comment = |k: &str, v: String| out.push_str(&format!("# {k}={v}\n"));
    comment("c_exist", fmt_f64(result.c_exist));
    comment("c_blow", fmt_f64(result.c_blow));
    comment("ratio", fmt_f64(result.ratio()));
    comment("seeds", format!("{};{}", fmt_f64(result.meta.c_lo), fmt_f64(result.meta.c_hi)));
    comment("widened", result.meta.widened.to_string());
    if let Some(env) = &result.envelope {
        comment("envelope_constant", fmt_f64(env.constant));
    }
    if let Some((label, lo, hi)) = &result.bracket_norms {
        comment("bracket_norm", format!("{label};{};{}", fmt_f64(lo.value), fmt_f64(hi.value)));
    }
    if let Some(s) = sensitivity {
        comment("mid", fmt_f64(s.base_mid));
        comment("mid_h_half", fmt_f64(s.refined.midpoint()));
        comment("mid_ij_double", fmt_f64(s.regularized.midpoint()));
        comment("shift_h", fmt_f64(s.shift_h));
        comment("shift_ij", fmt_f64(s.shift_ij));
    }
    Ok(out)
}

/// Sup-ball masses at `τ₀` against the envelope `C·shape(σ)`.
pub fn trace_csv(check: &TraceCheck) -> Result<String> {
    let est = &check.estimate;
    let mut meta = params_meta(&est.params);
    meta.extend([("tau0", fmt_f64(est.tau0)), ("step", est.step.to_string()), ("status", check.status.label().to_string())]);
    let mut t = CsvTable::new("trace", &meta, &["sigma", "mass", "envelope", "ratio"])?;
    for (&s, &m) in est.sigmas.iter().zip(&est.masses) {
        let env = match &check.envelope {
            Some(e) if s <= e.radius_limit() * (1.0 + 1e-12) => Some(e.constant * e.shape(s)?),
            _ => None,
        };
        let ratio = env.map(|e| if m == 0.0 { 0.0 } else { m / e });
        t.row([fmt_f64(s), fmt_f64(m), opt(env), opt(ratio)])?;
    }
    let mut out = t.finish()?;
    out.push_str(&format!("# slope={}\n", opt(est.slope)));
    out.push_str(&format!("# expected_slope={}\n", fmt_f64(est.params.trace_exponent())));
    let slopes: Vec<String> = check.slopes.iter().map(|s| opt(*s)).collect();
    out.push_str(&format!("# slopes_tau0_2tau0_4tau0={}\n", slopes.join(";")));
    if let Some(c) = &check.check {
        out.push_str(&format!("# envelope_pass={} margin={}\n", c.pass, fmt_f64(c.margin)));
    }
    Ok(out)
}

pub fn constants_csv(params: &ProblemParams, horizon: f64, c: &EnvelopeConstant) -> Result<String> {
    let mut t = CsvTable::new("constants", &[], &["N", "m", "p", "T", "C", "a", "b", "ell", "L", "quad_error"])?;
    t.row([
        params.dim().to_string(),
        fmt_f64(params.m()),
        fmt_f64(params.p()),
        fmt_f64(horizon),
        fmt_f64(c.constant),
        fmt_f64(c.a),
        fmt_f64(c.b),
        opt(c.ell),
        opt(c.big_l),
        fmt_f64(c.quad_error),
    ])?;
    t.finish()
}

pub fn norm_csv(label: &str, value: &NormValue) -> Result<String> {
    let mut t = CsvTable::new("norm", &[("kind", label.replace(' ', ""))], &["value", "center_x", "center_y", "sigma", "clipped"])?;
    t.row([
        fmt_f64(value.value),
        fmt_f64(value.center[0]),
        fmt_f64(value.center[1]),
        fmt_f64(value.sigma),
        value.clipped.to_string(),
    ])?;
    t.finish()
}

pub fn validation_csv(checks: &[Check]) -> Result<String> {
    let mut t = CsvTable::new("validate", &[], &["check", "measured", "relation", "limit", "pass"])?;
    for c in checks {
        t.row([
            c.name.clone(),
            fmt_f64(c.measured),
            (if c.at_least { ">=" } else { "<=" }).to_string(),
            fmt_f64(c.limit),
            c.pass.to_string(),
        ])?;
    }
    t.finish()
}

/// Records of the JSON-lines event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent<'a> {
    Start { command: &'a str, params: ProblemParams },
    Snapshot { t: f64, step: usize, linf: f64, mass: f64 },
    Trial { c: f64, outcome: &'a str, status: &'a str, t_end: f64, steps: usize },
    Finish { status: &'a str, t_end: f64, steps: usize },
    Bracket { c_exist: f64, c_blow: f64 },
}

/// Start, one line per snapshot, finish.
pub fn report_events(command: &str, report: &SolveReport) -> Result<String> {
    let mut out = json_line(&LogEvent::Start { command, params: report.params })?;
    for s in &report.series {
        out += &json_line(&LogEvent::Snapshot { t: s.t, step: s.step, linf: s.linf, mass: s.mass })?;
    }
    out += &json_line(&LogEvent::Finish { status: report.status.label(), t_end: report.status.time(), steps: report.stats.steps })?;
    Ok(out)
}

pub fn dichotomy_events(result: &DichotomyResult) -> Result<String> {
    let mut out = json_line(&LogEvent::Start { command: "dichotomy", params: result.params })?;
    for t in &result.trials {
        out += &json_line(&LogEvent::Trial {
            c: t.c,
            outcome: if t.blow_up() { "blowup" } else { "exist" },
            status: t.status.label(),
            t_end: t.status.time(),
            steps: t.steps,
        })?;
    }
    out += &json_line(&LogEvent::Bracket { c_exist: result.c_exist, c_blow: result.c_blow })?;
    Ok(out)
}
