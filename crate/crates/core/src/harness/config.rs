//! INI-style experiment configuration.
//!
//! ```text
//! [problem]
//! N = 1
//! m = 2
//! p = 5
//!
//! [grid]
//! half_width = 4
//! h = 0.01
//!
//! [initial]
//! kind = mu_c
//! c = 0.1
//!
//! [run]
//! horizon = 10
//! ```
//!
//! Optional sections: `[monitors]`, `[dichotomy]`, `[trace]`. Every key is
//! checked against a fixed list; errors carry the line number.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{LabError, Result};
use crate::field::{Boundary, BoxGrid, Geometry, RadialGrid};
use crate::harness::dichotomy::DichotomySettings;
use crate::harness::io::read_field_csv;
use crate::norms::{NormSpec, DEFAULT_LADDER_RATIO};
use crate::params::ProblemParams;
use crate::solver::{InitialSpec, SolverConfig};

const SECTIONS: &[(&str, &[&str])] = &[
    ("problem", &["N", "m", "p", "source"]),
    ("grid", &["geometry", "h", "half_width", "r_max", "boundary"]),
    ("initial", &["kind", "c", "amplitude", "width", "value", "mass", "t0", "path", "i", "j"]),
    (
        "run",
        &[
            "horizon",
            "start_time",
            "safety",
            "reaction_safety",
            "u_max",
            "dt_min",
            "snapshots",
            "snapshot_spacing",
            "first_snapshot",
            "early_steps",
        ],
    ),
    ("monitors", &["linf", "sup_ball_mass", "morrey", "orlicz_eta", "ladder_ratio"]),
    (
        "dichotomy",
        &["c_lo", "c_hi", "steps", "i_factor", "j", "widen_factor", "max_widen", "validation", "envelope_check"],
    ),
    ("trace", &["tau0", "sigma_min", "sigma_max", "ratio"]),
];

/// Radii and time for `trace-check`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSettings {
    pub tau0: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub ratio: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self { tau0: None, sigma_min: None, sigma_max: None, ratio: std::f64::consts::SQRT_2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub solver: SolverConfig,
    /// `kind = file` data still to be loaded by [`ExperimentConfig::load_files`].
    pub initial_path: Option<(String, usize)>,
    pub dichotomy: Option<DichotomySettings>,
    pub trace: Option<TraceSettings>,
}

impl ExperimentConfig {
    /// Read `kind = file` initial data, resolving relative paths against `base`.
    pub fn load_files(&mut self, base: &Path) -> Result<()> {
        if let Some((path, line)) = self.initial_path.take() {
            let full = base.join(&path);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| LabError::Config { line, message: format!("cannot read '{}': {e}", full.display()) })?;
            let f = read_field_csv(&text, self.solver.geometry.boundary())?;
            self.solver.geometry = *f.geometry();
            self.solver.initial = InitialSpec::Custom(f);
        }
        Ok(())
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Doc {
    entries: BTreeMap<(String, String), Entry>,
    sections: BTreeMap<String, usize>,
}

fn cfg_err(line: usize, message: impl Into<String>) -> LabError {
    LabError::Config { line, message: message.into() }
}

fn tokenize(text: &str) -> Result<Doc> {
    let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
    let mut sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line, format!("malformed section header '{s}'")))?
                .trim();
            if !SECTIONS.iter().any(|(n, _)| *n == name) {
                return Err(cfg_err(line, format!("unknown section [{name}]")));
            }
            if let Some(prev) = sections.insert(name.to_string(), line) {
                return Err(cfg_err(line, format!("section [{name}] repeated (lines {prev} and {line})")));
            }
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| cfg_err(line, format!("expected 'key = value', got '{s}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current.as_ref().ok_or_else(|| cfg_err(line, format!("key '{key}' appears before any section")))?;
        let allowed = SECTIONS.iter().find(|(n, _)| n == section).map(|(_, keys)| *keys).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(cfg_err(line, format!("unknown key '{key}' in [{section}]")));
        }
        if value.is_empty() {
            return Err(cfg_err(line, format!("key '{key}' has no value")));
        }
        let slot = (section.clone(), key.to_string());
        if let Some(prev) = entries.get(&slot) {
            return Err(cfg_err(line, format!("duplicate key '{key}' in [{section}] (lines {} and {line})", prev.line)));
        }
        entries.insert(slot, Entry { value: value.to_string(), line });
    }
    Ok(Doc { entries, sections })
}

impl Doc {
    fn has_section(&self, s: &str) -> bool {
        self.sections.contains_key(s)
    }

    fn section_line(&self, s: &str) -> usize {
        self.sections.get(s).copied().unwrap_or(0)
    }

    fn raw(&self, s: &str, k: &str) -> Option<&Entry> {
        self.entries.get(&(s.to_string(), k.to_string()))
    }

    fn line_of(&self, s: &str, k: &str) -> usize {
        self.raw(s, k).map_or(self.section_line(s), |e| e.line)
    }

    fn get<T: std::str::FromStr>(&self, s: &str, k: &str, what: &str) -> Result<Option<T>> {
        match self.raw(s, k) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| cfg_err(e.line, format!("'{k}' must be {what}, got '{}'", e.value))),
        }
    }

    fn num(&self, s: &str, k: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.get(s, k, "a number")?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(cfg_err(self.line_of(s, k), format!("'{k}' must be finite")));
            }
        }
        Ok(v)
    }

    fn req_num(&self, s: &str, k: &str) -> Result<f64> {
        self.num(s, k)?.ok_or_else(|| self.missing(s, k))
    }

    fn int(&self, s: &str, k: &str) -> Result<Option<usize>> {
        self.get(s, k, "a nonnegative integer")
    }

    fn flag(&self, s: &str, k: &str) -> Result<Option<bool>> {
        self.get(s, k, "true or false")
    }

    fn text(&self, s: &str, k: &str) -> Option<&str> {
        self.raw(s, k).map(|e| e.value.as_str())
    }

    fn list(&self, s: &str, k: &str, len: usize) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.raw(s, k) else { return Ok(None) };
        let parts: Vec<f64> = e
            .value
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| cfg_err(e.line, format!("'{k}' must be a comma-separated list of numbers")))?;
        if parts.len() != len {
            return Err(cfg_err(e.line, format!("'{k}' needs {len} values, got {}", parts.len())));
        }
        Ok(Some(parts))
    }

    fn missing(&self, s: &str, k: &str) -> LabError {
        cfg_err(self.section_line(s), format!("missing mandatory key '{k}' in [{s}]"))
    }

    fn require_section(&self, s: &str) -> Result<()> {
        if self.has_section(s) {
            Ok(())
        } else {
            Err(cfg_err(0, format!("missing mandatory section [{s}]")))
        }
    }
}

/// Parse and validate a configuration. `kind = file` data is loaded separately.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let doc = tokenize(text)?;
    for s in ["problem", "grid", "run"] {
        doc.require_section(s)?;
    }
    let dichotomy_run = doc.has_section("dichotomy");
    if !dichotomy_run {
        doc.require_section("initial")?;
    }

    // [problem]
    let n: usize = doc.get("problem", "N", "a positive integer")?.ok_or_else(|| doc.missing("problem", "N"))?;
    let m = doc.req_num("problem", "m")?;
    let p = doc.req_num("problem", "p")?;
    let params = ProblemParams::new(n, m, p).map_err(|e| cfg_err(doc.line_of("problem", "p"), e.to_string()))?;
    let source = doc.flag("problem", "source")?.unwrap_or(true);

    // [grid]
    let h = doc.req_num("grid", "h")?;
    let geometry = match doc.text("grid", "geometry").unwrap_or("box") {
        "box" => {
            let half = doc.req_num("grid", "half_width")?;
            if doc.raw("grid", "r_max").is_some() {
                return Err(cfg_err(doc.line_of("grid", "r_max"), "'r_max' only applies to radial grids"));
            }
            let boundary: Boundary = match doc.raw("grid", "boundary") {
                Some(e) => e.value.parse().map_err(|_| cfg_err(e.line, format!("unknown boundary '{}'", e.value)))?,
                None => Boundary::Neumann,
            };
            let g = BoxGrid::centered(n, half, h, boundary).map_err(|e| cfg_err(doc.line_of("grid", "h"), e.to_string()))?;
            Geometry::Box(g)
        }
        "radial" => {
            let r_max = doc.req_num("grid", "r_max")?;
            for k in ["half_width", "boundary"] {
                if doc.raw("grid", k).is_some() {
                    return Err(cfg_err(doc.line_of("grid", k), format!("'{k}' only applies to box grids")));
                }
            }
            let g = RadialGrid::new(n, r_max, h).map_err(|e| cfg_err(doc.line_of("grid", "h"), e.to_string()))?;
            Geometry::Radial(g)
        }
        other => return Err(cfg_err(doc.line_of("grid", "geometry"), format!("geometry must be box or radial, got '{other}'"))),
    };

    // [initial]
    let kind = match doc.text("initial", "kind") {
        Some(k) => k,
        None if dichotomy_run => "mu_c",
        None => return Err(doc.missing("initial", "kind")),
    };
    let kind_line = doc.line_of("initial", "kind");
    if dichotomy_run && kind != "mu_c" {
        return Err(cfg_err(kind_line, "a dichotomy needs kind = mu_c"));
    }
    let used: &[&str] = match kind {
        "mu_c" => &["c"],
        "gaussian" => &["amplitude", "width"],
        "constant" => &["value"],
        "barenblatt" => &["mass", "t0"],
        "file" => &["path"],
        other => return Err(cfg_err(kind_line, format!("unknown initial kind '{other}'"))),
    };
    for k in ["c", "amplitude", "width", "value", "mass", "t0", "path"] {
        if !used.contains(&k) && doc.raw("initial", k).is_some() {
            return Err(cfg_err(doc.line_of("initial", k), format!("'{k}' does not apply to kind = {kind}")));
        }
    }
    let mut initial_path = None;
    let initial = match kind {
        "mu_c" => {
            let c = match doc.num("initial", "c")? {
                Some(c) => c,
                None if dichotomy_run => 0.0,
                None => return Err(doc.missing("initial", "c")),
            };
            InitialSpec::MuC { c }
        }
        "gaussian" => InitialSpec::Gaussian {
            amplitude: doc.req_num("initial", "amplitude")?,
            width: doc.req_num("initial", "width")?,
        },
        "constant" => InitialSpec::Constant { value: doc.req_num("initial", "value")? },
        "barenblatt" => InitialSpec::Barenblatt { mass: doc.req_num("initial", "mass")?, t0: doc.req_num("initial", "t0")? },
        _ => {
            let e = doc.raw("initial", "path").ok_or_else(|| doc.missing("initial", "path"))?;
            initial_path = Some((e.value.clone(), e.line));
            InitialSpec::Constant { value: 0.0 }
        }
    };
    let regularization = match (doc.num("initial", "i")?, doc.int("initial", "j")?) {
        (Some(i), Some(j)) => Some((i, u32::try_from(j).map_err(|_| cfg_err(doc.line_of("initial", "j"), "'j' is too large"))?)),
        (None, None) => None,
        (Some(_), None) => return Err(cfg_err(doc.line_of("initial", "i"), "'i' needs 'j' as well")),
        (None, Some(_)) => return Err(cfg_err(doc.line_of("initial", "j"), "'j' needs 'i' as well")),
    };

    // [run]
    let horizon = doc.req_num("run", "horizon")?;
    let mut solver = SolverConfig::new(params, geometry, initial, horizon);
    solver.source = source;
    solver.regularization = regularization;
    if let Some(v) = doc.num("run", "start_time")? {
        solver.start_time = v;
    }
    if let Some(v) = doc.num("run", "safety")? {
        solver.safety = v;
    }
    if let Some(v) = doc.num("run", "reaction_safety")? {
        solver.reaction_safety = v;
    }
    if let Some(v) = doc.num("run", "u_max")? {
        solver.u_max = v;
    }
    if let Some(v) = doc.num("run", "dt_min")? {
        solver.dt_min = v;
    }
    if let Some(v) = doc.int("run", "early_steps")? {
        solver.early_snapshot_steps = if v == 0 { None } else { Some(v) };
    }
    let count = doc.int("run", "snapshots")?.unwrap_or(10);
    solver = match doc.text("run", "snapshot_spacing").unwrap_or("uniform") {
        "uniform" => {
            if doc.raw("run", "first_snapshot").is_some() {
                return Err(cfg_err(doc.line_of("run", "first_snapshot"), "'first_snapshot' needs snapshot_spacing = log"));
            }
            solver.with_uniform_snapshots(count.max(1))
        }
        "log" => {
            let span = solver.horizon - solver.start_time;
            let first = doc.num("run", "first_snapshot")?.unwrap_or(solver.start_time + 1e-3 * span);
            if !(first > solver.start_time) {
                return Err(cfg_err(doc.line_of("run", "first_snapshot"), "'first_snapshot' must exceed the start time"));
            }
            solver.with_log_snapshots(first, count.max(1))
        }
        other => {
            return Err(cfg_err(doc.line_of("run", "snapshot_spacing"), format!("snapshot_spacing must be uniform or log, got '{other}'")))
        }
    };

    // [monitors]
    let ratio = doc.num("monitors", "ladder_ratio")?.unwrap_or(DEFAULT_LADDER_RATIO);
    if doc.flag("monitors", "linf")?.unwrap_or(false) {
        solver.monitors.push(NormSpec::new(crate::norms::NormKind::Linfty, f64::INFINITY));
    }
    if let Some(cap) = doc.num("monitors", "sup_ball_mass")? {
        solver.monitors.push(NormSpec::new(crate::norms::NormKind::SupBallMass, cap).with_ratio(ratio));
    }
    if let Some(v) = doc.list("monitors", "morrey", 3)? {
        solver.monitors.push(NormSpec::morrey(v[0], v[1], v[2]).with_ratio(ratio));
    }
    if let Some(alpha) = doc.num("monitors", "orlicz_eta")? {
        let spec = NormSpec::orlicz_eta(alpha, horizon).map_err(|e| cfg_err(doc.line_of("monitors", "orlicz_eta"), e.to_string()))?;
        solver.monitors.push(spec.with_ratio(ratio));
    }

    // [dichotomy]
    let dichotomy = if dichotomy_run {
        let d = DichotomySettings::default();
        let settings = DichotomySettings {
            c_lo: doc.num("dichotomy", "c_lo")?.unwrap_or(d.c_lo),
            c_hi: doc.num("dichotomy", "c_hi")?.unwrap_or(d.c_hi),
            steps: doc.int("dichotomy", "steps")?.unwrap_or(d.steps),
            i_factor: doc.num("dichotomy", "i_factor")?.unwrap_or(d.i_factor),
            j: match doc.int("dichotomy", "j")? {
                Some(j) => u32::try_from(j).map_err(|_| cfg_err(doc.line_of("dichotomy", "j"), "'j' is too large"))?,
                None => d.j,
            },
            widen_factor: doc.num("dichotomy", "widen_factor")?.unwrap_or(d.widen_factor),
            max_widen: doc.int("dichotomy", "max_widen")?.unwrap_or(d.max_widen),
            validation: doc.flag("dichotomy", "validation")?.unwrap_or(d.validation),
            envelope_check: doc.flag("dichotomy", "envelope_check")?.unwrap_or(d.envelope_check),
        };
        settings.validate().map_err(|e| cfg_err(doc.section_line("dichotomy"), e.to_string()))?;
        Some(settings)
    } else {
        None
    };

    // [trace]
    let trace = if doc.has_section("trace") {
        let t = TraceSettings {
            tau0: doc.num("trace", "tau0")?,
            sigma_min: doc.num("trace", "sigma_min")?,
            sigma_max: doc.num("trace", "sigma_max")?,
            ratio: doc.num("trace", "ratio")?.unwrap_or(std::f64::consts::SQRT_2),
        };
        if !(t.ratio > 1.0) {
            return Err(cfg_err(doc.line_of("trace", "ratio"), "'ratio' must exceed 1"));
        }
        Some(t)
    } else {
        None
    };

    solver.validate().map_err(|e| cfg_err(doc.section_line("run"), e.to_string()))?;
    Ok(ExperimentConfig { solver, initial_path, dichotomy, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{DEFAULT_SAFETY, DEFAULT_U_MAX};

    const MINIMAL: &str = "\
[problem]
N = 1
m = 2
p = 5

[grid]
half_width = 4
h = 0.05

[initial]
kind = gaussian   # bump
amplitude = 1
width = 0.5

[run]
horizon = 1
";

    fn line_of(err: LabError) -> usize {
        match err {
            LabError::Config { line, .. } => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.solver.safety, DEFAULT_SAFETY);
        assert_eq!(c.solver.u_max, DEFAULT_U_MAX);
        assert_eq!(c.solver.safety, 0.5);
        assert_eq!(c.solver.u_max, 1e8);
        assert_eq!(c.solver.geometry.len(), 161);
        assert_eq!(c.solver.snapshot_times.len(), 10);
        assert!(c.dichotomy.is_none() && c.trace.is_none());
    }

    #[test]
    fn rejects_p_not_above_m() {
        let text = MINIMAL.replace("p = 5", "p = 2");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("p > m"), "{err}");
        assert_eq!(line_of(err), 4);
    }

    #[test]
    fn duplicate_key_cites_both_lines() {
        let text = MINIMAL.replace("m = 2\n", "m = 2\nm = 3\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("lines 3 and 4"), "{err}");
    }

    #[test]
    fn unknown_key_and_section() {
        let text = MINIMAL.replace("h = 0.05", "h = 0.05\nspacing = 2");
        assert_eq!(line_of(parse_config(&text).unwrap_err()), 9);
        let text = format!("{MINIMAL}[extras]\n");
        assert!(parse_config(&text).unwrap_err().to_string().contains("unknown section"));
        let text = MINIMAL.replace("width = 0.5", "width = 0.5\nc = 3");
        assert!(parse_config(&text).unwrap_err().to_string().contains("does not apply"));
    }

    #[test]
    fn missing_mandatory_key() {
        let text = MINIMAL.replace("horizon = 1\n", "");
        assert!(parse_config(&text).unwrap_err().to_string().contains("'horizon'"));
        let text = MINIMAL.replace("h = 0.05\n", "");
        assert!(parse_config(&text).unwrap_err().to_string().contains("'h'"));
    }

    #[test]
    fn malformed_values() {
        let text = MINIMAL.replace("N = 1", "N = one");
        assert_eq!(line_of(parse_config(&text).unwrap_err()), 2);
        let text = MINIMAL.replace("[run]\n", "[run]\nsafety = 2\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn optional_sections() {
        let text = "\
[problem]
N = 1
m = 2
p = 4
[grid]
geometry = radial
r_max = 2
h = 0.01
[initial]
kind = mu_c
c = 0.5
i = 100
j = 100
[run]
horizon = 10
snapshots = 3
snapshot_spacing = log
first_snapshot = 0.01
[monitors]
orlicz_eta = 1
morrey = 1, 1, 0.5
[trace]
tau0 = 0.001
";
        let c = parse_config(text).unwrap();
        assert!(matches!(c.solver.geometry, Geometry::Radial(_)));
        assert_eq!(c.solver.regularization, Some((100.0, 100)));
        assert_eq!(c.solver.monitors.len(), 2);
        assert_eq!(c.solver.snapshot_times.len(), 10);
        assert_eq!(c.trace.unwrap().tau0, Some(0.001));

        let d = parse_config(&MINIMAL.replace("[initial]\nkind = gaussian   # bump\namplitude = 1\nwidth = 0.5\n", "[dichotomy]\nsteps = 3\n"))
            .unwrap();
        assert_eq!(d.dichotomy.unwrap().steps, 3);
        assert_eq!(d.solver.initial, InitialSpec::MuC { c: 0.0 });
    }
}
