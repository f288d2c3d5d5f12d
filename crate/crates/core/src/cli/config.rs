//! Run configuration: TOML sections with defaults, presets and `--set`
//! overrides.
//!
//! ```toml
//! preset = "desk"            # or "paper-fig2-coarse", "paper-fig2-fine"
//! [mesh]   n = 32
//! [time]   tau = 0.05, t_end = 2.0
//! [model]  A = 8.0, a = 0.15, eps = 0.2, M = 1.0
//! [newton] mode = "increment_tolerance", tol = 1e-14, sigma = 0.1
//! [output] dir = "output", vtk_every = 0, checkpoint = true
//! [study]  ladder = [{ n = 8, tau = 0.1 }, ...], reference_n = 128, ...
//! ```
//!
//! Precedence, lowest first: built-in defaults, the preset, the file, `--set`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ionic::AlievPanfilovParams;
use crate::solver::march::step_count;
use crate::solver::{NewtonConfig, StoppingMode};

/// Environment variable naming the output root when `output.dir` is unset.
pub const OUTPUT_DIR_ENV: &str = "MONODOMAIN_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub mesh: MeshSection,
    pub time: TimeSection,
    pub model: ModelSection,
    pub newton: NewtonSection,
    pub output: OutputSection,
    pub study: StudySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    /// Cells per side of the structured unit-square mesh.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub tau: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "A")]
    pub a_strength: f64,
    #[serde(rename = "a")]
    pub threshold: f64,
    pub eps: f64,
    #[serde(rename = "M")]
    pub conductivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSection {
    pub mode: StoppingMode,
    pub tol: f64,
    pub sigma: f64,
    pub max_iterations: usize,
    pub stall_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Write a VTK frame every this many steps; 0 disables.
    pub vtk_every: usize,
    pub checkpoint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    pub n: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub ladder: Vec<Rung>,
    pub reference_n: usize,
    pub reference_tau: f64,
    pub reference_tol: f64,
    /// Probe point for the solve time series.
    pub probe: [f64; 2],
    pub newton_n: usize,
    pub newton_tau: f64,
    pub newton_times: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            mesh: MeshSection::default(),
            time: TimeSection::default(),
            model: ModelSection::default(),
            newton: NewtonSection::default(),
            output: OutputSection::default(),
            study: StudySection::default(),
        }
    }
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { n: 32 }
    }
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            tau: 0.05,
            t_end: 2.0,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = AlievPanfilovParams::default();
        ModelSection {
            a_strength: p.a_strength,
            threshold: p.threshold,
            eps: p.eps,
            conductivity: p.conductivity,
        }
    }
}

impl Default for NewtonSection {
    fn default() -> Self {
        let c = NewtonConfig::default();
        NewtonSection {
            mode: c.mode,
            tol: c.tol,
            sigma: c.sigma,
            max_iterations: c.max_iterations,
            stall_floor: c.stall_floor,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            vtk_every: 0,
            checkpoint: true,
        }
    }
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            ladder: vec![
                Rung { n: 8, tau: 0.1 },
                Rung { n: 16, tau: 0.05 },
                Rung { n: 32, tau: 0.025 },
            ],
            reference_n: 128,
            reference_tau: 1.0 / 256.0,
            reference_tol: 1e-15,
            probe: [0.5, 0.5],
            newton_n: 64,
            newton_tau: 1.0 / 128.0,
            newton_times: vec![0.5, 1.5],
        }
    }
}

/// Named parameter sets. Each is a TOML fragment applied below the file.
pub fn preset(name: &str) -> Option<&'static str> {
    Some(match name {
        "desk" => "",
        "paper-fig2-coarse" => {
            "[mesh]\nn = 20\n[time]\ntau = 0.1\nt_end = 16.0\n\
             [study]\nreference_n = 320\nreference_tau = 0.002\nnewton_n = 320\nnewton_tau = 0.002\nnewton_times = [2.5, 10.0]\n"
        }
        "paper-fig2-fine" => {
            "[mesh]\nn = 80\n[time]\ntau = 0.025\nt_end = 16.0\n\
             [study]\nreference_n = 320\nreference_tau = 0.002\nnewton_n = 320\nnewton_tau = 0.002\nnewton_times = [2.5, 10.0]\n"
        }
        _ => return None,
    })
}

pub const PRESETS: [&str; 3] = ["desk", "paper-fig2-coarse", "paper-fig2-fine"];

impl RunConfig {
    pub fn params(&self) -> AlievPanfilovParams {
        let m = &self.model;
        AlievPanfilovParams {
            a_strength: m.a_strength,
            threshold: m.threshold,
            eps: m.eps,
            conductivity: m.conductivity,
        }
    }

    pub fn newton_config(&self) -> NewtonConfig {
        let n = &self.newton;
        NewtonConfig {
            mode: n.mode,
            tol: n.tol,
            sigma: n.sigma,
            max_iterations: n.max_iterations,
            stall_floor: n.stall_floor,
        }
    }

    /// `output.dir`, else the environment variable, else `./output`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("output"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh.n == 0 {
            return Err(Error::param("mesh.n", "must be at least 1"));
        }
        step_count(self.time.tau, self.time.t_end)?;
        self.params().validate()?;
        self.newton_config().validate()?;
        if !self.study.probe.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(Error::param("study.probe", "must lie in the unit square"));
        }
        Ok(())
    }

    /// Checks of the `[study]` block, needed only by the study commands.
    pub fn validate_study(&self) -> Result<()> {
        let s = &self.study;
        if s.ladder.is_empty() {
            return Err(Error::param("study.ladder", "needs at least one rung"));
        }
        for pair in s.ladder.windows(2) {
            if !(pair[1].n > pair[0].n && pair[1].tau < pair[0].tau) {
                return Err(Error::param(
                    "study.ladder",
                    "rungs must strictly refine in both n and tau",
                ));
            }
        }
        for r in &s.ladder {
            if r.n == 0 {
                return Err(Error::param("study.ladder", "n must be at least 1"));
            }
            step_count(r.tau, self.time.t_end).map_err(|_| {
                Error::param(
                    "study.ladder",
                    format!(
                        "tau = {} does not divide t_end = {}",
                        r.tau, self.time.t_end
                    ),
                )
            })?;
        }
        if s.reference_n == 0 {
            return Err(Error::param("study.reference_n", "must be at least 1"));
        }
        step_count(s.reference_tau, self.time.t_end).map_err(|_| {
            Error::param(
                "study.reference_tau",
                format!("must divide t_end = {}", self.time.t_end),
            )
        })?;
        if !(s.reference_tol > 0.0) {
            return Err(Error::param("study.reference_tol", "must be positive"));
        }
        if s.newton_n == 0 {
            return Err(Error::param("study.newton_n", "must be at least 1"));
        }
        for &t in &s.newton_times {
            step_count(s.newton_tau, t).map_err(|_| {
                Error::param(
                    "study.newton_times",
                    format!("{t} is not a positive multiple of study.newton_tau"),
                )
            })?;
        }
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::ConfigParse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: format!("{origin}: {}", e.message()),
    })
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Turn `section.key=value` into a one-entry table. Values are TOML; a bare
/// word that is not valid TOML is taken as a string.
fn override_table(assignment: &str) -> Result<toml::Table> {
    let (path, value) = assignment.split_once('=').ok_or_else(|| {
        Error::param(
            assignment.trim(),
            "override must look like section.key=value",
        )
    })?;
    let path = path.trim();
    let value = value.trim();
    let parsed = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => toml::Value::String(value.to_owned()),
    };
    let mut keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::param(path, "empty key in override"));
    }
    let last = keys.pop().expect("split yields at least one piece");
    let mut table = toml::Table::new();
    table.insert(last.to_owned(), parsed);
    for k in keys.into_iter().rev() {
        let mut outer = toml::Table::new();
        outer.insert(k.to_owned(), toml::Value::Table(table));
        table = outer;
    }
    Ok(table)
}

/// Parse configuration text with no overrides.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[], None)
}

/// Parse configuration text, apply `section.key=value` overrides and an
/// optional preset (a `preset` key in the text or overrides wins over it).
pub fn parse_config_with(
    text: &str,
    overrides: &[String],
    preset_name: Option<&str>,
) -> Result<RunConfig> {
    // Typed parse of the file alone, so unknown keys and type errors carry
    // the file's line numbers.
    toml::from_str::<RunConfig>(text).map_err(|e| Error::ConfigParse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_owned(),
    })?;
    let file = parse_table(text, "config")?;
    let mut sets = toml::Table::new();
    for o in overrides {
        merge(&mut sets, override_table(o)?);
    }
    let name = sets
        .get("preset")
        .or_else(|| file.get("preset"))
        .and_then(|v| v.as_str().map(str::to_owned))
        .or_else(|| preset_name.map(str::to_owned));

    let mut merged = match &name {
        Some(n) => {
            let fragment = preset(n).ok_or_else(|| {
                Error::param(
                    "preset",
                    format!("unknown preset `{n}` (known: {})", PRESETS.join(", ")),
                )
            })?;
            parse_table(fragment, "preset")?
        }
        None => toml::Table::new(),
    };
    merge(&mut merged, file);
    merge(&mut merged, sets);
    if let Some(n) = name {
        merged.insert("preset".into(), toml::Value::String(n));
    }
    // File errors were reported above with lines; what fails here came in
    // through a preset or an override.
    let cfg: RunConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::ConfigParse {
            line: 0,
            message: format!("override: {}", e.message()),
        })?;
    cfg.validate()?;
    Ok(cfg)
}
