//! Model and experience file formats.
//!
//! Model files are JSON:
//!
//! ```text
//! {
//!   "format": "geohmm-model", "version": 1,
//!   "n_states": N, "obs_dims": [..], "start_state": s, "mode": "global" | "relative",
//!   "units": { "angle": "radians" | "degrees", "length": "units" | "m" | "mm" },
//!   "transitions": N×N,
//!   "observations": [dim][state][symbol],
//!   "relations": N×N of [mu_x, mu_y, mu_theta, var_x, var_y, kappa]
//! }
//! ```
//!
//! Experience files are line-oriented text. `#` starts a comment.
//!
//! ```text
//! GEOHMM-EXPERIENCE v1
//! dims 3 alphabet 4,4,4 angle radians length units
//! 0 2 1
//! 0 1 1 ; 12.5 480.2 0.013
//! ```
//!
//! The `alphabet` key is optional. Every line after the first observation
//! carries the reading `dx dy dtheta` after a `;`.
//!
//! Values are converted to radians and base length units on load (`mm` is
//! scaled by 1e-3, variances by 1e-6); κ always refers to radians. Files are
//! written in canonical units with shortest round-trip number formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::model::{CoordinateMode, ExperienceSequence, GeoHmm, Reading, RelationEntry, Step};

pub const MODEL_FORMAT: &str = "geohmm-model";
pub const MODEL_VERSION: u32 = 1;
pub const EXPERIENCE_HEADER: &str = "GEOHMM-EXPERIENCE v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Radians,
    Degrees,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Units,
    M,
    Mm,
}

impl AngleUnit {
    fn to_radians(self, v: f64) -> f64 {
        match self {
            AngleUnit::Radians => v,
            AngleUnit::Degrees => v.to_radians(),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "radians" | "rad" => Some(AngleUnit::Radians),
            "degrees" | "deg" => Some(AngleUnit::Degrees),
            _ => None,
        }
    }
}

impl LengthUnit {
    fn scale(self) -> f64 {
        match self {
            LengthUnit::Units | LengthUnit::M => 1.0,
            LengthUnit::Mm => 1e-3,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "units" => Some(LengthUnit::Units),
            "m" => Some(LengthUnit::M),
            "mm" => Some(LengthUnit::Mm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Units {
    pub angle: AngleUnit,
    pub length: LengthUnit,
}

impl Default for Units {
    fn default() -> Self {
        Self { angle: AngleUnit::Radians, length: LengthUnit::Units }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    n_states: usize,
    obs_dims: Vec<usize>,
    start_state: usize,
    mode: CoordinateMode,
    #[serde(default)]
    units: Units,
    transitions: Vec<Vec<f64>>,
    observations: Vec<Vec<Vec<f64>>>,
    relations: Vec<Vec<[f64; 6]>>,
}

/// Serializes a model in canonical units.
pub fn model_to_json(model: &GeoHmm) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        n_states: model.n_states(),
        obs_dims: model.obs_dims.clone(),
        start_state: model.start_state,
        mode: model.mode,
        units: Units::default(),
        transitions: model.transitions.clone(),
        observations: model.emissions.clone(),
        relations: model
            .relations
            .iter()
            .map(|row| row.iter().map(|e| [e.mu_x, e.mu_y, e.mu_theta, e.var_x, e.var_y, e.kappa]).collect())
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Parses and validates a model, converting units.
pub fn model_from_json(text: &str) -> Result<GeoHmm> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format != MODEL_FORMAT {
        return Err(GeoError::Input(format!("unknown model format {:?}", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(GeoError::Input(format!("unsupported model version {}", file.version)));
    }
    if file.transitions.len() != file.n_states {
        return Err(GeoError::Input("n_states does not match the transition matrix".into()));
    }
    let ls = file.units.length.scale();
    let relations = file
        .relations
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| RelationEntry {
                    mu_x: v[0] * ls,
                    mu_y: v[1] * ls,
                    mu_theta: crate::circstats::wrap_angle(file.units.angle.to_radians(v[2])),
                    var_x: v[3] * ls * ls,
                    var_y: v[4] * ls * ls,
                    kappa: v[5],
                })
                .collect()
        })
        .collect();
    let model = GeoHmm {
        obs_dims: file.obs_dims,
        transitions: file.transitions,
        emissions: file.observations,
        start_state: file.start_state,
        relations,
        mode: file.mode,
    };
    model.validate()?;
    Ok(model)
}

/// An experience sequence with the alphabet sizes declared in its file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceFile {
    pub sequence: ExperienceSequence,
    pub alphabet: Option<Vec<usize>>,
}

impl ExperienceFile {
    /// Declared alphabet sizes, or one more than the largest symbol seen.
    pub fn alphabet_or_inferred(&self) -> Vec<usize> {
        self.alphabet.clone().unwrap_or_else(|| {
            let l = self.sequence.obs_dims();
            (0..l)
                .map(|d| self.sequence.steps.iter().map(|s| s.obs[d]).max().unwrap_or(0) + 1)
                .collect()
        })
    }
}

/// Writes a sequence in canonical units.
pub fn experience_to_string(e: &ExperienceSequence, alphabet: Option<&[usize]>) -> String {
    let mut out = String::new();
    out.push_str(EXPERIENCE_HEADER);
    out.push('\n');
    let _ = write!(out, "dims {}", e.obs_dims());
    if let Some(a) = alphabet {
        let list: Vec<String> = a.iter().map(|k| k.to_string()).collect();
        let _ = write!(out, " alphabet {}", list.join(","));
    }
    out.push_str(" angle radians length units\n");
    for step in &e.steps {
        let obs: Vec<String> = step.obs.iter().map(|o| o.to_string()).collect();
        out.push_str(&obs.join(" "));
        if let Some(r) = &step.reading {
            let _ = write!(out, " ; {} {} {}", r.dx, r.dy, r.dtheta);
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> GeoError {
    GeoError::Parse { line, msg: msg.into() }
}

/// Parses an experience file, converting units.
pub fn experience_from_str(text: &str) -> Result<ExperienceFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (no, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if first != EXPERIENCE_HEADER {
        return Err(parse_err(no, format!("expected header {EXPERIENCE_HEADER:?}")));
    }
    let (no, header) = lines.next().ok_or_else(|| parse_err(no + 1, "missing dims line"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() % 2 != 0 {
        return Err(parse_err(no, "header must be key/value pairs"));
    }
    let mut dims = None;
    let mut alphabet = None;
    let mut units = Units::default();
    for pair in tokens.chunks(2) {
        let (key, value) = (pair[0], pair[1]);
        match key {
            "dims" => dims = Some(value.parse::<usize>().map_err(|_| parse_err(no, "bad dims"))?),
            "alphabet" => {
                let a: std::result::Result<Vec<usize>, _> = value.split(',').map(str::parse).collect();
                alphabet = Some(a.map_err(|_| parse_err(no, "bad alphabet"))?);
            }
            "angle" => units.angle = AngleUnit::parse(value).ok_or_else(|| parse_err(no, "bad angle unit"))?,
            "length" => units.length = LengthUnit::parse(value).ok_or_else(|| parse_err(no, "bad length unit"))?,
            other => return Err(parse_err(no, format!("unknown header key {other:?}"))),
        }
    }
    let dims = dims.ok_or_else(|| parse_err(no, "missing dims"))?;
    if let Some(a) = &alphabet {
        if a.len() != dims || a.contains(&0) {
            return Err(parse_err(no, "alphabet must list one positive size per dimension"));
        }
    }
    let ls = units.length.scale();
    let mut steps = Vec::new();
    for (no, line) in lines {
        let (obs_part, reading_part) = match line.split_once(';') {
            Some((a, b)) => (a, Some(b)),
            None => (line, None),
        };
        let obs: std::result::Result<Vec<usize>, _> = obs_part.split_whitespace().map(str::parse).collect();
        let obs = obs.map_err(|_| parse_err(no, "observation values must be nonnegative integers"))?;
        if obs.len() != dims {
            return Err(parse_err(no, format!("expected {dims} observation values, found {}", obs.len())));
        }
        if let Some(a) = &alphabet {
            if let Some(d) = (0..dims).find(|&d| obs[d] >= a[d]) {
                return Err(parse_err(no, format!("symbol {} outside alphabet of size {} in dimension {d}", obs[d], a[d])));
            }
        }
        let reading = match reading_part {
            None => None,
            Some(r) => {
                let v: std::result::Result<Vec<f64>, _> = r.split_whitespace().map(str::parse).collect();
                let v = v.map_err(|_| parse_err(no, "reading values must be numbers"))?;
                if v.len() != 3 || v.iter().any(|x| !x.is_finite()) {
                    return Err(parse_err(no, "a reading has exactly three finite values"));
                }
                Some(Reading::new(v[0] * ls, v[1] * ls, units.angle.to_radians(v[2])))
            }
        };
        match (steps.is_empty(), reading.is_some()) {
            (true, true) => return Err(parse_err(no, "the first step must not carry a reading")),
            (false, false) => return Err(parse_err(no, "missing reading")),
            _ => {}
        }
        steps.push(Step { obs, reading });
    }
    if steps.is_empty() {
        return Err(parse_err(no, "no steps"));
    }
    Ok(ExperienceFile { sequence: ExperienceSequence::new(steps)?, alphabet })
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| GeoError::Input(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<GeoHmm> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn write_model(path: &Path, model: &GeoHmm) -> Result<()> {
    write_atomic(path, model_to_json(model)?.as_bytes())
}

pub fn read_experience(path: &Path) -> Result<ExperienceFile> {
    experience_from_str(&fs::read_to_string(path)?)
}

pub fn write_experience(path: &Path, e: &ExperienceSequence, alphabet: Option<&[usize]>) -> Result<()> {
    write_atomic(path, experience_to_string(e, alphabet).as_bytes())
}
