//! Run configuration: command-line flags layered over an optional TOML file.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::penalty::{HazardParams, Problem, TaxPolicy};
use crate::sweep::{Axis, GridSpec};

pub const DEFAULT_PRECISION: usize = 12;
pub const DEFAULT_CURVE_POINTS: usize = 200;
const MAX_PRECISION: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Where a value came from, for error attribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Flag(&'static str),
    File { path: PathBuf, line: usize },
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag(name) => write!(f, "flag --{name}"),
            Origin::File { path, line } => write!(f, "{} line {line}", path.display()),
            Origin::Default => write!(f, "default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub origin: Option<Origin>,
    pub message: String,
}

impl ConfigError {
    fn at(field: &str, origin: &Origin, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.to_string()),
            origin: Some(origin.clone()),
            message: message.into(),
        }
    }

    fn plain(message: impl Into<String>) -> Self {
        Self {
            field: None,
            origin: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.field, &self.origin) {
            (Some(field), Some(origin)) => write!(f, "{field} ({origin}): {}", self.message),
            (Some(field), None) => write!(f, "{field}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Number(f64),
    Text(String),
}

/// Flat key-value config file. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    pi: Option<Spanned<RawValue>>,
    t: Option<Spanned<RawValue>>,
    beta: Option<Spanned<RawValue>>,
    z: Option<Spanned<RawValue>>,
    #[serde(rename = "A")]
    a: Option<Spanned<RawValue>>,
    k: Option<Spanned<RawValue>>,
    format: Option<Spanned<String>>,
    out: Option<Spanned<String>>,
    precision: Option<Spanned<i64>>,
    n: Option<Spanned<i64>>,
    m_max: Option<Spanned<f64>>,
    intensity: Option<Spanned<f64>>,
    tolerance: Option<Spanned<f64>>,
}

/// Values supplied on the command line; strings for the six model
/// parameters so that ranges (`start:stop:count`) pass through.
#[derive(Debug, Clone, Default)]
pub struct FlagValues {
    pub a: Option<String>,
    pub k: Option<String>,
    pub beta: Option<String>,
    pub z: Option<String>,
    pub t: Option<String>,
    pub pi: Option<String>,
    pub config: Option<PathBuf>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub precision: Option<usize>,
    pub n: Option<usize>,
    pub m_max: Option<f64>,
    pub intensity: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub axis: Axis,
    pub origin: Origin,
}

/// Model parameters in declared order `(A, k, beta, z, t, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub a: Option<Param>,
    pub k: Option<Param>,
    pub beta: Option<Param>,
    pub z: Option<Param>,
    pub t: Option<Param>,
    pub pi: Option<Param>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ParamSet,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub precision: usize,
    pub n: usize,
    pub m_max: Option<f64>,
    pub intensity: f64,
    pub tolerance: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

fn parse_axis(field: &str, text: &str, origin: &Origin) -> Result<Axis, ConfigError> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| ConfigError::at(field, origin, format!("`{s}` is not a number")))
    };
    match parts.as_slice() {
        [single] => Ok(Axis::Fixed(num(single)?)),
        [start, stop, count] => {
            let count: usize = count.parse().map_err(|_| {
                ConfigError::at(field, origin, format!("`{count}` is not a point count"))
            })?;
            let (start, stop) = (num(start)?, num(stop)?);
            let axis = Axis::Range { start, stop, count };
            if count == 0 {
                return Err(ConfigError::at(field, origin, "range has zero points"));
            }
            if start > stop {
                return Err(ConfigError::at(
                    field,
                    origin,
                    format!("range start {start} exceeds stop {stop}"),
                ));
            }
            Ok(axis)
        }
        _ => Err(ConfigError::at(
            field,
            origin,
            format!("`{text}` is neither a number nor start:stop:count"),
        )),
    }
}

/// Admissibility of one value of a named model parameter.
fn check_value(field: &str, v: f64) -> Result<(), String> {
    let outcome = match field {
        "A" => HazardParams::new(v, 1.0).map(drop),
        "k" => HazardParams::new(1.0, v).map(drop),
        "t" => TaxPolicy::new(v, 0.0, 0.0).map(drop),
        "beta" => TaxPolicy::new(0.0, v, 0.0).map(drop),
        "z" => TaxPolicy::new(0.0, 0.0, v).map(drop),
        "pi" => Problem::from_parts(v, 0.0, 0.0, 0.0, 1.0, 1.0).map(drop),
        _ => Ok(()),
    };
    outcome.map_err(|e| match e {
        crate::Error::InvalidParameter { reason, .. } => reason,
        other => other.to_string(),
    })
}

fn checked_param(field: &'static str, axis: Axis, origin: Origin) -> Result<Param, ConfigError> {
    let ends = [axis.value(0), axis.value(axis.len().saturating_sub(1))];
    for v in ends {
        check_value(field, v).map_err(|reason| ConfigError::at(field, &origin, reason))?;
    }
    Ok(Param { axis, origin })
}

fn load_file(path: &Path) -> Result<(FileConfig, String), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::plain(format!("cannot read config {}: {e}", path.display())))?;
    let parsed: FileConfig = toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| line_of(&text, s.start));
        ConfigError {
            field: None,
            origin: line.map(|line| Origin::File {
                path: path.to_path_buf(),
                line,
            }),
            message: format!("invalid config: {}", e.message()),
        }
    })?;
    Ok((parsed, text))
}

impl RunConfig {
    pub fn resolve(flags: &FlagValues) -> Result<Self, ConfigError> {
        let (file, text) = match &flags.config {
            Some(path) => load_file(path)?,
            None => (FileConfig::default(), String::new()),
        };
        let path = flags.config.clone().unwrap_or_default();
        let file_origin = |span: std::ops::Range<usize>| Origin::File {
            path: path.clone(),
            line: line_of(&text, span.start),
        };

        let param = |field: &'static str,
                     flag: &Option<String>,
                     from_file: &Option<Spanned<RawValue>>|
         -> Result<Option<Param>, ConfigError> {
            if let Some(text) = flag {
                let origin = Origin::Flag(field);
                let axis = parse_axis(field, text, &origin)?;
                return checked_param(field, axis, origin).map(Some);
            }
            match from_file {
                None => Ok(None),
                Some(spanned) => {
                    let origin = file_origin(spanned.span());
                    let axis = match spanned.get_ref() {
                        RawValue::Number(v) => Axis::Fixed(*v),
                        RawValue::Text(s) => parse_axis(field, s, &origin)?,
                    };
                    checked_param(field, axis, origin).map(Some)
                }
            }
        };

        let params = ParamSet {
            a: param("A", &flags.a, &file.a)?,
            k: param("k", &flags.k, &file.k)?,
            beta: param("beta", &flags.beta, &file.beta)?,
            z: param("z", &flags.z, &file.z)?,
            t: param("t", &flags.t, &file.t)?,
            pi: param("pi", &flags.pi, &file.pi)?,
        };

        let format = match (flags.format, &file.format) {
            (Some(f), _) => f,
            (None, Some(s)) => match s.get_ref().as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                other => {
                    return Err(ConfigError::at(
                        "format",
                        &file_origin(s.span()),
                        format!("unknown format `{other}`"),
                    ))
                }
            },
            (None, None) => Format::default(),
        };

        let out = flags
            .out
            .clone()
            .or_else(|| file.out.as_ref().map(|s| PathBuf::from(s.get_ref())));

        let precision = match (flags.precision, &file.precision) {
            (Some(p), _) => (p, Origin::Flag("precision")),
            (None, Some(s)) => {
                let origin = file_origin(s.span());
                let p = usize::try_from(*s.get_ref()).map_err(|_| {
                    ConfigError::at("precision", &origin, "must be a non-negative integer")
                })?;
                (p, origin)
            }
            (None, None) => (DEFAULT_PRECISION, Origin::Default),
        };
        if precision.0 > MAX_PRECISION {
            return Err(ConfigError::at(
                "precision",
                &precision.1,
                format!("at most {MAX_PRECISION} digits"),
            ));
        }

        let n = match (flags.n, &file.n) {
            (Some(n), _) => (n, Origin::Flag("n")),
            (None, Some(s)) => {
                let origin = file_origin(s.span());
                let n = usize::try_from(*s.get_ref())
                    .map_err(|_| ConfigError::at("n", &origin, "must be a non-negative integer"))?;
                (n, origin)
            }
            (None, None) => (DEFAULT_CURVE_POINTS, Origin::Default),
        };
        if n.0 < 2 {
            return Err(ConfigError::at(
                "n",
                &n.1,
                format!("need at least 2 samples, got {}", n.0),
            ));
        }

        let real = |field: &'static str, flag: Option<f64>, from_file: &Option<Spanned<f64>>| match (
            flag, from_file,
        ) {
            (Some(v), _) => Some((v, Origin::Flag(field))),
            (None, Some(s)) => Some((*s.get_ref(), file_origin(s.span()))),
            (None, None) => None,
        };

        let m_max = real("m-max", flags.m_max, &file.m_max);
        if let Some((v, origin)) = &m_max {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(ConfigError::at(
                    "m_max",
                    origin,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        let intensity = real("intensity", flags.intensity, &file.intensity);
        if let Some((v, origin)) = &intensity {
            if !(v.abs() < 1.0) {
                return Err(ConfigError::at(
                    "intensity",
                    origin,
                    format!("must satisfy |intensity| < 1, got {v}"),
                ));
            }
        }
        let tolerance = real("tolerance", flags.tolerance, &file.tolerance);
        if let Some((v, origin)) = &tolerance {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::at(
                    "tolerance",
                    origin,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }

        Ok(RunConfig {
            params,
            format,
            out,
            precision: precision.0,
            n: n.0,
            m_max: m_max.map(|(v, _)| v),
            intensity: intensity.map_or(0.0, |(v, _)| v),
            tolerance: tolerance.map(|(v, _)| v),
        })
    }

    fn named(&self) -> [(&'static str, &Option<Param>); 6] {
        let p = &self.params;
        [
            ("A", &p.a),
            ("k", &p.k),
            ("beta", &p.beta),
            ("z", &p.z),
            ("t", &p.t),
            ("pi", &p.pi),
        ]
    }

    pub fn has_any_param(&self) -> bool {
        self.named().iter().any(|(_, p)| p.is_some())
    }

    fn axes(&self) -> Result<[Axis; 6], ConfigError> {
        let mut out = [Axis::Fixed(0.0); 6];
        for (slot, (name, param)) in out.iter_mut().zip(self.named()) {
            *slot = param
                .as_ref()
                .ok_or_else(|| ConfigError {
                    field: Some(name.into()),
                    origin: None,
                    message: "missing value".into(),
                })?
                .axis;
        }
        Ok(out)
    }

    /// A single problem; ranges are rejected. The enforcement shift is applied.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        for (name, param) in self.named() {
            if let Some(Param {
                axis: Axis::Range { .. },
                origin,
            }) = param
            {
                return Err(ConfigError::at(
                    name,
                    origin,
                    "ranges are only accepted by `sweep` and `verify`",
                ));
            }
        }
        let [a, k, beta, z, t, pi] = self.axes()?.map(|axis| axis.value(0));
        let problem = Problem::from_parts(pi, t, beta, z, a, k)
            .map_err(|e| ConfigError::plain(e.to_string()))?;
        let hazard = crate::sweep::enforcement_shift(problem.hazard(), self.intensity)
            .map_err(|e| ConfigError::plain(e.to_string()))?;
        Ok(problem.with_hazard(hazard))
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        let [a, k, beta, z, t, pi] = self.axes()?;
        Ok(GridSpec {
            a,
            k,
            beta,
            z,
            t,
            pi,
            intensity: self.intensity,
        })
    }
}
