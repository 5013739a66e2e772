//! Run configuration: per-subcommand defaults, a flat `key = value` file
//! format and command-line overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::experiments::SolutionKind;
use crate::operators::Topology;
use crate::ref_element::MAX_DEGREE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Verify,
    Scan,
    Converge,
    Solve,
    Burgers,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Verify => "verify",
            Self::Scan => "scan",
            Self::Converge => "converge",
            Self::Solve => "solve",
            Self::Burgers => "burgers",
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "verify" => Ok(Self::Verify),
            "scan" => Ok(Self::Scan),
            "converge" => Ok(Self::Converge),
            "solve" => Ok(Self::Solve),
            "burgers" => Ok(Self::Burgers),
            other => Err(ConfigError::Value {
                key: "command".into(),
                message: format!("unknown subcommand '{other}'"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for '{key}': {message}")]
    Value { key: String, message: String },
    #[error("cannot read config file {path}: {message}")]
    Io { path: String, message: String },
}

/// All parameters of one CLI run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub a: f64,
    pub c: f64,
    /// Polynomial degrees `N`.
    pub degrees: Vec<usize>,
    /// Cell counts `K`.
    pub cells: Vec<usize>,
    /// Operator parameters for `verify`.
    pub thetas: Vec<f64>,
    /// `(θ_adv, θ_diff)` pairs.
    pub pairs: Vec<(f64, f64)>,
    pub topologies: Vec<Topology>,
    pub order: u8,
    pub horizon: f64,
    pub mu: f64,
    /// Fixed time step; overrides `mu` when set.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub solution: SolutionKind,
    pub snapshots: Vec<f64>,
    pub tau_cap: f64,
    pub tau_lower: f64,
    pub resolution: f64,
    pub blowup_factor: f64,
    pub out: PathBuf,
    pub workers: usize,
    pub seed: u64,
}

const TABLE_PAIRS: [(f64, f64); 4] = [(0.5, 0.5), (0.5, 0.0), (0.25, 0.25), (0.0, 0.0)];

impl RunConfig {
    /// Defaults reproducing the canonical table slice of each subcommand.
    pub fn defaults(command: Command) -> Self {
        let base = Self {
            command,
            a: 0.1,
            c: 0.1,
            degrees: vec![1, 2, 3],
            cells: vec![20, 40, 80, 160, 320],
            thetas: vec![0.0, 0.25, 0.5],
            pairs: TABLE_PAIRS.to_vec(),
            topologies: vec![Topology::Bounded, Topology::Periodic],
            order: 1,
            horizon: 100.0,
            mu: 25.0,
            dt: None,
            t_end: 10.0,
            solution: SolutionKind::Decay,
            snapshots: vec![],
            tau_cap: 1e4,
            tau_lower: 1e-3,
            resolution: 1e-3,
            blowup_factor: 1e3,
            out: PathBuf::from("out"),
            workers: 0,
            seed: 0,
        };
        match command {
            Command::Verify => Self {
                cells: vec![4, 20, 80],
                ..base
            },
            Command::Scan => base,
            Command::Converge => Self {
                degrees: vec![1],
                order: 2,
                ..base
            },
            Command::Solve => Self {
                degrees: vec![1],
                cells: vec![40],
                pairs: vec![(0.5, 0.5)],
                order: 2,
                ..base
            },
            Command::Burgers => Self {
                degrees: vec![2],
                cells: vec![50, 100],
                pairs: vec![(0.5, 0.0), (0.0, 0.0)],
                order: 2,
                dt: Some(0.1),
                t_end: 2.0,
                snapshots: vec![0.0, 1.0, 2.0],
                ..base
            },
        }
    }

    pub const KEYS: [&'static str; 22] = [
        "a",
        "c",
        "N",
        "K",
        "theta",
        "pairs",
        "topology",
        "order",
        "horizon",
        "mu",
        "dt",
        "T",
        "solution",
        "snapshots",
        "tau_cap",
        "tau_lower",
        "resolution",
        "blowup_factor",
        "out",
        "workers",
        "seed",
        "command",
    ];

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError::Value {
            key: key.to_string(),
            message,
        };
        let v = value.trim();
        match key {
            "a" => self.a = parse_num(v).map_err(err)?,
            "c" => self.c = parse_num(v).map_err(err)?,
            "N" => self.degrees = parse_list(v).map_err(err)?,
            "K" => self.cells = parse_list(v).map_err(err)?,
            "theta" => self.thetas = parse_list(v).map_err(err)?,
            "pairs" => self.pairs = parse_pairs(v).map_err(err)?,
            "topology" => {
                self.topologies = split(v)
                    .map(|s| s.parse::<Topology>().map_err(|e| err(e.to_string())))
                    .collect::<Result<_, _>>()?
            }
            "order" => self.order = parse_num(v).map_err(err)?,
            "horizon" => self.horizon = parse_num(v).map_err(err)?,
            "mu" => self.mu = parse_num(v).map_err(err)?,
            "dt" => {
                self.dt = if v.is_empty() || v == "none" {
                    None
                } else {
                    Some(parse_num(v).map_err(err)?)
                }
            }
            "T" => self.t_end = parse_num(v).map_err(err)?,
            "solution" => self.solution = v.parse().map_err(err)?,
            "snapshots" => self.snapshots = parse_list(v).map_err(err)?,
            "tau_cap" => self.tau_cap = parse_num(v).map_err(err)?,
            "tau_lower" => self.tau_lower = parse_num(v).map_err(err)?,
            "resolution" => self.resolution = parse_num(v).map_err(err)?,
            "blowup_factor" => self.blowup_factor = parse_num(v).map_err(err)?,
            "out" => self.out = PathBuf::from(v),
            "workers" => self.workers = parse_num(v).map_err(err)?,
            "seed" => self.seed = parse_num(v).map_err(err)?,
            "command" => {
                let c: Command = v.parse()?;
                if c != self.command {
                    return Err(err(format!(
                        "file is for '{}' but the subcommand is '{}'",
                        c.as_str(),
                        self.command.as_str()
                    )));
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies a flat `key = value` document; `#` starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            if !Self::KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            self.set(key, value).map_err(|e| match e {
                ConfigError::Value { key, message } => ConfigError::Syntax {
                    line,
                    message: format!("invalid value for '{key}': {message}"),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Defaults for `command`, then `file`, then `overrides` (in order).
    pub fn parse(
        command: Command,
        file: Option<&std::path::Path>,
        overrides: &[(&str, String)],
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults(command);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            cfg.apply_str(&text)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| {
            Err(ConfigError::Value {
                key: key.into(),
                message,
            })
        };
        for (key, v) in [
            ("a", self.a),
            ("c", self.c),
            ("horizon", self.horizon),
            ("mu", self.mu),
            ("tau_cap", self.tau_cap),
            ("tau_lower", self.tau_lower),
            ("resolution", self.resolution),
            ("blowup_factor", self.blowup_factor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(key, format!("must be positive and finite, got {v}"));
            }
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("T", format!("must be non-negative, got {}", self.t_end));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad("dt", format!("must be positive, got {dt}"));
            }
        }
        if self.tau_lower >= self.tau_cap {
            return bad("tau_lower", "must be below tau_cap".into());
        }
        let in_range = |t: f64| (-0.5..=0.5).contains(&t);
        if let Some(t) = self.thetas.iter().find(|t| !in_range(**t)) {
            return bad("theta", format!("{t} outside [-1/2, 1/2]"));
        }
        for &(ta, td) in &self.pairs {
            if !in_range(ta) {
                return bad("theta_adv", format!("{ta} outside [-1/2, 1/2]"));
            }
            if !in_range(td) {
                return bad("theta_diff", format!("{td} outside [-1/2, 1/2]"));
            }
        }
        if let Some(n) = self.degrees.iter().find(|n| **n == 0 || **n > MAX_DEGREE) {
            return bad("N", format!("{n} outside 1..={MAX_DEGREE}"));
        }
        if let Some(k) = self.cells.iter().find(|k| **k < 2) {
            return bad("K", format!("{k} cells; at least 2 required"));
        }
        if !(1..=3).contains(&self.order) {
            return bad("order", format!("{} (expected 1, 2 or 3)", self.order));
        }
        for (key, empty) in [
            ("N", self.degrees.is_empty()),
            ("K", self.cells.is_empty()),
            ("pairs", self.pairs.is_empty()),
            ("topology", self.topologies.is_empty()),
        ] {
            if empty {
                return bad(key, "list must not be empty".into());
            }
        }
        Ok(())
    }

    /// Serializes every key; [`RunConfig::apply_str`] reads it back.
    pub fn to_config_string(&self) -> String {
        let list = |v: &[String]| v.join(",");
        let nums = |v: &[f64]| list(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        let ints = |v: &[usize]| list(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        let pairs = list(
            &self
                .pairs
                .iter()
                .map(|(a, d)| format!("{a}:{d}"))
                .collect::<Vec<_>>(),
        );
        let topologies = list(
            &self
                .topologies
                .iter()
                .map(|t| t.as_str().to_string())
                .collect::<Vec<_>>(),
        );
        let dt = self
            .dt
            .map_or_else(|| "none".to_string(), |d| d.to_string());
        format!(
            "command = {}\na = {}\nc = {}\nN = {}\nK = {}\ntheta = {}\npairs = {}\ntopology = {}\n\
             order = {}\nhorizon = {}\nmu = {}\ndt = {}\nT = {}\nsolution = {}\nsnapshots = {}\n\
             tau_cap = {}\ntau_lower = {}\nresolution = {}\nblowup_factor = {}\nout = {}\n\
             workers = {}\nseed = {}\n",
            self.command.as_str(),
            self.a,
            self.c,
            ints(&self.degrees),
            ints(&self.cells),
            nums(&self.thetas),
            pairs,
            topologies,
            self.order,
            self.horizon,
            self.mu,
            dt,
            self.t_end,
            self.solution.as_str(),
            nums(&self.snapshots),
            self.tau_cap,
            self.tau_lower,
            self.resolution,
            self.blowup_factor,
            self.out.display(),
            self.workers,
            self.seed,
        )
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_config_string())
    }
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("'{v}': {e}"))
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    split(v).map(parse_num).collect()
}

/// `ta:td, ta:td, ...`
fn parse_pairs(v: &str) -> Result<Vec<(f64, f64)>, String> {
    split(v)
        .map(|p| {
            let (a, d) = p
                .split_once(':')
                .ok_or_else(|| format!("'{p}': expected theta_adv:theta_diff"))?;
            Ok((parse_num(a.trim())?, parse_num(d.trim())?))
        })
        .collect()
}
