//! Sweep configuration: a TOML file with `[grid]`, `[run]` and `[output]`
//! sections, overridden key by key by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use polaron_core::{EvalMode, FChoice};
use serde::Deserialize;

use crate::error::CliError;

/// Values given either as a list (`0.5,1,2`) or as an inclusive linear range
/// `start:stop:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl Grid {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        if count == 1 {
            return Grid(vec![start]);
        }
        let step = (stop - start) / (count - 1) as f64;
        Grid((0..count).map(|i| if i + 1 == count { stop } else { start + step * i as f64 }).collect())
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("range '{s}' must be start:stop:count"));
            }
            let start: f64 = parts[0].trim().parse().map_err(|e| format!("range start in '{s}': {e}"))?;
            let stop: f64 = parts[1].trim().parse().map_err(|e| format!("range stop in '{s}': {e}"))?;
            let count: usize = parts[2].trim().parse().map_err(|e| format!("range count in '{s}': {e}"))?;
            if count == 0 {
                return Err(format!("range '{s}' has no points"));
            }
            return Ok(Grid::linspace(start, stop, count));
        }
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("grid value '{x}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Grid)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&items.join(","))
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GridSpec {
    List(Vec<f64>),
    Single(f64),
    Text(String),
}

impl GridSpec {
    fn into_grid(self, key: &str) -> Result<Grid, CliError> {
        match self {
            GridSpec::List(v) => Ok(Grid(v)),
            GridSpec::Single(x) => Ok(Grid(vec![x])),
            GridSpec::Text(s) => s.parse().map_err(|e| CliError::Config(format!("grid.{key}: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv|json)")),
        }
    }
}

/// Material constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub deformation_potential: f64,
    pub density: f64,
    pub sound_velocity: f64,
    pub band_mass: f64,
}

impl FromStr for Material {
    type Err = String;
    /// `D,rho,s,m`, e.g. `1.6e-18,2330,9000,9.1e-31`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("material value '{x}': {e}")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [d, rho, sv, m] => Ok(Material { deformation_potential: d, density: rho, sound_velocity: sv, band_mass: m }),
            _ => Err(format!("material needs four values D,rho,s,m; got {}", v.len())),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileGrid {
    alpha: Option<GridSpec>,
    k0: Option<GridSpec>,
    momentum: Option<GridSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRun {
    orders: Option<usize>,
    moment_cap: Option<usize>,
    mode: Option<String>,
    workers: Option<usize>,
    seed: Option<u64>,
    models: Option<usize>,
    choice: Option<String>,
    material: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    path: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    grid: FileGrid,
    #[serde(default)]
    run: FileRun,
    #[serde(default)]
    output: FileOutput,
}

/// Command-line values; every `Some` wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<Grid>,
    pub k0: Option<Grid>,
    pub momentum: Option<Grid>,
    pub orders: Option<usize>,
    pub moment_cap: Option<usize>,
    pub mode: Option<EvalMode>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub models: Option<usize>,
    pub choice: Option<FChoice>,
    pub material: Option<Material>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub alpha: Grid,
    pub k0: Grid,
    pub momentum: Grid,
    /// Highest variational order.
    pub orders: usize,
    /// Highest moment the engine may compute.
    pub moment_cap: usize,
    pub mode: EvalMode,
    pub workers: Option<usize>,
    pub seed: u64,
    pub models: usize,
    pub choice: FChoice,
    pub material: Option<Material>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alpha: Grid(vec![1.0]),
            k0: Grid(vec![1.0]),
            momentum: Grid(vec![0.0]),
            orders: 3,
            moment_cap: 5,
            mode: EvalMode::Float,
            workers: None,
            seed: DEFAULT_SEED,
            models: 20,
            choice: FChoice::OptimalRest,
            material: None,
            output: None,
            format: Format::Csv,
        }
    }
}

fn parse_in<T: FromStr<Err = String>>(key: &str, s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: String| CliError::Config(format!("{key}: {e}")))
}

impl SweepConfig {
    /// Reads `path` (if any), applies the overrides and validates.
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse_file(&text)?
            }
            None => ConfigFile::default(),
        };
        let mut c = SweepConfig::default();
        let g = file.grid;
        if let Some(v) = g.alpha {
            c.alpha = v.into_grid("alpha")?;
        }
        if let Some(v) = g.k0 {
            c.k0 = v.into_grid("k0")?;
        }
        if let Some(v) = g.momentum {
            c.momentum = v.into_grid("momentum")?;
        }
        let r = file.run;
        c.orders = r.orders.unwrap_or(c.orders);
        c.moment_cap = r.moment_cap.unwrap_or(c.moment_cap);
        if let Some(m) = r.mode {
            c.mode = parse_in("run.mode", &m)?;
        }
        c.workers = r.workers.or(c.workers);
        c.seed = r.seed.unwrap_or(c.seed);
        c.models = r.models.unwrap_or(c.models);
        if let Some(s) = r.choice {
            c.choice = parse_in("run.choice", &s)?;
        }
        if let Some(s) = r.material {
            c.material = Some(parse_in("run.material", &s)?);
        }
        c.output = file.output.path;
        if let Some(s) = file.output.format {
            c.format = parse_in("output.format", &s)?;
        }

        let o = overrides;
        c.alpha = o.alpha.unwrap_or(c.alpha);
        c.k0 = o.k0.unwrap_or(c.k0);
        c.momentum = o.momentum.unwrap_or(c.momentum);
        c.orders = o.orders.unwrap_or(c.orders);
        c.moment_cap = o.moment_cap.unwrap_or(c.moment_cap);
        c.mode = o.mode.unwrap_or(c.mode);
        c.workers = o.workers.or(c.workers);
        c.seed = o.seed.unwrap_or(c.seed);
        c.models = o.models.unwrap_or(c.models);
        c.choice = o.choice.unwrap_or(c.choice);
        c.material = o.material.or(c.material);
        c.output = o.output.or(c.output);
        c.format = o.format.unwrap_or(c.format);
        c.validate()?;
        Ok(c)
    }

    fn parse_file(text: &str) -> Result<ConfigFile, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, g: &Grid| -> Result<(), CliError> {
            if g.0.is_empty() {
                return Err(CliError::Config(format!("{name} grid is empty")));
            }
            if let Some(v) = g.0.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(CliError::Config(format!("{name} values must be positive, got {v}")));
            }
            Ok(())
        };
        if self.material.is_none() {
            positive("alpha", &self.alpha)?;
        }
        positive("k0", &self.k0)?;
        if self.momentum.0.is_empty() {
            return Err(CliError::Config("momentum grid is empty".into()));
        }
        if let Some(v) = self.momentum.0.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(CliError::Config(format!("momentum values must be non-negative, got {v}")));
        }
        if self.orders == 0 {
            return Err(CliError::Config("orders must be at least 1".into()));
        }
        if 2 * self.orders - 1 > self.moment_cap {
            return Err(CliError::Config(format!(
                "order {} needs moments up to {} but the moment cap is {}",
                self.orders,
                2 * self.orders - 1,
                self.moment_cap
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// The α grid, or the single material value when `--material` is set.
    pub fn alpha_values(&self) -> Result<Vec<f64>, CliError> {
        match self.material {
            Some(m) => polaron_core::coupling_from_material(m.deformation_potential, m.density, m.sound_velocity, m.band_mass)
                .map(|a| vec![a])
                .map_err(|e| CliError::Config(e.to_string())),
            None => Ok(self.alpha.0.clone()),
        }
    }
}
