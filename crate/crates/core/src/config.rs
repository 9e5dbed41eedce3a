//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! Every key has a default; unknown and duplicated keys are rejected.
//! Command-line overrides use the same `key=value` syntax and win over the
//! file. The effective value of every key, in the fixed order of [`KEYS`],
//! forms the configuration echo embedded in each report.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use crate::bmo::Calibration;
use crate::error::{Error, Result};
use crate::report::Format;

/// `(key, default, meaning)` for every accepted key, in echo order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("dim", "2", "ambient dimension D, 1..=16"),
    ("map", "slow-twist", "identity | rotation | slow-twist"),
    (
        "profile",
        "arctan",
        "slow-twist angle profile: arctan | log",
    ),
    ("eps", "0.1", "nominal distortion ε in [0, 0.5]"),
    (
        "clamp_t0",
        "0.1",
        "radius below which the log profile is smoothed",
    ),
    (
        "blocks",
        "uniform",
        "uniform, or a list of r (2x2 rotation) / i (1x1 identity)",
    ),
    (
        "theta_seed",
        "none",
        "seed of the random frame Θ; none means Θ = I",
    ),
    (
        "rotation_seed",
        "0",
        "seed of the random rotation of map = rotation",
    ),
    (
        "translation",
        "none",
        "translation applied after the map; none means 0",
    ),
    ("center", "origin", "ball center"),
    ("radius", "1", "ball radius"),
    ("n_samples", "100000", "Monte Carlo points per ball"),
    ("seed", "0", "master seed"),
    ("lambdas", "1,1.5,2,3,4", "tail λ values, sorted, each ≥ 1"),
    (
        "eps_grid",
        "0.001,0.003,0.01,0.03,0.1",
        "ε values of sweeps, sorted, positive",
    ),
    (
        "calibration_c",
        "auto",
        "tail constant C: auto (fit at λ = 1) or a positive number",
    ),
    ("format", "json", "report format: csv | json"),
    (
        "output",
        "none",
        "report path; none prints to standard output",
    ),
    ("grid_points", "65", "grid points per axis"),
    ("half_width", "5", "grid covers [-L, L]^D, L ≥ 4"),
    (
        "field_file",
        "none",
        "grid field to load instead of a generated one",
    ),
    (
        "field_seed",
        "0",
        "seed of the generated trigonometric field",
    ),
    (
        "field_degree",
        "3",
        "largest integer frequency of the generated field",
    ),
    (
        "base_frequency",
        "0.6283185307179586",
        "frequency unit of the generated field",
    ),
    (
        "pde_constant_limit",
        "none",
        "fail when residual/hypothesis exceeds this",
    ),
    ("align_source", "none", "source point CSV"),
    ("align_target", "none", "target point CSV"),
    ("require_proper", "false", "demand a rotation (det = +1)"),
    (
        "max_rel_err_limit",
        "none",
        "fail when the alignment max_rel_err exceeds this",
    ),
    ("k", "5", "points per configuration in the δ sweep"),
    (
        "delta_grid",
        "0.001,0.002,0.005,0.01,0.02,0.03,0.05,0.07,0.1,0.15",
        "δ values of the alignment sweep",
    ),
    ("trials", "100", "configurations per δ"),
    (
        "spearman_min",
        "0.9",
        "smallest accepted Spearman correlation of the δ sweep",
    ),
    (
        "slope_tolerance",
        "0.15",
        "accepted deviation of fitted slopes",
    ),
    (
        "ratio_spread_limit",
        "2",
        "largest accepted max/min of mean_dev/ε over a sweep",
    ),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Identity,
    Rotation,
    SlowTwist,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::Identity => "identity",
            MapKind::Rotation => "rotation",
            MapKind::SlowTwist => "slow-twist",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileKind {
    Arctan,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Rotation,
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub map: MapKind,
    pub profile: ProfileKind,
    pub eps: f64,
    pub clamp_t0: f64,
    /// `None` for the uniform layout.
    pub blocks: Option<Vec<BlockKind>>,
    pub theta_seed: Option<u64>,
    pub rotation_seed: u64,
    pub translation: Option<Vec<f64>>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub calibration: Calibration,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub grid_points: usize,
    pub half_width: f64,
    pub field_file: Option<PathBuf>,
    pub field_seed: u64,
    pub field_degree: i32,
    pub base_frequency: f64,
    pub pde_constant_limit: Option<f64>,
    pub align_source: Option<PathBuf>,
    pub align_target: Option<PathBuf>,
    pub require_proper: bool,
    pub max_rel_err_limit: Option<f64>,
    pub k: usize,
    pub delta_grid: Vec<f64>,
    pub trials: usize,
    pub spearman_min: f64,
    pub slope_tolerance: f64,
    pub ratio_spread_limit: f64,
    echo: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug)]
enum Origin {
    Default,
    Line(usize),
    Override,
}

/// Raw settings before typing.
#[derive(Clone, Debug, Default)]
pub struct ConfigBuilder {
    values: HashMap<&'static str, (String, Origin)>,
}

fn canonical_key(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(k, _, _)| *k)
}

fn split_setting(text: &str) -> Option<(&str, &str)> {
    let (k, v) = text.split_once('=')?;
    Some((k.trim(), v.trim()))
}

impl ConfigBuilder {
    pub fn new() -> Self {
        ConfigBuilder::default()
    }

    /// Reads a configuration file body.
    pub fn parse_file(text: &str) -> Result<Self> {
        let mut b = ConfigBuilder::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = split_setting(content).ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = canonical_key(key).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            })?;
            if let Some((_, Origin::Line(first))) = b.values.get(key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            b.values
                .insert(key, (value.to_string(), Origin::Line(line)));
        }
        Ok(b)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, setting: &str) -> Result<()> {
        let (key, value) = split_setting(setting).ok_or_else(|| {
            Error::InvalidInput(format!("override {setting:?}: expected key=value"))
        })?;
        let key = canonical_key(key).ok_or_else(|| {
            Error::InvalidInput(format!("override {setting:?}: unknown key `{key}`"))
        })?;
        self.values
            .insert(key, (value.to_string(), Origin::Override));
        Ok(())
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        Fields { b: self }.build()
    }
}

/// Typed access to the raw settings with located diagnostics.
struct Fields<'a> {
    b: &'a ConfigBuilder,
}

impl Fields<'_> {
    fn raw(&self, key: &'static str) -> (&str, Origin) {
        match self.b.values.get(key) {
            Some((v, o)) => (v.as_str(), *o),
            None => {
                let default = KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d);
                (default.expect("key is listed"), Origin::Default)
            }
        }
    }

    fn error(&self, key: &'static str, message: String) -> Error {
        let (value, origin) = self.raw(key);
        let message = format!("field `{key}` = {value:?}: {message}");
        match origin {
            Origin::Line(line) => Error::Parse { line, message },
            Origin::Override => Error::InvalidInput(format!("override {message}")),
            Origin::Default => Error::InvalidInput(format!("default {message}")),
        }
    }

    fn optional(&self, key: &'static str) -> Option<&str> {
        let (v, _) = self.raw(key);
        (v != "none").then_some(v)
    }

    fn parse<T: std::str::FromStr>(&self, key: &'static str, text: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        text.parse::<T>()
            .map_err(|e| self.error(key, e.to_string()))
    }

    fn float(&self, key: &'static str) -> Result<f64> {
        let v: f64 = self.parse(key, self.raw(key).0)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(key, "must be finite".into()))
        }
    }

    fn float_in(&self, key: &'static str, lo: f64, hi: f64) -> Result<f64> {
        let v = self.float(key)?;
        if (lo..=hi).contains(&v) {
            Ok(v)
        } else {
            Err(self.error(key, format!("must lie in [{lo}, {hi}]")))
        }
    }

    fn positive(&self, key: &'static str) -> Result<f64> {
        let v = self.float(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.error(key, "must be positive".into()))
        }
    }

    fn optional_positive(&self, key: &'static str) -> Result<Option<f64>> {
        match self.optional(key) {
            None => Ok(None),
            Some(_) => self.positive(key).map(Some),
        }
    }

    fn uint_in(&self, key: &'static str, lo: usize, hi: usize) -> Result<usize> {
        let v: usize = self.parse(key, self.raw(key).0)?;
        if (lo..=hi).contains(&v) {
            Ok(v)
        } else {
            Err(self.error(key, format!("must lie in {lo}..={hi}")))
        }
    }

    fn seed(&self, key: &'static str) -> Result<u64> {
        self.parse(key, self.raw(key).0)
    }

    fn list(&self, key: &'static str) -> Result<Vec<f64>> {
        let text = self.raw(key).0;
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let values = text
            .split(',')
            .map(|t| self.parse::<f64>(key, t.trim()))
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(self.error(key, "entries must be finite".into()));
        }
        Ok(values)
    }

    fn sorted_list(&self, key: &'static str, min: f64, min_len: usize) -> Result<Vec<f64>> {
        let values = self.list(key)?;
        if values.len() < min_len {
            return Err(self.error(key, format!("needs at least {min_len} entries")));
        }
        if values.iter().any(|v| *v < min) {
            return Err(self.error(key, format!("entries must be at least {min}")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(self.error(key, "entries must be strictly increasing".into()));
        }
        Ok(values)
    }

    fn vector(&self, key: &'static str, dim: usize) -> Result<Vec<f64>> {
        let v = self.list(key)?;
        if v.len() == dim {
            Ok(v)
        } else {
            Err(self.error(key, format!("expected {dim} coordinates, got {}", v.len())))
        }
    }

    fn path(&self, key: &'static str) -> Option<PathBuf> {
        self.optional(key).map(PathBuf::from)
    }

    fn build(&self) -> Result<ExperimentConfig> {
        let dim = self.uint_in("dim", 1, 16)?;
        let map = match self.raw("map").0 {
            "identity" => MapKind::Identity,
            "rotation" => MapKind::Rotation,
            "slow-twist" => MapKind::SlowTwist,
            _ => return Err(self.error("map", "expected identity | rotation | slow-twist".into())),
        };
        let profile = match self.raw("profile").0 {
            "arctan" => ProfileKind::Arctan,
            "log" => ProfileKind::Log,
            _ => return Err(self.error("profile", "expected arctan | log".into())),
        };
        let blocks = match self.raw("blocks").0 {
            "uniform" => None,
            text => {
                let kinds = text
                    .split(',')
                    .map(|t| match t.trim() {
                        "r" => Ok(BlockKind::Rotation),
                        "i" => Ok(BlockKind::Identity),
                        other => Err(self.error(
                            "blocks",
                            format!("unknown block {other:?}, expected r or i"),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let size: usize = kinds
                    .iter()
                    .map(|k| if *k == BlockKind::Rotation { 2 } else { 1 })
                    .sum();
                if size != dim {
                    return Err(self.error(
                        "blocks",
                        format!("blocks cover dimension {size}, expected {dim}"),
                    ));
                }
                Some(kinds)
            }
        };
        if map == MapKind::SlowTwist && dim < 2 && blocks.is_none() {
            return Err(self.error("dim", "a uniform slow twist needs D ≥ 2".into()));
        }
        let center = match self.raw("center").0 {
            "origin" => vec![0.0; dim],
            _ => self.vector("center", dim)?,
        };
        let calibration = match self.raw("calibration_c").0 {
            "auto" => Calibration::AtLambdaOne,
            _ => Calibration::Fixed(self.positive("calibration_c")?),
        };
        let format = Format::parse(self.raw("format").0)
            .ok_or_else(|| self.error("format", "expected csv | json".into()))?;
        let field_degree = self.uint_in("field_degree", 1, 8)? as i32;
        let half_width = self.float("half_width")?;
        if half_width < crate::pde::MIN_HALF_WIDTH {
            return Err(self.error(
                "half_width",
                format!("must be at least {}", crate::pde::MIN_HALF_WIDTH),
            ));
        }
        let config = ExperimentConfig {
            dim,
            map,
            profile,
            eps: self.float_in("eps", 0.0, 0.5)?,
            clamp_t0: self.positive("clamp_t0")?,
            blocks,
            theta_seed: self
                .optional("theta_seed")
                .map(|_| self.seed("theta_seed"))
                .transpose()?,
            rotation_seed: self.seed("rotation_seed")?,
            translation: self
                .optional("translation")
                .map(|_| self.vector("translation", dim))
                .transpose()?,
            center,
            radius: self.positive("radius")?,
            n_samples: self.uint_in("n_samples", 1, 100_000_000)?,
            seed: self.seed("seed")?,
            lambdas: self.sorted_list("lambdas", 1.0, 1)?,
            eps_grid: {
                let g = self.sorted_list("eps_grid", 0.0, 2)?;
                if g[0] <= 0.0 || g[g.len() - 1] > 0.5 {
                    return Err(self.error("eps_grid", "entries must lie in (0, 0.5]".into()));
                }
                g
            },
            calibration,
            format,
            output: self.path("output"),
            grid_points: self.uint_in("grid_points", crate::pde::MIN_POINTS, 4097)?,
            half_width,
            field_file: self.path("field_file"),
            field_seed: self.seed("field_seed")?,
            field_degree,
            base_frequency: self.positive("base_frequency")?,
            pde_constant_limit: self.optional_positive("pde_constant_limit")?,
            align_source: self.path("align_source"),
            align_target: self.path("align_target"),
            require_proper: self.parse("require_proper", self.raw("require_proper").0)?,
            max_rel_err_limit: self.optional_positive("max_rel_err_limit")?,
            k: self.uint_in("k", 2, 10_000)?,
            delta_grid: self.sorted_list("delta_grid", 0.0, 2)?,
            trials: self.uint_in("trials", 1, 1_000_000)?,
            spearman_min: self.float_in("spearman_min", -1.0, 1.0)?,
            slope_tolerance: self.positive("slope_tolerance")?,
            ratio_spread_limit: self.float("ratio_spread_limit")?,
            echo: KEYS
                .iter()
                .map(|(k, _, _)| (k.to_string(), self.raw(k).0.to_string()))
                .collect(),
        };
        if config.align_source.is_some() != config.align_target.is_some() {
            let key = if config.align_source.is_some() {
                "align_target"
            } else {
                "align_source"
            };
            return Err(self.error(
                key,
                "align_source and align_target must be given together".into(),
            ));
        }
        if config.ratio_spread_limit < 1.0 {
            return Err(self.error("ratio_spread_limit", "must be at least 1".into()));
        }
        Ok(config)
    }
}

impl ExperimentConfig {
    /// Parses a file body, then applies overrides in order.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self> {
        let mut b = ConfigBuilder::parse_file(text)?;
        for o in overrides {
            b.set(o)?;
        }
        b.build()
    }

    /// Effective value of every key, in [`KEYS`] order.
    pub fn echo(&self) -> &[(String, String)] {
        &self.echo
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigBuilder::new().build().expect("defaults are valid")
    }
}
