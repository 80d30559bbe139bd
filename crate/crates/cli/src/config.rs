//! Run configuration: a JSON file overlaid with command-line flags.
//!
//! The resolved configuration, with every default filled in, is echoed into
//! each output so a run can be repeated from its own artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use polymerlab::harness::Schedule;
use polymerlab::montecarlo::Method;
use polymerlab::ratefn::Side;
use polymerlab::stepdist::DistSpec;
use polymerlab::Model;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    /// Exact enumeration of the constrained partition function.
    Finite,
    /// Grid Legendre transform of the exact tilted free energy.
    Legendre,
    /// PERM estimate of the constrained partition function.
    Mc,
}

/// Every knob of every subcommand. Unset fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(rename = "L")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pmf: Option<BTreeMap<String, f64>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(with = "maybe_inf")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(rename = "strip_L")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strip_l: Option<u32>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tours: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_high: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_method: Option<RateMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mus: Option<Vec<f64>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub piece_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confinement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoupled: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ls: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_invalid_schedule: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaf_budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Step distribution: simple, uniform_range, geometric_tail.
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Range parameter of the step distribution.
    #[arg(long = "L", global = true)]
    pub l: Option<u32>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Repulsion strength; `inf` selects the self-avoiding walk.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Self-attraction strength (requires 0 <= gamma < beta).
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Exponential tilt.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Half-width of the vertical strip {-L..L}.
    #[arg(long = "strip-L", global = true)]
    pub strip_l: Option<u32>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true)]
    pub tours: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; POLYMERLAB_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run coupled or attraction schedules outside their valid range.
    #[arg(long, global = true)]
    pub allow_invalid_schedule: bool,
}

/// JSON has no infinity, so `β = ∞` travels as the string `"inf"`.
mod maybe_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() && *x > 0.0 => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn overlay(&mut self, f: &Flags) {
        set(&mut self.family, f.family.clone());
        set(&mut self.l, f.l);
        set(&mut self.n, f.n);
        set(&mut self.beta, f.beta);
        set(&mut self.gamma, f.gamma);
        set(&mut self.mu, f.mu);
        set(&mut self.strip_l, f.strip_l);
        set(&mut self.samples, f.samples);
        set(&mut self.tours, f.tours);
        set(&mut self.replicas, f.replicas);
        set(&mut self.seed, f.seed);
        set(&mut self.out, f.out.clone());
        set(&mut self.format, f.format);
        set(&mut self.threads, f.threads);
        if f.allow_invalid_schedule {
            self.allow_invalid_schedule = Some(true);
        }
    }

    pub fn dist_spec(&mut self) -> Result<DistSpec, CliError> {
        let family = self.family.get_or_insert_with(|| "simple".into()).clone();
        let need_l = |l: Option<u32>| l.ok_or_else(|| CliError::Config(format!("family {family} needs --L")));
        let spec = match family.as_str() {
            "simple" => DistSpec::Simple,
            "uniform_range" => DistSpec::UniformRange { l: need_l(self.l)? },
            "geometric_tail" => DistSpec::GeometricTail { l: need_l(self.l)? },
            "custom" => DistSpec::Custom {
                pmf: self
                    .pmf
                    .clone()
                    .ok_or_else(|| CliError::Config("family custom needs a pmf in the config file".into()))?,
            },
            other => return Err(CliError::Config(format!("unknown family {other:?}"))),
        };
        Ok(spec)
    }

    /// Strip if `strip_L` is set, attraction if `gamma` is set, the
    /// self-avoiding walk for `beta = inf`, Domb-Joyce otherwise.
    pub fn model(&mut self) -> Result<Model, CliError> {
        let model = if let Some(width) = self.strip_l {
            Model::Strip { width }
        } else {
            let beta = *self.beta.get_or_insert(0.0);
            match self.gamma {
                Some(gamma) => Model::Attraction { beta, gamma },
                None if beta.is_infinite() => Model::Saw,
                None => Model::DombJoyce { beta },
            }
        };
        model.validate().map_err(CliError::Core)?;
        Ok(model)
    }

    pub fn need_n(&self) -> Result<usize, CliError> {
        match self.n {
            Some(n) if n >= 1 => Ok(n),
            Some(_) => Err(CliError::Config("--n must be >= 1".into())),
            None => Err(CliError::Config("--n is required".into())),
        }
    }
}
