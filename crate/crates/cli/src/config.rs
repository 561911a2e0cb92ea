//! Run configuration: the JSON schema read from `--config`, flag overrides, and the
//! resolved form written next to every result.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use nilwalk::exact::parse_rational;
use nilwalk::group::{GroupSpec, GroupSpecJson, IntLit};
use nilwalk::walker::DEFAULT_CUTOFF;
use nilwalk::weights::{weights_from_alpha, Alpha, WeightSystem, WeightVec};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    Simulate,
    Norm,
    Volume,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Norm => "norm",
            Command::Volume => "volume",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpecJson>,
    /// Tail indices, one per generator. Drives weights `1/min(α, 2)` and the step law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Alpha>>,
    /// Explicit per-generator weights, each a rational string or a vector of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightLit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Simulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormQuery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeQuery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleQuery>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<u64>,
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightLit {
    Scalar(String),
    Vector(Vec<String>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    #[serde(default)]
    pub law: LawChoice,
    pub horizons: Horizons,
    pub samples: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: u64,
    /// Allowed gap between the fitted slope and the predicted one.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_memory")]
    pub memory_budget: usize,
}

fn default_cutoff() -> u64 {
    DEFAULT_CUTOFF
}

fn default_tolerance() -> f64 {
    0.15
}

fn default_memory() -> usize {
    1 << 30
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawChoice {
    /// `μ_{S,a}`: a uniform generator, then a symmetric power-law exponent.
    #[default]
    Stable,
    /// `f(|x|_1)` on `Z^d` with `f(r) ∝ (1+r)^{-γ} / V(r)`.
    Radial { gamma: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizons {
    List(Vec<u64>),
    Geometric { from: u64, to: u64 },
}

impl Horizons {
    pub fn values(&self) -> Result<Vec<u64>, Failure> {
        let v: Vec<u64> = match self {
            Horizons::List(v) => v.clone(),
            Horizons::Geometric { from, to } => {
                if *from == 0 {
                    return Err(Failure::schema("geometric horizons must start above 0"));
                }
                std::iter::successors(Some(*from), |n| n.checked_mul(2)).take_while(|n| n <= to).collect()
            }
        };
        if v.is_empty() {
            return Err(Failure::schema("empty horizon grid"));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormQuery {
    pub element: ElementLit,
    /// Optional exponents `n` for the growth check `r(g^n)` against `F^{-1}(n)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub powers: Vec<u64>,
}

/// A group element: a word `[[generator, exponent], ...]` with 1-based generators, or the
/// backend's own coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementLit {
    Word(Vec<(usize, IntLit)>),
    Vector(Vec<IntLit>),
    Matrix(Vec<Vec<IntLit>>),
    Hall(Vec<IntLit>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeQuery {
    pub radii: Vec<f64>,
    /// Largest box enumerated by the box-count oracle.
    #[serde(default = "default_box_budget")]
    pub budget: u64,
    /// Also count word-metric balls up to this radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_radius: Option<u32>,
}

fn default_box_budget() -> u64 {
    10_000_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleQuery {
    /// Exact `n`-step law on `Z^d` for `μ_{S,a}` truncated at `|m| <= truncation`.
    Convolution {
        n: usize,
        #[serde(default = "default_truncation")]
        truncation: u64,
        #[serde(default = "default_entries")]
        max_entries: usize,
    },
    /// Basic commutators per length in `N(k, class)`.
    Witt { k: usize, class: usize },
    BoxCount {
        radius: f64,
        #[serde(default = "default_box_budget")]
        budget: u64,
    },
    /// Smith invariants of an integer matrix, by default the `Z^d` generator rows.
    Smith {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<IntLit>>>,
    },
}

fn default_truncation() -> u64 {
    1024
}

fn default_entries() -> usize {
    1 << 22
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub budget_seconds: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::schema(format!("config: {e}")))
    }

    /// Applies the subcommand and flag overrides and checks the sections the command needs.
    pub fn resolve(mut self, command: Command, o: &Overrides) -> Result<RunConfig, Failure> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Failure::schema(format!("config is for `{}`, not `{}`", c.name(), command.name())));
            }
        }
        self.command = Some(command);
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if o.budget_seconds.is_some() {
            self.budget_seconds = o.budget_seconds;
        }
        if self.workers == 0 {
            return Err(Failure::schema("workers must be at least 1"));
        }
        if self.alpha.is_some() && self.weights.is_some() {
            return Err(Failure::schema("give either alpha or weights, not both"));
        }
        let need_group = !matches!(self.oracle, Some(OracleQuery::Witt { .. } | OracleQuery::Smith { matrix: Some(_) }))
            || command != Command::Oracle;
        if need_group && self.group.is_none() {
            return Err(Failure::schema("missing field `group`"));
        }
        match command {
            Command::Analyze | Command::Norm | Command::Volume => {
                if self.alpha.is_none() && self.weights.is_none() {
                    return Err(Failure::schema("missing field `alpha` or `weights`"));
                }
            }
            Command::Simulate => {
                let Some(sim) = &self.simulation else {
                    return Err(Failure::schema("missing field `simulation`"));
                };
                match sim.law {
                    LawChoice::Stable if self.alpha.is_none() => {
                        return Err(Failure::schema("the stable law needs `alpha`"));
                    }
                    LawChoice::Radial { .. } if self.alpha.is_some() || self.weights.is_some() => {
                        return Err(Failure::schema("the radial law takes `gamma` only, not alpha or weights"));
                    }
                    _ => {}
                }
                if sim.samples < 2 {
                    return Err(Failure::schema("simulation needs at least 2 samples"));
                }
                sim.horizons.values()?;
            }
            Command::Oracle => {
                let Some(q) = &self.oracle else {
                    return Err(Failure::schema("missing field `oracle`"));
                };
                match q {
                    OracleQuery::Convolution { .. } if self.alpha.is_none() => {
                        return Err(Failure::schema("the convolution oracle needs `alpha`"));
                    }
                    OracleQuery::BoxCount { .. } if self.alpha.is_none() && self.weights.is_none() => {
                        return Err(Failure::schema("the box-count oracle needs `alpha` or `weights`"));
                    }
                    _ => {}
                }
            }
        }
        if command == Command::Norm && self.norm.is_none() {
            return Err(Failure::schema("missing field `norm`"));
        }
        if command == Command::Volume && self.volume.is_none() {
            return Err(Failure::schema("missing field `volume`"));
        }
        Ok(self)
    }

    pub fn group_spec(&self) -> Result<GroupSpec, Failure> {
        let g = self.group.as_ref().ok_or_else(|| Failure::schema("missing field `group`"))?;
        Ok(g.build()?)
    }

    /// The weight system: explicit weights, or `1/min(α, 2)`.
    pub fn weight_system(&self) -> Result<WeightSystem, Failure> {
        if let Some(ws) = &self.weights {
            let vecs = ws
                .iter()
                .map(|w| {
                    let coords = match w {
                        WeightLit::Scalar(s) => vec![parse_rational(s)?],
                        WeightLit::Vector(v) => v.iter().map(|s| parse_rational(s)).collect::<Result<_, _>>()?,
                    };
                    WeightVec::new(coords)
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(WeightSystem::new(vecs)?);
        }
        let a = self.alpha.as_ref().ok_or_else(|| Failure::schema("missing field `alpha` or `weights`"))?;
        Ok(weights_from_alpha(a)?.power)
    }

    pub fn check_arity(&self, spec: &GroupSpec) -> Result<(), Failure> {
        let k = spec.num_generators();
        let given = match (&self.alpha, &self.weights) {
            (Some(a), _) => a.len(),
            (_, Some(w)) => w.len(),
            _ => return Ok(()),
        };
        if given != k {
            return Err(Failure::schema(format!("{given} alpha/weight entries for {k} generators")));
        }
        Ok(())
    }
}
