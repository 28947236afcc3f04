//! Market parameters, the user population, and config parsing.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All scalar market parameters.
///
/// Benefits, costs and revenues share one monetary unit. `catalog_size` and
/// `num_users` serialize under the config keys `S` and `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Average user benefit per sponsored request.
    pub v: f64,
    /// Per-request user energy cost via cellular.
    pub c1: f64,
    /// Per-request user energy cost via edge.
    pub c2: f64,
    /// Time-average cost of joining cellular sponsoring.
    pub phi1: f64,
    /// Time-average cost of joining edge sponsoring.
    pub phi2: f64,
    /// Average CP revenue gain per sponsored request.
    pub u: f64,
    /// CP's per-request cost of cellular sponsoring.
    pub h1: f64,
    /// CP's per-content-per-period edge caching cost.
    pub h2: f64,
    /// Content catalog size.
    #[serde(rename = "S")]
    pub catalog_size: u64,
    /// Zipf popularity exponent.
    pub gamma: f64,
    /// Number of users.
    #[serde(rename = "U")]
    pub num_users: u64,
    /// Lower budget bound, shared by both budgets.
    pub alpha_min: f64,
    /// Upper budget bound, shared by both budgets.
    pub alpha_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            v: 3.0,
            c1: 1.5,
            c2: 1.0,
            phi1: 0.1,
            phi2: 0.1,
            u: 3.0,
            h1: 1.5,
            h2: 2.0,
            catalog_size: 1000,
            gamma: 0.8,
            num_users: 10_000,
            alpha_min: 0.0,
            alpha_max: 10_000.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative: [(&'static str, f64); 8] = [
            ("v", self.v),
            ("c1", self.c1),
            ("c2", self.c2),
            ("phi1", self.phi1),
            ("phi2", self.phi2),
            ("u", self.u),
            ("h1", self.h1),
            ("h2", self.h2),
        ];
        for (field, value) in non_negative {
            if !(value >= 0.0) {
                return Err(Error::InvalidField { field, value });
            }
        }
        if self.catalog_size < 1 {
            return Err(Error::InvalidField {
                field: "S",
                value: self.catalog_size as f64,
            });
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidField {
                field: "gamma",
                value: self.gamma,
            });
        }
        if self.num_users < 1 {
            return Err(Error::InvalidField {
                field: "U",
                value: self.num_users as f64,
            });
        }
        if !(self.alpha_min >= 0.0) {
            return Err(Error::InvalidField {
                field: "alpha_min",
                value: self.alpha_min,
            });
        }
        if !(self.alpha_min <= self.alpha_max) {
            return Err(Error::InvalidField {
                field: "alpha_max",
                value: self.alpha_max,
            });
        }
        Ok(())
    }
}

/// A user's type: request probability `f` and edge-coverage probability `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserType {
    pub f: f64,
    pub r: f64,
}

impl UserType {
    pub fn new(f: f64, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::OutOfRange {
                what: "f",
                value: f,
                min: 0.0,
                max: 1.0,
            });
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::OutOfRange {
                what: "r",
                value: r,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(Self { f, r })
    }
}

/// The ordered user population plus the seed it was sampled from.
///
/// Immutable after construction; `seed` is 0 for explicitly supplied
/// populations.
#[derive(Debug, Clone)]
pub struct Population {
    users: Vec<UserType>,
    seed: u64,
}

impl Population {
    /// Sample `params.num_users` types i.i.d. uniform on the unit square.
    /// Deterministic in `seed`.
    pub fn sample(params: &ModelParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = (0..params.num_users)
            .map(|_| UserType {
                f: rng.gen::<f64>(),
                r: rng.gen::<f64>(),
            })
            .collect();
        Self { users, seed }
    }

    pub fn from_users(users: Vec<UserType>) -> Self {
        Self { users, seed: 0 }
    }

    /// Load a population from a CSV file with one `f,r` pair per line.
    /// A `f,r` header line is allowed.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut users = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with('f')) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> std::result::Result<f64, String> {
                s.ok_or_else(|| "missing column".to_string())?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| e.to_string())
            };
            let f = parse(parts.next()).map_err(|msg| Error::PopulationFile { line: idx + 1, msg })?;
            let r = parse(parts.next()).map_err(|msg| Error::PopulationFile { line: idx + 1, msg })?;
            users.push(UserType::new(f, r).map_err(|e| Error::PopulationFile {
                line: idx + 1,
                msg: e.to_string(),
            })?);
        }
        Ok(Self { users, seed: 0 })
    }

    pub fn users(&self) -> &[UserType] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// How to obtain the population: sample it, or read it from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationSpec {
    Seeded(u64),
    File(PathBuf),
}

impl PopulationSpec {
    pub fn realize(&self, params: &ModelParams) -> Result<Population> {
        match self {
            PopulationSpec::Seeded(seed) => Ok(Population::sample(params, *seed)),
            PopulationSpec::File(path) => {
                let pop = Population::from_csv(path)?;
                if pop.len() as u64 != params.num_users {
                    return Err(Error::SizeMismatch {
                        assignment: pop.len(),
                        population: params.num_users as usize,
                    });
                }
                Ok(pop)
            }
        }
    }
}

/// The CP's Stage-I decision.
///
/// `alpha1` is an expected-sponsored-request count; `alpha2` is a (possibly
/// fractional) cached-content count, so it cannot exceed the catalog size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Budgets {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        for (what, value) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(value >= params.alpha_min && value <= params.alpha_max) {
                return Err(Error::OutOfRange {
                    what,
                    value,
                    min: params.alpha_min,
                    max: params.alpha_max,
                });
            }
        }
        if self.alpha2 > params.catalog_size as f64 {
            return Err(Error::OutOfRange {
                what: "alpha2",
                value: self.alpha2,
                min: params.alpha_min,
                max: params.catalog_size as f64,
            });
        }
        Ok(())
    }

    /// Defaults consistent with `ModelParams::default()`: the reference
    /// cellular budget, and an edge budget of 60% of the default catalog head
    /// (clamped to the catalog).
    pub fn default_for(params: &ModelParams) -> Self {
        Self {
            alpha1: 2000.0,
            alpha2: 600.0_f64.min(params.catalog_size as f64),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    v: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    phi1: Option<f64>,
    phi2: Option<f64>,
    u: Option<f64>,
    h1: Option<f64>,
    h2: Option<f64>,
    #[serde(rename = "S")]
    s: Option<u64>,
    gamma: Option<f64>,
    #[serde(rename = "U")]
    n_users: Option<u64>,
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
    alpha1: Option<f64>,
    alpha2: Option<f64>,
    seed: Option<u64>,
    population_file: Option<PathBuf>,
}

/// Parse a flat TOML config. Unset keys take the defaults; all invariants are
/// checked before anything is returned.
pub fn parse_config(text: &str) -> Result<(ModelParams, Budgets, PopulationSpec)> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let defaults = ModelParams::default();
    let params = ModelParams {
        v: raw.v.unwrap_or(defaults.v),
        c1: raw.c1.unwrap_or(defaults.c1),
        c2: raw.c2.unwrap_or(defaults.c2),
        phi1: raw.phi1.unwrap_or(defaults.phi1),
        phi2: raw.phi2.unwrap_or(defaults.phi2),
        u: raw.u.unwrap_or(defaults.u),
        h1: raw.h1.unwrap_or(defaults.h1),
        h2: raw.h2.unwrap_or(defaults.h2),
        catalog_size: raw.s.unwrap_or(defaults.catalog_size),
        gamma: raw.gamma.unwrap_or(defaults.gamma),
        num_users: raw.n_users.unwrap_or(defaults.num_users),
        alpha_min: raw.alpha_min.unwrap_or(defaults.alpha_min),
        alpha_max: raw
            .alpha_max
            .unwrap_or_else(|| raw.n_users.unwrap_or(defaults.num_users) as f64),
    };
    params.validate()?;
    let budget_defaults = Budgets::default_for(&params);
    let budgets = Budgets {
        alpha1: raw.alpha1.unwrap_or(budget_defaults.alpha1),
        alpha2: raw.alpha2.unwrap_or(budget_defaults.alpha2),
    };
    budgets.validate(&params)?;
    let spec = match raw.population_file {
        Some(path) => PopulationSpec::File(path),
        None => PopulationSpec::Seeded(raw.seed.unwrap_or(42)),
    };
    Ok((params, budgets, spec))
}
