//! Simulator and optimizer for a two-stage sponsoring game between a video
//! content provider (CP) and a population of heterogeneous mobile users.
//!
//! The CP (leader) picks a cellular-sponsoring budget `alpha1` and an
//! edge-caching budget `alpha2`. Users (followers) then pick one of four
//! memberships: no sponsoring, cellular sponsoring, edge-cache sponsoring, or
//! both. User payoffs are coupled through two market quantities: the cache hit
//! probability `rho` (set by `alpha2` and the Zipf content popularity) and the
//! cellular sponsor probability `P` (budget `alpha1` divided by the aggregate
//! cellular demand).
//!
//! Module layout:
//! - [`model`]: parameters, user population, config parsing
//! - [`derived`]: Zipf catalog, cache hit probability, demand aggregates, `P`
//! - [`payoffs`]: per-membership payoffs, analytic selection policy,
//!   indifferent points
//! - [`stage2`]: membership equilibrium via best-response dynamics and via a
//!   one-dimensional fixed point in `P`
//! - [`stage1`]: CP revenue, budget grid search, best-response curves and
//!   their intersections, scheme comparison
//! - [`harness`]: experiment runners that emit CSV artifacts
//!
//! The inner loops (population classification, budget grid cells) run on
//! rayon when the default `parallel` feature is enabled, and fall back to
//! plain iterators with `--no-default-features`.

pub mod derived;
pub mod error;
pub mod exec;
pub mod harness;
pub mod model;
pub mod payoffs;
pub mod stage1;
pub mod stage2;

pub use error::{Error, Result};
pub use model::{Budgets, ModelParams, Population, PopulationSpec, UserType};
pub use payoffs::Membership;
