//! Coupling quantities of the market: cache hit probability, expected
//! sponsored-request loads, and the cellular sponsor probability.

use crate::error::{Error, Result};
use crate::model::{ModelParams, Population};
use crate::payoffs::Membership;

/// Zipf content popularity over a catalog of `size` contents.
#[derive(Debug, Clone)]
pub struct ZipfCatalog {
    size: u64,
    gamma: f64,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl ZipfCatalog {
    /// `pmf[s-1] = s^-gamma / sum_k k^-gamma` for ranks `s = 1..=size`.
    pub fn build(size: u64, gamma: f64) -> Result<Self> {
        if size < 1 {
            return Err(Error::InvalidField {
                field: "S",
                value: size as f64,
            });
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidField {
                field: "gamma",
                value: gamma,
            });
        }
        let mut pmf: Vec<f64> = (1..=size).map(|s| (s as f64).powf(-gamma)).collect();
        let norm: f64 = pmf.iter().sum();
        for p in &mut pmf {
            *p /= norm;
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(Self {
            size,
            gamma,
            pmf,
            cdf,
        })
    }

    pub fn for_params(params: &ModelParams) -> Result<Self> {
        Self::build(params.catalog_size, params.gamma)
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability that a request hits one of the `alpha2` most popular
    /// contents. At integer `alpha2` this is the plain head sum of the pmf;
    /// fractional budgets interpolate linearly between adjacent ranks so the
    /// Stage-I objective stays continuous.
    pub fn cache_hit_prob(&self, alpha2: f64) -> Result<f64> {
        if !(0.0 <= alpha2 && alpha2 <= self.size as f64) {
            return Err(Error::OutOfRange {
                what: "alpha2",
                value: alpha2,
                min: 0.0,
                max: self.size as f64,
            });
        }
        let whole = alpha2.floor() as usize;
        let frac = alpha2 - whole as f64;
        let base = if whole == 0 { 0.0 } else { self.cdf[whole - 1] };
        let rho = if frac > 0.0 {
            base + frac * self.pmf[whole]
        } else {
            base
        };
        Ok(rho.min(1.0))
    }
}

/// The coupled market quantities at a given membership assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    /// Probability a request hits a cached content.
    pub rho: f64,
    /// Expected cellular-sponsored requests per slot.
    pub n_c: f64,
    /// Expected edge-sponsored requests per slot.
    pub n_e: f64,
    /// Probability a cellular request is sponsored.
    pub p: f64,
    /// Instant cellular payoff factor, `(v - c1) * p`.
    pub delta1: f64,
    /// Instant edge payoff factor, `(v - c2) * rho`.
    pub delta2: f64,
}

impl MarketState {
    pub fn from_parts(rho: f64, n_c: f64, n_e: f64, p: f64, params: &ModelParams) -> Self {
        Self {
            rho,
            n_c,
            n_e,
            p,
            delta1: (params.v - params.c1) * p,
            delta2: (params.v - params.c2) * rho,
        }
    }
}

/// Aggregate sponsored demand under an assignment:
/// `n_c = sum_C f + sum_H (f - r*f*rho)`, `n_e = sum_{E u H} r*f*rho`.
pub fn expected_requests(
    population: &Population,
    labels: &[Membership],
    rho: f64,
) -> Result<(f64, f64)> {
    if labels.len() != population.len() {
        return Err(Error::SizeMismatch {
            assignment: labels.len(),
            population: population.len(),
        });
    }
    let mut n_c = 0.0;
    let mut n_e = 0.0;
    for (user, label) in population.users().iter().zip(labels) {
        let edge_load = user.r * user.f * rho;
        match label {
            Membership::NoSp => {}
            Membership::CellSp => n_c += user.f,
            Membership::EdgeSp => n_e += edge_load,
            Membership::HybridSp => {
                n_c += user.f - edge_load;
                n_e += edge_load;
            }
        }
    }
    Ok((n_c, n_e))
}

/// Sponsor probability `P = min(alpha1 / n_c, 1)`, with `P = 1` at zero
/// demand (the budget trivially covers it).
pub fn sponsor_prob(alpha1: f64, n_c: f64) -> Result<f64> {
    if !(alpha1 >= 0.0) {
        return Err(Error::OutOfRange {
            what: "alpha1",
            value: alpha1,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if !(n_c >= 0.0) {
        return Err(Error::OutOfRange {
            what: "n_c",
            value: n_c,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if n_c == 0.0 {
        return Ok(1.0);
    }
    Ok((alpha1 / n_c).min(1.0))
}
