//! Per-membership user payoffs, the analytic membership selection policy,
//! and the indifferent points of the type square.

use crate::derived::MarketState;
use crate::model::{ModelParams, UserType};

/// The four sponsorship memberships a user can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Membership {
    NoSp,
    CellSp,
    EdgeSp,
    HybridSp,
}

impl Membership {
    /// Tie-break order: fewer subscriptions win.
    pub const ALL: [Membership; 4] = [
        Membership::NoSp,
        Membership::CellSp,
        Membership::EdgeSp,
        Membership::HybridSp,
    ];

    pub fn label(self) -> char {
        match self {
            Membership::NoSp => 'N',
            Membership::CellSp => 'C',
            Membership::EdgeSp => 'E',
            Membership::HybridSp => 'H',
        }
    }

    pub fn index(self) -> usize {
        match self {
            Membership::NoSp => 0,
            Membership::CellSp => 1,
            Membership::EdgeSp => 2,
            Membership::HybridSp => 3,
        }
    }
}

/// Expected per-slot payoff of a type-`(f, r)` user under membership `m`.
///
/// `V(N) = 0`; `V(C) = (v-c1) P f - phi1`; `V(E) = (v-c2) rho f r - phi2`;
/// `V(H) = (v-c2) rho f r + (v-c1) P f - (v-c1) P rho f r - phi1 - phi2`.
pub fn user_payoff(user: UserType, m: Membership, state: &MarketState, params: &ModelParams) -> f64 {
    let cell = (params.v - params.c1) * state.p * user.f;
    let edge = (params.v - params.c2) * state.rho * user.f * user.r;
    match m {
        Membership::NoSp => 0.0,
        Membership::CellSp => cell - params.phi1,
        Membership::EdgeSp => edge - params.phi2,
        Membership::HybridSp => {
            edge + cell - (params.v - params.c1) * state.p * state.rho * user.f * user.r
                - params.phi1
                - params.phi2
        }
    }
}

/// Argmax of `user_payoff` over the four memberships, ties broken toward
/// fewer subscriptions (N, then C, then E, then H).
pub fn best_membership(user: UserType, state: &MarketState, params: &ModelParams) -> Membership {
    let mut best = Membership::NoSp;
    let mut best_value = 0.0;
    for m in [Membership::CellSp, Membership::EdgeSp, Membership::HybridSp] {
        let value = user_payoff(user, m, state, params);
        if value > best_value {
            best = m;
            best_value = value;
        }
    }
    best
}

/// Delta-form payoffs used by the analytic policy, valid when
/// `phi1 = phi2 = phi`: `V(C) = d1 f - phi`, `V(E) = d2 f r - phi`,
/// `V(H) = (d2 - d1 rho) f r + d1 f - 2 phi`.
pub fn delta_payoff(user: UserType, m: Membership, d1: f64, d2: f64, rho: f64, phi: f64) -> f64 {
    match m {
        Membership::NoSp => 0.0,
        Membership::CellSp => d1 * user.f - phi,
        Membership::EdgeSp => d2 * user.f * user.r - phi,
        Membership::HybridSp => (d2 - d1 * rho) * user.f * user.r + d1 * user.f - 2.0 * phi,
    }
}

fn delta_argmax(user: UserType, d1: f64, d2: f64, rho: f64, phi: f64) -> Membership {
    let mut best = Membership::NoSp;
    let mut best_value = 0.0;
    for m in [Membership::CellSp, Membership::EdgeSp, Membership::HybridSp] {
        let value = delta_payoff(user, m, d1, d2, rho, phi);
        if value > best_value {
            best = m;
            best_value = value;
        }
    }
    best
}

/// The analytic membership selection policy, stated as strict-inequality
/// regions of the type square:
///
/// - N: `d1 f < phi` and `d2 r f < phi`
/// - C: `d1 f > phi`, `d1 - d2 r > 0`, `phi - (d2 - d1 rho) f r > 0`
/// - E: `d2 f r > phi`, `d2 r - d1 > 0`, `phi + d1 rho f r - d1 f > 0`
/// - H: `phi - (d2 - d1 rho) f r < 0`, `phi + d1 rho f r - d1 f < 0`,
///   `(d2 - d1 rho) f r + d1 f - 2 phi > 0`
///
/// Boundary types (where no region holds strictly) fall back to the payoff
/// argmax with the usual tie-break.
pub fn classify_region(user: UserType, d1: f64, d2: f64, rho: f64, phi: f64) -> Membership {
    let UserType { f, r } = user;
    if d1 * f < phi && d2 * r * f < phi {
        return Membership::NoSp;
    }
    if d1 * f > phi && d1 - d2 * r > 0.0 && phi - (d2 - d1 * rho) * f * r > 0.0 {
        return Membership::CellSp;
    }
    if d2 * f * r > phi && d2 * r - d1 > 0.0 && phi + d1 * rho * f * r - d1 * f > 0.0 {
        return Membership::EdgeSp;
    }
    if phi - (d2 - d1 * rho) * f * r < 0.0
        && phi + d1 * rho * f * r - d1 * f < 0.0
        && (d2 - d1 * rho) * f * r + d1 * f - 2.0 * phi > 0.0
    {
        return Membership::HybridSp;
    }
    delta_argmax(user, d1, d2, rho, phi)
}

/// The two triple-indifference points of the type square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndifferentPoints {
    /// N/C/E indifference, `(phi/d1, d1/d2)`.
    pub n1: Option<(f64, f64)>,
    pub n1_in_domain: bool,
    /// C/E/H indifference, `(f*/(1 - rho r*), r*)`.
    pub n2: Option<(f64, f64)>,
    pub n2_in_domain: bool,
}

pub fn indifferent_points(d1: f64, d2: f64, rho: f64, phi: f64) -> IndifferentPoints {
    if !(d1 > 0.0) || !(d2 > 0.0) {
        return IndifferentPoints {
            n1: None,
            n1_in_domain: false,
            n2: None,
            n2_in_domain: false,
        };
    }
    let f_star = phi / d1;
    let r_star = d1 / d2;
    let in_unit = |x: f64| (0.0..=1.0).contains(&x);
    let n1 = (f_star, r_star);
    let n1_in_domain = in_unit(f_star) && in_unit(r_star);
    let denom = 1.0 - rho * r_star;
    let (n2, n2_in_domain) = if denom > 0.0 {
        let f2 = f_star / denom;
        (Some((f2, r_star)), in_unit(f2) && in_unit(r_star))
    } else {
        (None, false)
    };
    IndifferentPoints {
        n1: Some(n1),
        n1_in_domain,
        n2,
        n2_in_domain,
    }
}
