//! Uplink power allocation.
//!
//! With the co-channel interference replaced by its full-power upper bound the
//! power problem splits into one scalar problem per offloaded user:
//! minimise `Γ(p) = (φ + ψp) / log2(1 + ϑp)` over `0 < p <= P`. `Γ` is strictly
//! quasi-convex and the sign of its derivative equals the sign of the
//! increasing function `Ω`, so bisection on `Ω` finds the optimum.

use std::f64::consts::LN_2;

use crate::error::{invalid, Error, Result};
use crate::model::{
    co_channel_interference, Assignment, GroundElement, NetworkScenario, PowerAllocation,
};

/// Default bisection tolerance [W].
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Coefficients of one scalar power subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaCoefficients {
    pub phi: f64,
    pub psi: f64,
    /// Effective channel `h / (Ĩ + σ²)` [1/W].
    pub theta: f64,
    pub max_power: f64,
}

impl UpaCoefficients {
    pub fn new(phi: f64, psi: f64, theta: f64, max_power: f64) -> Result<Self> {
        for (field, v) in [
            ("phi", phi),
            ("psi", psi),
            ("theta", theta),
            ("max_power", max_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(Self {
            phi,
            psi,
            theta,
            max_power,
        })
    }

    /// Coefficients of `elem`'s subproblem under the offloading decision `x`.
    pub fn for_element(elem: &GroundElement, x: &Assignment, scen: &NetworkScenario) -> Self {
        let c = scen.coefficients(elem.user);
        Self {
            phi: c.phi,
            psi: c.psi,
            theta: effective_channel(elem, x, scen),
            max_power: scen.users[elem.user].max_power,
        }
    }
}

/// Co-channel interference at `elem.server` assuming every interferer sends at
/// its power budget [W].
pub fn interference_upper_bound(
    elem: &GroundElement,
    x: &Assignment,
    scen: &NetworkScenario,
) -> f64 {
    co_channel_interference(elem, x, scen, |k| scen.users[k].max_power)
}

/// `h / (Ĩ + σ²)`: SINR per watt of transmit power under the upper-bound interference.
pub fn effective_channel(elem: &GroundElement, x: &Assignment, scen: &NetworkScenario) -> f64 {
    scen.gains.get(elem.user, elem.server)
        / (interference_upper_bound(elem, x, scen) + scen.radio.noise_power)
}

/// Upload overhead `Γ(p)` of a single user.
pub fn gamma_objective(coef: &UpaCoefficients, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid("p", format!("objective is defined for p > 0, got {p}")));
    }
    Ok(gamma_unchecked(coef, p))
}

#[inline]
fn gamma_unchecked(coef: &UpaCoefficients, p: f64) -> f64 {
    (coef.phi + coef.psi * p) / (coef.theta * p).ln_1p() * LN_2
}

/// Stationarity function; `Γ'(p)` has the sign of `Ω(p)` for `p > 0`.
#[inline]
pub fn omega(coef: &UpaCoefficients, p: f64) -> f64 {
    let a = 1.0 + coef.theta * p;
    coef.psi * (coef.theta * p).ln_1p() / LN_2 - coef.theta * (coef.phi + coef.psi * p) / (a * LN_2)
}

/// Result of [`bisect_power`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOutcome {
    pub power: f64,
    /// Number of halvings performed; zero when the budget is optimal.
    pub iterations: u32,
    /// True when the optimum sits on the power budget.
    pub at_budget: bool,
}

/// Minimises `Γ` over `(0, max_power]` by bisection on `Ω`.
///
/// The interval is halved until its width is at most `tol`, which takes
/// `ceil(log2(max_power / tol))` steps, and the midpoint is returned.
pub fn bisect_power(coef: &UpaCoefficients, tol: f64) -> BisectionOutcome {
    assert!(tol > 0.0, "bisection tolerance must be positive");
    if omega(coef, coef.max_power) <= 0.0 {
        return BisectionOutcome {
            power: coef.max_power,
            iterations: 0,
            at_budget: true,
        };
    }
    let (mut lo, mut hi) = (0.0, coef.max_power);
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if omega(coef, mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if hi - lo <= tol {
            break;
        }
    }
    BisectionOutcome {
        power: 0.5 * (lo + hi),
        iterations,
        at_budget: false,
    }
}

/// Optimal powers for a fixed offloading decision.
#[derive(Debug, Clone, PartialEq)]
pub struct UpaSolution {
    pub power: PowerAllocation,
    /// Sum of the per-user `Γ` at the optimum (upper-bound interference).
    pub objective: f64,
}

/// Solves every offloaded user's power subproblem independently.
pub fn solve_upa(x: &Assignment, scen: &NetworkScenario, tol: f64) -> UpaSolution {
    let mut power = PowerAllocation::zeros(scen.num_users());
    let mut objective = 0.0;
    for elem in x {
        let coef = UpaCoefficients::for_element(elem, x, scen);
        let p = bisect_power(&coef, tol).power;
        power.power[elem.user] = p;
        objective += gamma_unchecked(&coef, p);
    }
    UpaSolution { power, objective }
}

/// Helper terms of the closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeTerms {
    /// `1 + ϑp`
    pub a: f64,
    /// `log2(1 + ϑp)`
    pub c: f64,
    /// `φ + ψp`
    pub d: f64,
    /// `ϑD - 2ψA`
    pub g: f64,
}

impl DerivativeTerms {
    pub fn at(coef: &UpaCoefficients, p: f64) -> Self {
        let a = 1.0 + coef.theta * p;
        let d = coef.phi + coef.psi * p;
        Self {
            a,
            c: (coef.theta * p).ln_1p() / LN_2,
            d,
            g: coef.theta * d - 2.0 * coef.psi * a,
        }
    }
}

/// Closed-form `(Γ'(p), Γ''(p))`.
pub fn gamma_derivatives(coef: &UpaCoefficients, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0) {
        return Err(invalid("p", format!("derivatives are defined for p > 0, got {p}")));
    }
    let DerivativeTerms { a, c, d, g } = DerivativeTerms::at(coef, p);
    let th = coef.theta;
    let first = (coef.psi * c - th * d / (a * LN_2)) / (c * c);
    let second = th * (g * c + 2.0 * th * d / LN_2) / (a * a * c * c * c * LN_2);
    Ok((first, second))
}

/// `Γ''` at a stationary point, where `Ω(p) = 0` lets the general form collapse
/// to `ϑ³D² / (A³C³ψ ln²2)`.
pub fn stationary_curvature(coef: &UpaCoefficients, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter {
            field: "p",
            reason: format!("must be > 0, got {p}"),
        });
    }
    let DerivativeTerms { a, c, d, .. } = DerivativeTerms::at(coef, p);
    let th = coef.theta;
    Ok(th.powi(3) * d * d / (a.powi(3) * c.powi(3) * coef.psi * LN_2 * LN_2))
}
