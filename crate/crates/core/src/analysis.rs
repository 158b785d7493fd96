//! Closed-form complexity analytics: wake-up and round-trip times, the
//! interference probability, the expected-termination bound and the optimal
//! activation parameter.
//!
//! Powers `alpha^k` with large `k` are evaluated as `exp(k ln alpha)`, and
//! `1 - alpha^k` as `-expm1(k ln alpha)`, so nothing underflows or cancels
//! for rings of a few thousand nodes and activation parameters near zero.

use serde::{Deserialize, Serialize};

use crate::error::{ElectionError, Result};
use crate::protocol::validate_activation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityParams {
    pub n: usize,
    pub a0: f64,
    pub delta: f64,
    pub s_low: f64,
    pub s_high: f64,
}

impl ComplexityParams {
    /// `delta = s_low = s_high = 1`.
    pub fn unit(n: usize, a0: f64) -> Self {
        ComplexityParams {
            n,
            a0,
            delta: 1.0,
            s_low: 1.0,
            s_high: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(ElectionError::InvalidParameter(format!("n must be >= 2, got {}", self.n)));
        }
        validate_activation(self.a0)?;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.delta) || !positive(self.s_low) || !positive(self.s_high) || self.s_low > self.s_high {
            return Err(ElectionError::InvalidParameter(format!("invalid timing bounds in {self:?}")));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.a0
    }

    fn ln_alpha(&self) -> f64 {
        f64::ln_1p(-self.a0)
    }

    /// `1 - alpha^n`: probability that at least one of `n` gambles with unit
    /// dead counters succeeds.
    fn any_wakes(&self) -> f64 {
        -f64::exp_m1(self.n as f64 * self.ln_alpha())
    }
}

/// `(F, F_low)`: upper and lower bounds on the expected global time until
/// the first node becomes active.
pub fn first_wakeup_time_bounds(p: &ComplexityParams) -> (f64, f64) {
    let trials = 1.0 / p.any_wakes();
    (trials / p.s_low, trials / p.s_high)
}

/// `R = n * delta`: expected time for a message to travel around the ring.
pub fn round_trip_time(p: &ComplexityParams) -> f64 {
    p.n as f64 * p.delta
}

/// `W = 1 - alpha^(n R s_high)`: bound on the probability that some node
/// wakes up during one round trip.
pub fn interference_probability(p: &ComplexityParams) -> f64 {
    let exponent = p.n as f64 * round_trip_time(p) * p.s_high;
    -f64::exp_m1(exponent * p.ln_alpha())
}

/// `1 - (1 - 2/(n+1))^n`, the interference probability of the unit-speed
/// sketch at the optimal activation parameter. Tends to `1 - e^-2`.
pub fn simplified_interference(n: usize) -> f64 {
    -f64::exp_m1(n as f64 * f64::ln_1p(-2.0 / (n as f64 + 1.0)))
}

/// Upper bound on the expected termination time,
/// `(1 + R s_low - alpha^n R s_low) / ((1 - alpha^n)(1 - W) s_low)`.
pub fn expected_termination_upper_bound(p: &ComplexityParams) -> Result<f64> {
    let r = round_trip_time(p);
    let any = p.any_wakes();
    let alpha_n = 1.0 - any;
    // 1 - W, evaluated directly so it does not cancel
    let no_interference = (p.n as f64 * r * p.s_high * p.ln_alpha()).exp();
    if !(no_interference > 0.0) {
        return Err(ElectionError::InvalidParameter(format!(
            "interference probability is 1 for {p:?}; the bound diverges"
        )));
    }
    Ok((1.0 + r * p.s_low - alpha_n * r * p.s_low) / (any * no_interference * p.s_low))
}

/// `beta = (1 - a0)^(n(n-1)/2)`: probability that the first woken node's
/// message completes its round trip in the unit-speed average case.
pub fn round_trip_success_probability(n: usize, a0: f64) -> f64 {
    let pairs = (n as f64) * (n as f64 - 1.0) / 2.0;
    (pairs * f64::ln_1p(-a0)).exp()
}

/// `1 / (beta (1 - alpha^n))`: expected number of gamble rounds to elect a
/// leader in the unit-speed average case.
pub fn average_election_time(n: usize, a0: f64) -> Result<f64> {
    validate_activation(a0)?;
    let any = -f64::exp_m1(n as f64 * f64::ln_1p(-a0));
    Ok(1.0 / (round_trip_success_probability(n, a0) * any))
}

/// `1 - ((n-1)/(n+1))^(1/n)`, the minimizer of [`average_election_time`].
pub fn compute_optimal_activation(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(ElectionError::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(-f64::exp_m1(f64::ln_1p(-2.0 / (nf + 1.0)) / nf))
}

/// `1 - exp(-2/n^2)`, the large-ring limit of the optimal parameter.
pub fn optimal_activation_asymptote(n: usize) -> f64 {
    let nf = n as f64;
    -f64::exp_m1(-2.0 / (nf * nf))
}

/// `(n-1) alpha^(n(n-1)/2) - (n+1) alpha^(n(n+1)/2)`; zero at the optimum.
pub fn optimality_residual(n: usize, a0: f64) -> f64 {
    let nf = n as f64;
    let ln_alpha = f64::ln_1p(-a0);
    (nf - 1.0) * (0.5 * nf * (nf - 1.0) * ln_alpha).exp() - (nf + 1.0) * (0.5 * nf * (nf + 1.0) * ln_alpha).exp()
}

/// Which round-trip success probability the general-parameter optimization
/// uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BetaVariant {
    /// `alpha^(delta s_high n(n-1)/2)`.
    #[default]
    AverageCase,
    /// `alpha^(n^2 delta s_high)`, the bound used in the linear-time proof.
    WorstCase,
}

impl BetaVariant {
    /// Exponent `c` with `beta = (alpha^n)^c`.
    fn exponent_per_round(self, p: &ComplexityParams) -> f64 {
        let nf = p.n as f64;
        match self {
            BetaVariant::AverageCase => p.delta * p.s_high * (nf - 1.0) / 2.0,
            BetaVariant::WorstCase => nf * p.delta * p.s_high,
        }
    }
}

/// Worst-case-speed average election time in global time: first wakeup
/// paced by `s_low`, round-trip success by `s_high` and `delta`.
pub fn average_election_time_general(p: &ComplexityParams, variant: BetaVariant) -> Result<f64> {
    p.validate()?;
    let ln_alpha_n = p.n as f64 * p.ln_alpha();
    let beta = (variant.exponent_per_round(p) * ln_alpha_n).exp();
    Ok(1.0 / (p.s_low * beta * -f64::exp_m1(ln_alpha_n)))
}

/// Minimizer of [`average_election_time_general`] over `a0`; `p.a0` is
/// ignored. Writing `x = alpha^n`, the objective is `1/(x^c (1-x))`, which is
/// minimal at `x = c/(c+1)`.
pub fn optimal_activation_general(p: &ComplexityParams, variant: BetaVariant) -> Result<f64> {
    ComplexityParams { a0: 0.5, ..*p }.validate()?;
    let c = variant.exponent_per_round(p);
    if !(c > 0.0) {
        return Err(ElectionError::InvalidParameter(format!("degenerate exponent {c} for {p:?}")));
    }
    let ln_x = -f64::ln_1p(1.0 / c);
    Ok(-f64::exp_m1(ln_x / p.n as f64))
}
