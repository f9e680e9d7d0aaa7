//! Standard normal density, distribution function, and its log-space
//! variants. `log_cdf` stays finite far into the lower tail, which the
//! preference likelihoods need under MCMC.

use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const TAIL: f64 = -8.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Mills ratio (1 - Phi(t)) / phi(t) for t >= 8 via its continued fraction.
fn mills_ratio_upper(t: f64) -> f64 {
    let mut f = t;
    for k in (1..=60).rev() {
        f = t + k as f64 / f;
    }
    1.0 / f
}

pub fn log_cdf(x: f64) -> f64 {
    if x < TAIL {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio_upper(-x).ln()
    } else if x > 5.0 {
        (-0.5 * libm::erfc(x / SQRT_2)).ln_1p()
    } else {
        cdf(x).ln()
    }
}

/// d/dx log Phi(x) = phi(x) / Phi(x).
pub fn dlog_cdf(x: f64) -> f64 {
    if x < TAIL {
        1.0 / mills_ratio_upper(-x)
    } else {
        pdf(x) / cdf(x)
    }
}
