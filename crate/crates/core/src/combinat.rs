//! Continuous-argument combinatorics.
//!
//! Every rate formula in the crate evaluates binomial coefficients at real
//! arguments (`t = KM/N` is rarely an integer), so `C(n, k)` is relaxed through the
//! Gamma function and evaluated in log space. The relaxation is exact at integers.
//! Outside `0 <= k <= n` the coefficient is defined to be zero instead of following
//! the Gamma poles.

use statrs::function::gamma;

use crate::error::{Error, Result};

/// A finite, non-negative real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RealNonNeg(f64);

impl RealNonNeg {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                function: "RealNonNeg::new",
                value,
                requirement: "finite and >= 0",
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RealNonNeg {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

/// `ln Γ(z)` for `z > 0`.
pub fn log_gamma(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain {
            function: "log_gamma",
            value: z,
            requirement: "z > 0",
        });
    }
    Ok(ln_gamma_pos(z))
}

fn ln_gamma_pos(z: f64) -> f64 {
    if z == 1.0 || z == 2.0 {
        return 0.0;
    }
    gamma::ln_gamma(z)
}

/// Digamma `ψ(z) = d/dz ln Γ(z)` for `z > 0`.
pub fn digamma(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain {
            function: "digamma",
            value: z,
            requirement: "z > 0",
        });
    }
    Ok(gamma::digamma(z))
}

/// Gamma-relaxed binomial coefficient, zero when `k < 0` or `k > n`.
pub fn binom(n: f64, k: f64) -> f64 {
    if !(k >= 0.0 && k <= n) {
        return 0.0;
    }
    if k == 0.0 || k == n {
        return 1.0;
    }
    (ln_gamma_pos(n + 1.0) - ln_gamma_pos(k + 1.0) - ln_gamma_pos(n - k + 1.0)).exp()
}

/// `ln C(n, k)` for `0 <= k <= n`; `-inf` otherwise.
pub fn ln_binom(n: f64, k: f64) -> f64 {
    if !(k >= 0.0 && k <= n) {
        return f64::NEG_INFINITY;
    }
    ln_gamma_pos(n + 1.0) - ln_gamma_pos(k + 1.0) - ln_gamma_pos(n - k + 1.0)
}

/// Gamma-relaxed `C(n, k)` continued past `k = n` down to its zero at `k = n + 1`.
///
/// Agrees with [`binom`] at integer arguments but stays continuous in `k`, which
/// keeps rate expressions continuous as `t` sweeps across `n − 1`.
pub fn binom_continued(n: f64, k: f64) -> f64 {
    ln_binom_continued(n, k).exp()
}

/// `ln` of [`binom_continued`]; `-inf` where it vanishes.
pub fn ln_binom_continued(n: f64, k: f64) -> f64 {
    if !(k >= 0.0 && n >= 0.0 && k < n + 1.0) {
        return f64::NEG_INFINITY;
    }
    if k <= n {
        return ln_binom(n, k);
    }
    ln_gamma_pos(n + 1.0) - ln_gamma_pos(k + 1.0) - ln_gamma_pos(n - k + 1.0)
}

/// Exact `C(n, k)`; zero when `k < 0` or `k > n`.
pub fn binom_exact(n: u64, k: i64) -> Result<u128> {
    if k < 0 || k as u64 > n {
        return Ok(0);
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc
            .checked_mul(u128::from(n - i))
            .ok_or(Error::Overflow { n, k: k as i64 })?
            / u128::from(i + 1);
    }
    Ok(acc)
}
