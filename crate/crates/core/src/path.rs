//! Path channel: per-step spatial offsets absorbing the residual that the pace
//! channel cannot.
//!
//! At unit regularization the first-order profile is `1 − F(2k+1)/F(2K+1)`.
//! For general λ it becomes a ratio of hyperbolic cosines with
//! `ω = arccosh(1 + 1/(2λ))`. A constant acceleration adds a second branch
//! `Λ_k(K)` built from Lucas numbers. Integer sequences are evaluated exactly
//! before any division.

use serde::{Deserialize, Serialize};

use crate::error::{PpcError, Result};
use crate::model::Vec3;
use crate::pace::ResidualDecomposition;

/// Largest supported window for the closed-form profiles.
pub const MAX_PROFILE_K: usize = 16;
/// Largest Fibonacci index accepted by [`fibonacci`].
pub const MAX_FIB_INDEX: u32 = 90;
/// Largest Lucas index accepted by [`lucas`].
pub const MAX_LUCAS_INDEX: u32 = 89;
/// Above this argument the cosh ratio is evaluated in log space.
const LOG_COSH_SWITCH: f64 = 30.0;

/// Exact `F_n` with `F_0 = 0`, `F_1 = 1`.
pub fn fibonacci(n: u32) -> Result<u64> {
    if n > MAX_FIB_INDEX {
        return Err(PpcError::OutOfRange { n, max: MAX_FIB_INDEX });
    }
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    Ok(a)
}

/// Exact `L_n` with `L_0 = 2`, `L_1 = 1`.
pub fn lucas(n: u32) -> Result<u64> {
    if n > MAX_LUCAS_INDEX {
        return Err(PpcError::OutOfRange { n, max: MAX_LUCAS_INDEX });
    }
    let (mut a, mut b) = (2u64, 1u64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    Ok(a)
}

fn check_window(k: usize) -> Result<()> {
    if (1..=MAX_PROFILE_K).contains(&k) {
        Ok(())
    } else {
        Err(PpcError::HorizonOutOfRange { k, max: MAX_PROFILE_K })
    }
}

fn fib(n: usize) -> i128 {
    // indices stay ≤ 2·16+1 = 33 through check_window
    fibonacci(n as u32).expect("index validated by caller") as i128
}

fn luc(n: usize) -> i128 {
    lucas(n as u32).expect("index validated by caller") as i128
}

/// Numerator of the first-order coefficient over the common denominator
/// `F(2K+1)`: `F(2K+1) − F(2k+1)`. Defined for `k ≤ K` so the boundary
/// `k = K` can be checked exactly.
pub fn fib_numerator(k: usize, window: usize) -> Result<i128> {
    check_window(window)?;
    if k > window {
        return Err(PpcError::HorizonOutOfRange { k, max: window });
    }
    Ok(fib(2 * window + 1) - fib(2 * k + 1))
}

/// Numerator of `Λ_k(K) · F(2K+1)`:
/// `((2k+1) − L(2k+1)) F(2K+1) + F(2k+1) (L(2K+1) − (2K+1))`.
pub fn lucas_numerator(k: usize, window: usize) -> Result<i128> {
    check_window(window)?;
    if k > window {
        return Err(PpcError::HorizonOutOfRange { k, max: window });
    }
    let n = 2 * k + 1;
    let m = 2 * window + 1;
    Ok((n as i128 - luc(n)) * fib(m) + fib(n) * (luc(m) - m as i128))
}

/// First-order offsets at λ = 1: `1 − F(2k+1)/F(2K+1)` for `k = 0..K`.
pub fn fib_profile(window: usize) -> Result<Vec<f64>> {
    check_window(window)?;
    let den = fib(2 * window + 1) as f64;
    (0..window)
        .map(|k| Ok(fib_numerator(k, window)? as f64 / den))
        .collect()
}

/// `ω(λ) = arccosh(1 + 1/(2λ))`, evaluated as `ln1p(u + √(u(u+2)))` so that
/// large λ keeps its precision.
pub fn omega(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(PpcError::InvalidLambda(lambda));
    }
    let u = 0.5 / lambda;
    Ok((u + u.sqrt() * (u + 2.0).sqrt()).ln_1p())
}

fn ln_cosh(x: f64) -> f64 {
    // x ≥ 0
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

/// First-order offsets for a general regularizer:
/// `1 − cosh((k+½)ω) / cosh((K+½)ω)`.
pub fn cosh_profile(window: usize, lambda: f64) -> Result<Vec<f64>> {
    check_window(window)?;
    let w = omega(lambda)?;
    let outer = (window as f64 + 0.5) * w;
    Ok((0..window)
        .map(|k| {
            let inner = (k as f64 + 0.5) * w;
            let ratio = if outer > LOG_COSH_SWITCH {
                (ln_cosh(inner) - ln_cosh(outer)).exp()
            } else {
                inner.cosh() / outer.cosh()
            };
            1.0 - ratio
        })
        .collect())
}

/// Second-order coefficients `Λ_k(K)` for `k = 0..K`.
pub fn lucas_profile(window: usize) -> Result<Vec<f64>> {
    check_window(window)?;
    let den = fib(2 * window + 1) as f64;
    (0..window)
        .map(|k| Ok(lucas_numerator(k, window)? as f64 / den))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetProfile {
    pub coefficients_first: Vec<f64>,
    /// Present only when the second-order residual is nonzero.
    pub coefficients_second: Option<Vec<f64>>,
    /// `δ_k = c1_k A* + c2_k B*` in meters per step.
    pub offsets: Vec<Vec3>,
    /// The Lucas branch was applied with λ ≠ 1; its coefficients are the
    /// unit-λ ones.
    pub lucas_off_unit_lambda: bool,
}

impl OffsetProfile {
    pub fn is_zero(&self) -> bool {
        self.offsets.iter().all(Vec3::is_zero)
    }
}

/// Offsets over a window of `window` executed steps.
pub fn compute_offsets(res: &ResidualDecomposition, window: usize, lambda: f64) -> Result<OffsetProfile> {
    let first = if lambda == 1.0 {
        fib_profile(window)?
    } else {
        cosh_profile(window, lambda)?
    };
    let second = if res.b_perp.is_zero() {
        None
    } else {
        Some(lucas_profile(window)?)
    };
    let offsets = (0..window)
        .map(|k| {
            let mut d = if res.a_perp.is_zero() {
                Vec3::ZERO
            } else {
                res.a_perp * first[k]
            };
            if let Some(c2) = &second {
                d += res.b_perp * c2[k];
            }
            d
        })
        .collect();
    Ok(OffsetProfile {
        lucas_off_unit_lambda: second.is_some() && lambda != 1.0,
        coefficients_first: first,
        coefficients_second: second,
        offsets,
    })
}
