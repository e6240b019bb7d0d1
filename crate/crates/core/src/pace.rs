//! Pace channel: the temporal-compression factor α* and the execution horizon
//! that absorbs it.
//!
//! Only the disturbance component aligned with the planned delta changes the
//! pace. Everything perpendicular to the plan is handed to the path channel as
//! the residuals `a_perp` (first order) and `b_perp` (second order).

use serde::{Deserialize, Serialize};

use crate::model::{DisturbanceEstimate, Vec3, WrapperConfig};

/// Values of `T / α` this close to an integer snap to it before rounding up.
const CEIL_SNAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualDecomposition {
    /// Clamped compression factor, always ≥ 1.
    pub alpha_star: f64,
    /// Stationary value before clamping.
    pub alpha_unclamped: f64,
    /// First-order residual handed to the path channel (m/step).
    pub a_perp: Vec3,
    /// Second-order residual `½ a d̂_a` with the pace-absorbed part removed.
    pub b_perp: Vec3,
    pub cos_theta_v: f64,
    pub cos_theta_a: f64,
    /// The unconstrained α fell below 1; the full disturbance went to the
    /// residuals.
    pub clamped: bool,
    /// `‖Δp‖` was below the degeneracy floor; no plan direction exists.
    pub degenerate: bool,
}

impl ResidualDecomposition {
    fn identity() -> Self {
        Self {
            alpha_star: 1.0,
            alpha_unclamped: 1.0,
            a_perp: Vec3::ZERO,
            b_perp: Vec3::ZERO,
            cos_theta_v: 0.0,
            cos_theta_a: 0.0,
            clamped: false,
            degenerate: false,
        }
    }
}

/// Coefficient `S₃ / (2 S₂) = 3K(K+1) / (4(2K+1))` coupling the acceleration
/// into α* over a window of `k` steps.
pub fn coupling_coefficient(k: usize) -> f64 {
    let k = k as f64;
    3.0 * k * (k + 1.0) / (4.0 * (2.0 * k + 1.0))
}

fn cosine(v: &Vec3, unit: &Vec3, eps: f64) -> f64 {
    let n = v.norm();
    if n < eps {
        0.0
    } else {
        (v.dot(unit) / n).clamp(-1.0, 1.0)
    }
}

/// Closed-form α* for the affine disturbance over a window of `k` steps,
/// with the perpendicular residuals.
pub fn compute_alpha(delta_p: Vec3, d: &DisturbanceEstimate, k: usize, eps: f64) -> ResidualDecomposition {
    if d.velocity.is_zero() && d.acceleration.is_zero() {
        return ResidualDecomposition::identity();
    }
    let half_acc = d.acceleration * 0.5;

    let plan_norm = delta_p.norm();
    let Some(plan_dir) = delta_p.normalized(eps.max(f64::MIN_POSITIVE)) else {
        // no parallel direction: the path channel takes everything
        return ResidualDecomposition {
            a_perp: d.velocity,
            b_perp: half_acc,
            degenerate: true,
            ..ResidualDecomposition::identity()
        };
    };

    let v_par = d.velocity.dot(&plan_dir);
    let a_par = d.acceleration.dot(&plan_dir);
    let alpha_unclamped = 1.0 + v_par / plan_norm + coupling_coefficient(k) * a_par / plan_norm;
    let cos_theta_v = cosine(&d.velocity, &plan_dir, eps);
    let cos_theta_a = cosine(&d.acceleration, &plan_dir, eps);

    if alpha_unclamped >= 1.0 {
        ResidualDecomposition {
            alpha_star: alpha_unclamped,
            alpha_unclamped,
            a_perp: d.velocity - plan_dir * v_par,
            b_perp: (d.acceleration - plan_dir * a_par) * 0.5,
            cos_theta_v,
            cos_theta_a,
            clamped: false,
            degenerate: false,
        }
    } else {
        ResidualDecomposition {
            alpha_star: 1.0,
            alpha_unclamped,
            a_perp: d.velocity,
            b_perp: half_acc,
            cos_theta_v,
            cos_theta_a,
            clamped: true,
            degenerate: false,
        }
    }
}

/// Decomposition with α pinned to `alpha` (the fixed-pace ablation). The
/// path-channel residuals are those of the closed form; only the pace changes.
pub fn residual_for_alpha(delta_p: Vec3, d: &DisturbanceEstimate, alpha: f64, k: usize, eps: f64) -> ResidualDecomposition {
    ResidualDecomposition {
        alpha_star: alpha,
        ..compute_alpha(delta_p, d, k, eps)
    }
}

/// `K_exec` for the configured window.
pub fn compute_k_exec(alpha: f64, cfg: &WrapperConfig, latch_fired: bool) -> usize {
    k_exec_for_window(alpha, cfg.horizon, cfg, latch_fired)
}

/// `K_exec = max(K, min(⌈T/α⌉, T))`, capped at the ceiling and, while the
/// latch fires, at `T/4`. Never below the floor `K`.
pub fn k_exec_for_window(alpha: f64, window: usize, cfg: &WrapperConfig, latch_fired: bool) -> usize {
    let floor = cfg.k_floor;
    let ratio = window as f64 / alpha.max(1.0);
    let nearest = ratio.round();
    let steps = if (ratio - nearest).abs() <= CEIL_SNAP * ratio.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    let mut k = floor.max((steps as usize).min(window));
    k = k.min(cfg.k_ceiling);
    if latch_fired {
        k = k.min(window / 4);
    }
    k.max(floor)
}
