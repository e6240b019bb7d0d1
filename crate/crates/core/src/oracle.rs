//! Brute-force minimizer of the tracking cost, independent of the closed forms.
//!
//! The cost over `(α, δ_0..δ_{K−1})` is
//! `½ Σ_j ‖p_j − p̃_j‖² + (λ/2) Σ_k ‖δ_k‖²` with `p_j = jαΔp + σ_j` and
//! `p̃_j = jΔp + j v + ½ j² a`. It is a linear least-squares problem; the
//! oracle assembles its normal equations and solves them with a dense
//! Cholesky factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PpcError, Result};
use crate::model::{Vec3, EPSILON_NORM};

/// Diagonal jitter applied only when the plain factorization fails.
const RIDGE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostInstance {
    pub delta_p: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub k: usize,
    pub lambda: f64,
}

impl CostInstance {
    pub fn new(delta_p: Vec3, velocity: Vec3, acceleration: Vec3, k: usize, lambda: f64) -> Result<Self> {
        if k == 0 {
            return Err(PpcError::HorizonOutOfRange { k, max: usize::MAX });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PpcError::InvalidLambda(lambda));
        }
        Ok(Self {
            delta_p: delta_p.checked("delta_p")?,
            velocity: velocity.checked("velocity")?,
            acceleration: acceleration.checked("acceleration")?,
            k,
            lambda,
        })
    }

    /// Target waypoint `p̃_j` relative to the chunk start.
    pub fn target(&self, j: usize) -> Vec3 {
        let j = j as f64;
        self.delta_p * j + self.velocity * j + self.acceleration * (0.5 * j * j)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub alpha: f64,
    pub deltas: Vec<Vec3>,
    /// `e_j = p_j − p̃_j` for `j = 1..=K`.
    pub tracking_errors: Vec<Vec3>,
    pub total_cost: f64,
}

pub fn evaluate_cost(inst: &CostInstance, alpha: f64, deltas: &[Vec3]) -> Result<CostBreakdown> {
    if deltas.len() != inst.k {
        return Err(PpcError::LengthMismatch {
            expected: inst.k,
            got: deltas.len(),
        });
    }
    let mut sigma = Vec3::ZERO;
    let mut tracking = 0.0;
    let mut errors = Vec::with_capacity(inst.k);
    for (idx, d) in deltas.iter().enumerate() {
        let j = idx + 1;
        sigma += *d;
        let e = inst.delta_p * (j as f64 * alpha) + sigma - inst.target(j);
        tracking += e.norm_squared();
        errors.push(e);
    }
    let effort: f64 = deltas.iter().map(Vec3::norm_squared).sum();
    Ok(CostBreakdown {
        alpha,
        deltas: deltas.to_vec(),
        tracking_errors: errors,
        total_cost: 0.5 * tracking + 0.5 * inst.lambda * effort,
    })
}

/// Which unknowns the solve is allowed to move.
enum Unknowns {
    /// α and every δ component.
    Joint,
    /// δ only, α pinned.
    FixedAlpha(f64),
    /// α and δ, with δ confined to the plane perpendicular to Δp.
    PerpendicularOffsets,
}

/// Least-squares rows `J x ≈ b` plus the per-step offset basis.
struct System {
    jac: DMatrix<f64>,
    rhs: DVector<f64>,
    basis: Vec<Vec3>,
    alpha_col: usize,
}

fn assemble(inst: &CostInstance, unknowns: &Unknowns) -> Result<System> {
    let k = inst.k;
    // three axes, or two vectors spanning the plane perpendicular to Δp
    let basis: Vec<Vec3> = match unknowns {
        Unknowns::PerpendicularOffsets => {
            let u = inst
                .delta_p
                .normalized(EPSILON_NORM)
                .ok_or(PpcError::Degenerate("plan delta below the degeneracy floor"))?;
            let helper = if u.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
            let e1 = u.cross(&helper).normalized(EPSILON_NORM).expect("helper not parallel");
            let e2 = u.cross(&e1);
            vec![e1, e2]
        }
        _ => vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)],
    };
    let nb = basis.len();
    let alpha_col = usize::from(!matches!(unknowns, Unknowns::FixedAlpha(_)));
    let cols = alpha_col + nb * k;
    let rows = 3 * k + nb * k;
    let mut jac = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    let dp = inst.delta_p.as_array();

    for j in 1..=k {
        let target = inst.target(j).as_array();
        for c in 0..3 {
            let r = 3 * (j - 1) + c;
            let mut b = target[c];
            match unknowns {
                Unknowns::FixedAlpha(alpha) => b -= j as f64 * alpha * dp[c],
                _ => jac[(r, 0)] = j as f64 * dp[c],
            }
            // σ_j sums δ_0..δ_{j-1}
            for step in 0..j {
                for (bi, e) in basis.iter().enumerate() {
                    jac[(r, alpha_col + nb * step + bi)] = e.as_array()[c];
                }
            }
            rhs[r] = b;
        }
    }
    let w = inst.lambda.sqrt();
    for i in 0..nb * k {
        jac[(3 * k + i, alpha_col + i)] = w;
    }
    Ok(System { jac, rhs, basis, alpha_col })
}

/// Solves `JᵀJ x = Jᵀb` after equilibrating the columns of `J` to unit norm,
/// which keeps the α column (scaled by ‖Δp‖) from dominating the conditioning.
fn solve_normal(sys: &System) -> Result<DVector<f64>> {
    let mut jac = sys.jac.clone();
    let scales: Vec<f64> = jac
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 { 1.0 / n } else { 1.0 }
        })
        .collect();
    for (mut col, s) in jac.column_iter_mut().zip(&scales) {
        col *= *s;
    }
    let normal = jac.transpose() * &jac;
    let b = jac.transpose() * &sys.rhs;
    let y = match normal.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => {
            let n = normal.nrows();
            let ridged = normal + DMatrix::<f64>::identity(n, n) * RIDGE;
            ridged
                .cholesky()
                .ok_or(PpcError::Degenerate("normal equations are not positive definite"))?
                .solve(&b)
        }
    };
    Ok(DVector::from_iterator(y.len(), y.iter().zip(&scales).map(|(v, s)| v * s)))
}

fn solve(inst: &CostInstance, unknowns: Unknowns) -> Result<CostBreakdown> {
    let sys = assemble(inst, &unknowns)?;
    let x = solve_normal(&sys)?;
    let alpha = match unknowns {
        Unknowns::FixedAlpha(a) => a,
        _ => x[0],
    };
    let nb = sys.basis.len();
    let deltas: Vec<Vec3> = (0..inst.k)
        .map(|step| {
            sys.basis
                .iter()
                .enumerate()
                .map(|(bi, e)| *e * x[sys.alpha_col + nb * step + bi])
                .sum()
        })
        .collect();
    evaluate_cost(inst, alpha, &deltas)
}

/// Unconstrained joint minimizer over `(α, δ)`.
pub fn solve_joint(inst: &CostInstance) -> Result<CostBreakdown> {
    if inst.delta_p.norm() < EPSILON_NORM {
        return Err(PpcError::Degenerate("plan delta below the degeneracy floor"));
    }
    solve(inst, Unknowns::Joint)
}

/// Minimizer over `δ` with α pinned (the clamped regime pins α = 1).
pub fn solve_offsets_fixed_alpha(inst: &CostInstance, alpha: f64) -> Result<CostBreakdown> {
    solve(inst, Unknowns::FixedAlpha(alpha))
}

/// Joint minimizer with every offset restricted to the plane perpendicular
/// to Δp. This is the subspace on which the closed-form channels decompose.
pub fn solve_joint_perpendicular(inst: &CostInstance) -> Result<CostBreakdown> {
    solve(inst, Unknowns::PerpendicularOffsets)
}
