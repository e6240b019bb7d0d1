//! Perception noise on the velocity signal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::model::{DisturbanceEstimate, Vec3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Standard deviation of the multiplicative magnitude factor.
    pub sigma_v: f64,
    /// Standard deviation of the rotation angle, degrees.
    pub sigma_theta_deg: f64,
}

impl NoiseParams {
    pub fn is_off(&self) -> bool {
        self.sigma_v == 0.0 && self.sigma_theta_deg == 0.0
    }
}

/// Rotates `dir` by `angle` about a random axis perpendicular to it.
fn rotate_perpendicular<R: Rng + ?Sized>(dir: Vec3, angle: f64, rng: &mut R) -> Vec3 {
    let axis = loop {
        let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
        let u = Vec3::new(x, y, z);
        let perp = u - dir * u.dot(&dir);
        if let Some(a) = perp.normalized(1e-6) {
            break a;
        }
    };
    dir * angle.cos() + axis.cross(&dir) * angle.sin()
}

/// Magnitude scaled by `max(0, 1 + N(0, σ_v))`; direction rotated by
/// `N(0, σ_θ)`. Acceleration and λ pass through.
pub fn inject_noise<R: Rng + ?Sized>(d: &DisturbanceEstimate, noise: &NoiseParams, rng: &mut R) -> DisturbanceEstimate {
    if noise.is_off() {
        return *d;
    }
    let scale = 1.0 + noise.sigma_v * rng.sample::<f64, _>(StandardNormal);
    let angle = noise.sigma_theta_deg.to_radians() * rng.sample::<f64, _>(StandardNormal);
    let magnitude = d.velocity.norm() * scale.max(0.0);
    let Some(dir) = d.velocity.normalized(f64::MIN_POSITIVE) else {
        return *d;
    };
    let dir = rotate_perpendicular(dir, angle, rng);
    DisturbanceEstimate {
        velocity: dir * magnitude,
        ..*d
    }
}
