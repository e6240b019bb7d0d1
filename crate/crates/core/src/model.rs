//! Geometric value types and the wrapper configuration shared by every other
//! module.
//!
//! All displacements are stored per env-step. Quantities sensed in m/s are
//! multiplied by `dt` exactly once, at the sensor boundary.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{PpcError, Result};

/// Floor below which a vector norm is treated as zero.
pub const EPSILON_NORM: f64 = 1e-9;

/// A point or displacement in meters (or meters per tick).
///
/// Fields are public for arithmetic convenience; values entering the system
/// from outside should go through [`Vec3::try_new`] so that NaN and infinity
/// are rejected at the boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self { x, y, z }.checked("Vec3")
    }

    /// Returns `self` if every component is finite.
    pub fn checked(self, what: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(PpcError::NonFinite(what))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn is_zero(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    /// Unit vector, or `None` when the norm is below `eps`.
    pub fn normalized(&self, eps: f64) -> Option<Vec3> {
        let n = self.norm();
        (n >= eps).then(|| *self * (1.0 / n))
    }

    /// Scales the vector down so that its norm does not exceed `max_norm`.
    /// Vectors already within the bound are returned unchanged (bit-exact).
    pub fn clamp_norm(self, max_norm: f64) -> Vec3 {
        let n = self.norm();
        if n > max_norm {
            self * (max_norm / n)
        } else {
            self
        }
    }

    /// Component-wise clamp into the box `[lo, hi]`.
    pub fn clamp_box(self, lo: &Vec3, hi: &Vec3) -> Vec3 {
        Vec3::new(
            self.x.clamp(lo.x, hi.x),
            self.y.clamp(lo.y, hi.y),
            self.z.clamp(lo.z, hi.z),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::iter::Sum for Vec3 {
    fn sum<I: Iterator<Item = Vec3>>(iter: I) -> Vec3 {
        iter.fold(Vec3::ZERO, |acc, v| acc + v)
    }
}

/// One entry of a 7-D action chunk: arm translation, axis-angle rotation and
/// a gripper command. Only `translation` is ever rewritten by the wrapper.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    /// Action-space translation delta; the controller maps it to world space
    /// by multiplying with `WrapperConfig::c_pd`.
    pub translation: Vec3,
    pub rotation: [f64; 3],
    pub gripper: f64,
}

impl ActionStep {
    pub fn translate(translation: Vec3) -> Self {
        Self {
            translation,
            ..Default::default()
        }
    }
}

/// The sequence a policy emits from one inference call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    steps: Vec<ActionStep>,
}

impl ChunkPlan {
    pub fn new(steps: Vec<ActionStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(PpcError::EmptyChunk);
        }
        for s in &steps {
            s.translation.checked("chunk translation")?;
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[ActionStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The first `t` steps (or all of them when the chunk is shorter).
    pub fn window(&self, t: usize) -> &[ActionStep] {
        &self.steps[..self.steps.len().min(t)]
    }
}

/// Per-tick disturbance signal handed to the pace and path channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEstimate {
    /// Target displacement per env-step (the product v·d̂).
    pub velocity: Vec3,
    /// Per-step change of `velocity` (the product a·d̂_a).
    pub acceleration: Vec3,
    /// Path-channel regularizer, strictly positive.
    pub lambda: f64,
}

impl DisturbanceEstimate {
    pub fn new(velocity: Vec3, acceleration: Vec3, lambda: f64) -> Result<Self> {
        velocity.checked("disturbance velocity")?;
        acceleration.checked("disturbance acceleration")?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PpcError::InvalidLambda(lambda));
        }
        Ok(Self {
            velocity,
            acceleration,
            lambda,
        })
    }

    pub fn zero() -> Self {
        Self {
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            lambda: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.velocity.is_zero() && self.acceleration.is_zero()
    }
}

/// Wrapper constants. Defaults reproduce the reference deployment: a 16-step
/// chunk window at 20 Hz, `K_exec` between 2 and 10, and an 80 cm workspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapperConfig {
    /// Model-steps per chunk consumed by the wrapper.
    pub horizon: usize,
    /// `K_exec` floor.
    pub k_floor: usize,
    /// `K_exec` ceiling.
    pub k_ceiling: usize,
    pub beta_in: f64,
    /// Maximum TCP speed in m/s.
    pub v_max: f64,
    /// Control period in seconds.
    pub dt: f64,
    /// Controller response factor mapping action-space deltas to meters.
    pub c_pd: f64,
    /// Grip radius in meters.
    pub r_grip: f64,
    pub workspace_min: Vec3,
    pub workspace_max: Vec3,
    pub epsilon_norm: f64,
    /// Process noise of the confidence estimator. Recorded only; the
    /// estimator itself is not part of this crate.
    pub kalman_q: f64,
    /// Mean-reversion rate of the confidence estimator. Recorded only.
    pub beta_revert: f64,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        Self {
            horizon: 16,
            k_floor: 2,
            k_ceiling: 10,
            beta_in: 0.3,
            v_max: 1.0,
            dt: 0.05,
            c_pd: 0.04,
            r_grip: 0.03,
            workspace_min: Vec3::new(-0.4, -0.4, 0.0),
            workspace_max: Vec3::new(0.4, 0.4, 0.3),
            epsilon_norm: EPSILON_NORM,
            kalman_q: 1.8,
            beta_revert: 0.0,
        }
    }
}

impl WrapperConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PpcError::InvalidConfig(m.to_string()));
        if self.k_floor == 0 {
            return bad("k_floor must be positive");
        }
        if !(self.k_floor <= self.k_ceiling && self.k_ceiling <= self.horizon) {
            return bad("require k_floor <= k_ceiling <= horizon");
        }
        if !(self.beta_in > 0.0 && self.beta_in < 1.0) {
            return bad("beta_in must lie in (0, 1)");
        }
        for (name, v) in [
            ("v_max", self.v_max),
            ("dt", self.dt),
            ("c_pd", self.c_pd),
            ("r_grip", self.r_grip),
            ("epsilon_norm", self.epsilon_norm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PpcError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let (lo, hi) = (self.workspace_min, self.workspace_max);
        if !(lo.is_finite() && hi.is_finite() && lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
            return bad("workspace box must be finite and non-empty");
        }
        Ok(())
    }

    /// Per-step translation cap in meters (`V_max · dt`).
    pub fn step_cap(&self) -> f64 {
        self.v_max * self.dt
    }
}

/// Latch constants derived from `(β_in, K, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatchConstants {
    pub beta_in: f64,
    pub beta_out: f64,
    /// Firing threshold on the inner level.
    pub l_th: f64,
    /// Sticky-factor reference on the outer level.
    pub r_th: f64,
}

impl LatchConstants {
    /// Same constants with the outer rate replaced (used by sweeps).
    pub fn with_beta_out(self, beta_out: f64) -> Self {
        Self { beta_out, ..self }
    }
}

/// Derives the outer EMA rate from the chunk geometry (outer half-life equal
/// to `T/K` chunks) and the threshold that sustains an isolated trigger for two
/// chunks under standard decay.
pub fn derive_latch_constants(cfg: &WrapperConfig) -> LatchConstants {
    let ratio = cfg.k_floor as f64 / cfg.horizon as f64;
    let beta_out = 1.0 - 2f64.powf(-ratio);
    let keep = 1.0 - cfg.beta_in;
    let l_th = cfg.beta_in * keep * keep;
    LatchConstants {
        beta_in: cfg.beta_in,
        beta_out,
        l_th,
        r_th: l_th,
    }
}
