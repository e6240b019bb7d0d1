//! Hierarchical two-EMA latch.
//!
//! A slow outer EMA `C` tracks the chronic rate of direction-shift triggers.
//! Its sticky factor `s = C / (C + R_TH)` slows the decay of a fast inner EMA
//! `L`. The latch fires while `L > L_th` and the wrapper then caps `K_exec`
//! at `T/4`. Updates happen once per chunk reset.

use serde::{Deserialize, Serialize};

use crate::model::{LatchConstants, Vec3};

/// Cosine below which a velocity change counts as a direction shift.
pub const TRIGGER_COSINE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatchState {
    inner: f64,
    outer: f64,
    last_velocity: Option<Vec3>,
    constants: LatchConstants,
    eps: f64,
}

impl LatchState {
    pub fn new(constants: LatchConstants, eps: f64) -> Self {
        Self {
            inner: 0.0,
            outer: 0.0,
            last_velocity: None,
            constants,
            eps,
        }
    }

    pub fn inner_level(&self) -> f64 {
        self.inner
    }

    pub fn outer_level(&self) -> f64 {
        self.outer
    }

    pub fn last_velocity(&self) -> Option<Vec3> {
        self.last_velocity
    }

    pub fn constants(&self) -> &LatchConstants {
        &self.constants
    }

    pub fn sticky_factor(&self) -> f64 {
        let denom = self.outer + self.constants.r_th;
        if denom > 0.0 {
            self.outer / denom
        } else {
            0.0
        }
    }

    /// Clamped cosine similarity between the stored and the current velocity;
    /// `None` when either norm is below the degeneracy floor.
    pub fn direction_trust(&self, v_now: &Vec3) -> Option<f64> {
        let prev = self.last_velocity?;
        let (np, nn) = (prev.norm(), v_now.norm());
        if np < self.eps || nn < self.eps {
            return None;
        }
        Some((prev.dot(v_now) / (np * nn)).max(0.0))
    }

    /// Direction-shift trigger. A pause (near-zero velocity) neither triggers
    /// nor replaces the stored direction.
    pub fn trigger(&mut self, v_now: Vec3) -> bool {
        let fired = self
            .direction_trust(&v_now)
            .is_some_and(|rho| rho < TRIGGER_COSINE);
        if v_now.norm() >= self.eps {
            self.last_velocity = Some(v_now);
        }
        fired
    }

    /// Advances both EMAs by one chunk and returns the latch output.
    pub fn update(&mut self, triggered: bool) -> bool {
        let LatchConstants { beta_in, beta_out, l_th, .. } = self.constants;
        let tau = if triggered { 1.0 } else { 0.0 };
        self.outer = beta_out * tau + (1.0 - beta_out) * self.outer;
        let s = self.sticky_factor();
        self.inner = if triggered {
            beta_in + (1.0 - beta_in) * self.inner
        } else {
            (1.0 - beta_in * (1.0 - s)) * self.inner
        };
        self.inner = self.inner.clamp(0.0, 1.0);
        self.outer = self.outer.clamp(0.0, 1.0);
        self.inner > l_th
    }

    pub fn is_fired(&self) -> bool {
        self.inner > self.constants.l_th
    }

    /// Clears both levels and the stored direction.
    pub fn reset_on_grasp(&mut self) {
        self.inner = 0.0;
        self.outer = 0.0;
        self.last_velocity = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_latch_constants, WrapperConfig, EPSILON_NORM};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fresh() -> LatchState {
        LatchState::new(derive_latch_constants(&WrapperConfig::default()), EPSILON_NORM)
    }

    #[test]
    fn trigger_cases() {
        let u = 0.003;
        let mut s = fresh();
        assert!(!s.trigger(Vec3::new(u, 0.0, 0.0)), "no history");
        assert!(!s.trigger(Vec3::new(u, 0.0, 0.0)));
        assert!(s.trigger(Vec3::new(-u, 0.0, 0.0)));

        let mut s = fresh();
        s.trigger(Vec3::new(u, 0.0, 0.0));
        let diag = Vec3::new(u, u, 0.0) * std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.direction_trust(&diag).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(!s.trigger(diag));
    }

    #[test]
    fn pauses_do_not_trigger_or_overwrite() {
        let mut s = fresh();
        s.trigger(Vec3::new(0.003, 0.0, 0.0));
        assert!(!s.trigger(Vec3::ZERO));
        assert_eq!(s.last_velocity(), Some(Vec3::new(0.003, 0.0, 0.0)));
        assert!(s.trigger(Vec3::new(0.0, 0.003, 0.0)));
    }

    #[test]
    fn quiet_latch_never_fires() {
        let mut s = fresh();
        for _ in 0..50 {
            assert!(!s.update(false));
        }
        assert_eq!(s.inner_level(), 0.0);
    }

    #[test]
    fn chronic_triggers_saturate() {
        let mut s = fresh();
        let mut prev = 0.0;
        for _ in 0..10 {
            assert!(s.update(true));
            assert!(s.inner_level() > prev);
            prev = s.inner_level();
        }
        assert_abs_diff_eq!(s.inner_level(), 1.0 - 0.7f64.powi(10), epsilon = 1e-12);
        assert!(s.sticky_factor() > 0.5);
    }

    #[test]
    fn standard_decay_sustains_two_chunks() {
        // with the sticky factor held at zero (R_TH → ∞) an isolated trigger
        // gives L_n = β(1−β)^n and fires for n ∈ {0, 1} only
        for beta_in in [0.1, 0.3, 0.5, 0.9] {
            let base = derive_latch_constants(&WrapperConfig {
                beta_in,
                ..Default::default()
            });
            let constants = LatchConstants {
                r_th: f64::INFINITY,
                ..base
            };
            let mut s = LatchState::new(constants, EPSILON_NORM);
            let mut fired = vec![s.update(true)];
            for _ in 0..6 {
                fired.push(s.update(false));
            }
            assert_eq!(fired, vec![true, true, false, false, false, false, false], "beta_in={beta_in}");
        }
    }

    #[test]
    fn grasp_reset_restores_fresh_state() {
        let mut s = fresh();
        s.trigger(Vec3::new(0.01, 0.0, 0.0));
        s.update(true);
        s.update(true);
        s.reset_on_grasp();
        assert_eq!(s, fresh());

        let mut a = fresh();
        a.reset_on_grasp();
        assert_eq!(a, fresh());

        let mut b = fresh();
        assert_eq!(s.update(true), b.update(true));
        assert_eq!(s, b);
    }

    proptest! {
        #[test]
        fn levels_stay_in_unit_interval(seq in proptest::collection::vec(any::<bool>(), 1..200)) {
            let mut s = fresh();
            for t in seq {
                s.update(t);
                prop_assert!((0.0..=1.0).contains(&s.inner_level()));
                prop_assert!((0.0..=1.0).contains(&s.outer_level()));
            }
        }

        #[test]
        fn decay_slows_with_outer_level(inner in 0.0f64..1.0, c1 in 0.0f64..1.0, c2 in 0.0f64..1.0) {
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let mut a = fresh();
            let mut b = fresh();
            a.inner = inner; a.outer = lo;
            b.inner = inner; b.outer = hi;
            a.update(false);
            b.update(false);
            prop_assert!(a.inner_level() <= b.inner_level());
        }
    }
}
