//! Dynamics-blind stale-snapshot follower standing in for a chunking policy.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ActionStep, ChunkPlan, Vec3};

/// Gripper command for an open gripper.
pub const GRIPPER_OPEN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollowerParams {
    /// World-space cap on each planned step (m/tick).
    pub max_policy_step: f64,
    /// Age of the object snapshot the plan is built from.
    pub planning_latency_ticks: u64,
}

impl Default for FollowerParams {
    fn default() -> Self {
        Self {
            max_policy_step: 0.02,
            planning_latency_ticks: 0,
        }
    }
}

/// Straight-line plan from `tcp` to `snapshot` in `horizon` equal world steps,
/// each capped at `max_policy_step`, emitted in action space (world / `c_pd`).
pub fn query_follower(tcp: Vec3, snapshot: Vec3, params: &FollowerParams, horizon: usize, c_pd: f64) -> Result<ChunkPlan> {
    let world = ((snapshot - tcp) * (1.0 / horizon.max(1) as f64)).clamp_norm(params.max_policy_step);
    let step = ActionStep {
        translation: world * (1.0 / c_pd),
        rotation: [0.0; 3],
        gripper: GRIPPER_OPEN,
    };
    ChunkPlan::new(vec![step; horizon.max(1)])
}
