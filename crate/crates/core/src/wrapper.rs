//! Per-chunk composition of sensing, gating, pace, path and latch.
//!
//! Chunk translations are action-space deltas; the controller moves the TCP by
//! `c_pd` times the action. α* scales action-space translations directly and
//! the world-space offsets δ_k are divided by `c_pd` before they are added.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{PpcError, Result};
use crate::latch::LatchState;
use crate::model::{derive_latch_constants, ActionStep, ChunkPlan, DisturbanceEstimate, Vec3, WrapperConfig};
use crate::pace::{self, ResidualDecomposition};
use crate::path;

/// One observation at a control tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub tick: u64,
    /// Ground-truth object position (m).
    pub object_position: Vec3,
    /// Velocity field reported by the simulator (m/s). Only the ν gate reads it.
    pub reported_velocity: Vec3,
    pub tcp_position: Vec3,
}

/// Ablation switches. Defaults run the full operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrapperOptions {
    pub latch_enabled: bool,
    pub second_order: bool,
    /// Pins α instead of using the closed form.
    pub fixed_alpha: Option<f64>,
    /// Replaces the derived outer EMA rate.
    pub beta_out_override: Option<f64>,
    /// Path-channel regularizer; 1 under the ground-truth velocity signal.
    pub lambda: f64,
}

impl Default for WrapperOptions {
    fn default() -> Self {
        Self {
            latch_enabled: true,
            second_order: true,
            fixed_alpha: None,
            beta_out_override: None,
            lambda: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateFlags {
    pub nu_bypass: bool,
    pub grasp_bypass: bool,
    pub latch_fired: bool,
    pub alpha_clamped: bool,
    /// The Lucas branch ran with λ ≠ 1.
    pub lucas_off_unit_lambda: bool,
}

/// Inputs decided outside the closed forms for one chunk reset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChunkContext {
    /// TCP position at the chunk reset, used for the workspace clamp.
    pub tcp: Vec3,
    pub grasp_near: bool,
    pub nu_bypass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOutput {
    pub corrected_steps: Vec<ActionStep>,
    pub alpha_star: f64,
    pub offsets: Vec<Vec3>,
    pub k_exec: usize,
    pub gates: GateFlags,
    pub residual: Option<ResidualDecomposition>,
    pub timing_ns: u64,
}

/// Per-tick target displacement from the last frames, capped at `V_max · dt`.
///
/// With three or more frames the acceleration is the difference of the last
/// two velocity estimates, except when the older pair was a teleport (reported
/// velocity bit-zero with nonzero displacement), where it is set to zero.
pub fn estimate_disturbance(frames: &[SensorFrame], cfg: &WrapperConfig) -> Result<DisturbanceEstimate> {
    let n = frames.len();
    if n < 2 {
        return Err(PpcError::NotEnoughSamples { needed: 2, got: n });
    }
    let velocity_between = |a: &SensorFrame, b: &SensorFrame| -> Result<Vec3> {
        if b.tick <= a.tick {
            return Err(PpcError::TickOrder { prev: a.tick, now: b.tick });
        }
        Ok((b.object_position - a.object_position)
            .checked("object displacement")?
            .clamp_norm(cfg.step_cap()))
    };
    let (prev, now) = (&frames[n - 2], &frames[n - 1]);
    let velocity = velocity_between(prev, now)?;
    let acceleration = if n >= 3 && !nu_gate(&frames[n - 3], prev, cfg) {
        velocity - velocity_between(&frames[n - 3], prev)?
    } else {
        Vec3::ZERO
    };
    DisturbanceEstimate::new(velocity, acceleration, 1.0)
}

/// Representative per-step plan delta in world space.
///
/// Uses the realized TCP motion over the last `k` ticks once `k + 1` samples
/// exist; otherwise the mean of the first `k` chunk translations times `c_pd`.
pub fn estimate_plan_delta(tcp_history: &[Vec3], first_chunk: &ChunkPlan, cfg: &WrapperConfig, k: usize) -> Result<Vec3> {
    if first_chunk.is_empty() {
        return Err(PpcError::EmptyChunk);
    }
    if tcp_history.is_empty() {
        return Err(PpcError::NotEnoughSamples { needed: 1, got: 0 });
    }
    let n = tcp_history.len();
    if k >= 1 && n > k {
        return Ok((tcp_history[n - 1] - tcp_history[n - 1 - k]) * (1.0 / k as f64));
    }
    let window = first_chunk.window(k.max(1));
    let mean: Vec3 = window.iter().map(|s| s.translation).sum::<Vec3>() * (1.0 / window.len() as f64);
    Ok(mean * cfg.c_pd)
}

/// Teleport detector: the reported velocity reads exactly zero while the
/// object was observed to move.
pub fn nu_gate(prev: &SensorFrame, now: &SensorFrame, cfg: &WrapperConfig) -> bool {
    now.reported_velocity.is_zero() && (now.object_position - prev.object_position).norm() > cfg.epsilon_norm
}

fn passthrough(window: &[ActionStep], k: usize) -> Vec<ActionStep> {
    window[..k].to_vec()
}

/// Writes the corrected translations while enforcing the per-step speed cap
/// and the workspace box on the cumulative TCP target. Steps that no clamp
/// touches keep their exact bits.
fn write_steps(
    window: &[ActionStep],
    k: usize,
    alpha: f64,
    offsets: &[Vec3],
    ctx: &ChunkContext,
    cfg: &WrapperConfig,
    identity: bool,
) -> Vec<ActionStep> {
    let mut target = ctx.tcp;
    window[..k]
        .iter()
        .enumerate()
        .map(|(i, src)| {
            let mut action = if identity {
                src.translation
            } else {
                src.translation * alpha + offsets[i] * (1.0 / cfg.c_pd)
            };
            let world = action * cfg.c_pd;
            let capped = world.clamp_norm(cfg.step_cap());
            let next = (target + capped).clamp_box(&cfg.workspace_min, &cfg.workspace_max);
            if capped != world || next != target + world {
                action = (next - target) * (1.0 / cfg.c_pd);
            }
            target = next;
            ActionStep {
                translation: action,
                rotation: src.rotation,
                gripper: src.gripper,
            }
        })
        .collect()
}

/// The full per-chunk correction.
///
/// Order: grasp bypass (latch reset), ν bypass (latch frozen), latch trigger
/// and update, α*, `K_exec`, offsets over `K_exec` steps, then the speed and
/// workspace clamps. Rotation and gripper are copied verbatim.
pub fn correct_chunk(
    chunk: &ChunkPlan,
    d: &DisturbanceEstimate,
    delta_p: Vec3,
    latch: &mut LatchState,
    ctx: &ChunkContext,
    cfg: &WrapperConfig,
    opts: &WrapperOptions,
) -> Result<CorrectionOutput> {
    let started = Instant::now();
    let window = chunk.window(cfg.horizon);
    let t = window.len();
    if t < cfg.k_floor {
        return Err(PpcError::ChunkTooShort { len: t, k: cfg.k_floor });
    }
    let finish = |mut out: CorrectionOutput| {
        out.timing_ns = started.elapsed().as_nanos() as u64;
        Ok(out)
    };

    if ctx.grasp_near || ctx.nu_bypass {
        if ctx.grasp_near {
            latch.reset_on_grasp();
        }
        let k = pace::k_exec_for_window(1.0, t, cfg, false);
        return finish(CorrectionOutput {
            corrected_steps: passthrough(window, k),
            alpha_star: 1.0,
            offsets: vec![Vec3::ZERO; k],
            k_exec: k,
            gates: GateFlags {
                grasp_bypass: ctx.grasp_near,
                nu_bypass: ctx.nu_bypass && !ctx.grasp_near,
                ..Default::default()
            },
            residual: None,
            timing_ns: 0,
        });
    }

    let fired = if opts.latch_enabled {
        let tau = latch.trigger(d.velocity);
        latch.update(tau)
    } else {
        false
    };

    let mut signal = *d;
    if !opts.second_order {
        signal.acceleration = Vec3::ZERO;
    }
    let res = match opts.fixed_alpha {
        Some(alpha) => pace::residual_for_alpha(delta_p, &signal, alpha, cfg.k_floor, cfg.epsilon_norm),
        None => pace::compute_alpha(delta_p, &signal, cfg.k_floor, cfg.epsilon_norm),
    };
    let k = pace::k_exec_for_window(res.alpha_star, t, cfg, fired);
    let profile = path::compute_offsets(&res, k, signal.lambda)?;
    let identity = res.alpha_star == 1.0 && profile.is_zero();
    let corrected_steps = write_steps(window, k, res.alpha_star, &profile.offsets, ctx, cfg, identity);

    finish(CorrectionOutput {
        corrected_steps,
        alpha_star: res.alpha_star,
        offsets: profile.offsets,
        k_exec: k,
        gates: GateFlags {
            latch_fired: fired,
            alpha_clamped: res.clamped,
            lucas_off_unit_lambda: profile.lucas_off_unit_lambda,
            ..Default::default()
        },
        residual: Some(res),
        timing_ns: 0,
    })
}

/// What the wrapper sensed at a chunk reset, before any perturbation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sensing {
    pub disturbance: DisturbanceEstimate,
    pub delta_p: Vec3,
    pub context: ChunkContext,
}

/// Per-episode wrapper state: latch and recent observations.
#[derive(Clone, Debug)]
pub struct PpcWrapper {
    cfg: WrapperConfig,
    opts: WrapperOptions,
    latch: LatchState,
    frames: VecDeque<SensorFrame>,
    tcp_history: Vec<Vec3>,
    nu_pending: bool,
}

impl PpcWrapper {
    pub fn new(cfg: WrapperConfig, opts: WrapperOptions) -> Result<Self> {
        cfg.validate()?;
        if !(opts.lambda > 0.0 && opts.lambda.is_finite()) {
            return Err(PpcError::InvalidLambda(opts.lambda));
        }
        let mut constants = derive_latch_constants(&cfg);
        if let Some(b) = opts.beta_out_override {
            constants = constants.with_beta_out(b);
        }
        Ok(Self {
            latch: LatchState::new(constants, cfg.epsilon_norm),
            cfg,
            opts,
            frames: VecDeque::with_capacity(3),
            tcp_history: Vec::new(),
            nu_pending: false,
        })
    }

    pub fn config(&self) -> &WrapperConfig {
        &self.cfg
    }

    pub fn latch(&self) -> &LatchState {
        &self.latch
    }

    /// Records one tick. Ticks must be strictly increasing. A teleport seen
    /// on any tick arms the ν bypass for the next chunk reset.
    pub fn observe(&mut self, frame: SensorFrame) -> Result<()> {
        if let Some(last) = self.frames.back() {
            if frame.tick <= last.tick {
                return Err(PpcError::TickOrder { prev: last.tick, now: frame.tick });
            }
            self.nu_pending |= nu_gate(last, &frame, &self.cfg);
        }
        frame.object_position.checked("object position")?;
        frame.tcp_position.checked("tcp position")?;
        if self.frames.len() == 3 {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        self.tcp_history.push(frame.tcp_position);
        Ok(())
    }

    /// Sensing for the chunk about to be corrected.
    pub fn sense(&self, chunk: &ChunkPlan) -> Result<Sensing> {
        let now = *self.frames.back().ok_or(PpcError::NotEnoughSamples { needed: 1, got: 0 })?;
        let frames: Vec<SensorFrame> = self.frames.iter().copied().collect();
        let mut disturbance = if frames.len() >= 2 {
            estimate_disturbance(&frames, &self.cfg)?
        } else {
            DisturbanceEstimate::zero()
        };
        disturbance.lambda = self.opts.lambda;
        let delta_p = estimate_plan_delta(&self.tcp_history, chunk, &self.cfg, self.cfg.k_floor)?;
        let grasp_near = (now.tcp_position - now.object_position).norm() < self.cfg.r_grip;
        Ok(Sensing {
            disturbance,
            delta_p,
            context: ChunkContext {
                tcp: now.tcp_position,
                grasp_near,
                nu_bypass: self.nu_pending,
            },
        })
    }

    /// Corrects `chunk` from (possibly perturbed) sensing and disarms the
    /// ν bypass.
    pub fn apply(&mut self, chunk: &ChunkPlan, sensing: &Sensing) -> Result<CorrectionOutput> {
        self.nu_pending = false;
        correct_chunk(
            chunk,
            &sensing.disturbance,
            sensing.delta_p,
            &mut self.latch,
            &sensing.context,
            &self.cfg,
            &self.opts,
        )
    }

    pub fn correct(&mut self, chunk: &ChunkPlan) -> Result<CorrectionOutput> {
        let sensing = self.sense(chunk)?;
        self.apply(chunk, &sensing)
    }
}
