//! Point-mass target motion regimes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::PpcError;
use crate::model::Vec3;

pub const UNIFORM_EASY_SPEED: (f64, f64) = (0.01, 0.02);
pub const UNIFORM_MEDIUM_SPEED: (f64, f64) = (0.02, 0.04);
pub const UNIFORM_HARD_SPEED: (f64, f64) = (0.04, 0.08);
pub const ACCEL_BASE_SPEED: (f64, f64) = (0.02, 0.03);
pub const ACCEL_EASY_MAG: (f64, f64) = (0.02, 0.03);
pub const ACCEL_MEDIUM_MAG: (f64, f64) = (0.03, 0.05);
pub const ACCEL_HARD_MAG: (f64, f64) = (0.05, 0.09);
pub const RANDOM_WALK_SPEED: f64 = 0.05;
pub const RANDOM_WALK_HOLD: (u32, u32) = (5, 12);
pub const STOP_GO_SPEED: f64 = 0.07;
pub const STOP_GO_MOVE: (u32, u32) = (3, 7);
pub const STOP_GO_PAUSE: (u32, u32) = (3, 6);
pub const TELEPORT_FIRST: (u64, u64) = (3, 10);
pub const TELEPORT_SECOND: (u64, u64) = (80, 140);
pub const TELEPORT_DISTANCE: (f64, f64) = (0.08, 0.12);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    Static,
    UniformEasy,
    UniformMedium,
    UniformHard,
    AccelEasy,
    AccelMedium,
    AccelHard,
    RandomWalk,
    StopAndGo,
    Teleport,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 10] = [
        RegimeKind::Static,
        RegimeKind::UniformEasy,
        RegimeKind::UniformMedium,
        RegimeKind::UniformHard,
        RegimeKind::AccelEasy,
        RegimeKind::AccelMedium,
        RegimeKind::AccelHard,
        RegimeKind::RandomWalk,
        RegimeKind::StopAndGo,
        RegimeKind::Teleport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::Static => "Static",
            RegimeKind::UniformEasy => "UniformEasy",
            RegimeKind::UniformMedium => "UniformMedium",
            RegimeKind::UniformHard => "UniformHard",
            RegimeKind::AccelEasy => "AccelEasy",
            RegimeKind::AccelMedium => "AccelMedium",
            RegimeKind::AccelHard => "AccelHard",
            RegimeKind::RandomWalk => "RandomWalk",
            RegimeKind::StopAndGo => "StopAndGo",
            RegimeKind::Teleport => "Teleport",
        }
    }

    /// Regimes whose target moves continuously (no discontinuities).
    pub fn is_continuous(self) -> bool {
        self != RegimeKind::Teleport
    }

    fn uniform_speed(self) -> Option<(f64, f64)> {
        match self {
            RegimeKind::UniformEasy => Some(UNIFORM_EASY_SPEED),
            RegimeKind::UniformMedium => Some(UNIFORM_MEDIUM_SPEED),
            RegimeKind::UniformHard => Some(UNIFORM_HARD_SPEED),
            _ => None,
        }
    }

    fn accel_magnitude(self) -> Option<(f64, f64)> {
        match self {
            RegimeKind::AccelEasy => Some(ACCEL_EASY_MAG),
            RegimeKind::AccelMedium => Some(ACCEL_MEDIUM_MAG),
            RegimeKind::AccelHard => Some(ACCEL_HARD_MAG),
            _ => None,
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeKind {
    type Err = PpcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        RegimeKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == key)
            .ok_or_else(|| PpcError::InvalidConfig(format!("unknown regime `{s}`")))
    }
}

/// Parses a comma-separated regime list; `all` expands to every regime.
pub fn parse_regime_list(s: &str) -> Result<Vec<RegimeKind>, PpcError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(RegimeKind::ALL);
        } else {
            out.push(part.parse()?);
        }
    }
    if out.is_empty() {
        return Err(PpcError::InvalidConfig("empty regime list".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeleportEvent {
    pub tick: u64,
    pub distance: f64,
    pub direction: Vec3,
}

/// A regime with its per-episode parameters. Speeds are in m/s and
/// accelerations in m/s².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionRegime {
    pub kind: RegimeKind,
    pub speed: f64,
    pub direction: Vec3,
    pub acceleration: Vec3,
    pub teleports: Vec<TeleportEvent>,
}

/// Mutable kinematic state of the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub position: Vec3,
    /// Current velocity in m/s.
    pub velocity: Vec3,
    /// Ticks left in the current direction hold or stop-and-go phase.
    pub phase_left: u32,
    pub moving: bool,
    /// Lengths of completed and current phases, in order.
    pub phase_log: Vec<u32>,
}

pub fn planar_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    Vec3::new(theta.cos(), theta.sin(), 0.0)
}

fn range<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

fn ticks<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (u32, u32)) -> u32 {
    rng.random_range(lo..=hi)
}

impl MotionRegime {
    pub fn sample<R: Rng + ?Sized>(kind: RegimeKind, rng: &mut R) -> Self {
        let mut regime = MotionRegime {
            kind,
            speed: 0.0,
            direction: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            teleports: Vec::new(),
        };
        match kind {
            RegimeKind::Static => {}
            RegimeKind::UniformEasy | RegimeKind::UniformMedium | RegimeKind::UniformHard => {
                regime.speed = range(rng, kind.uniform_speed().unwrap_or_default());
                regime.direction = planar_direction(rng);
            }
            RegimeKind::AccelEasy | RegimeKind::AccelMedium | RegimeKind::AccelHard => {
                regime.speed = range(rng, ACCEL_BASE_SPEED);
                regime.direction = planar_direction(rng);
                let mag = range(rng, kind.accel_magnitude().unwrap_or_default());
                regime.acceleration = planar_direction(rng) * mag;
            }
            RegimeKind::RandomWalk => {
                regime.speed = RANDOM_WALK_SPEED;
                regime.direction = planar_direction(rng);
            }
            RegimeKind::StopAndGo => {
                regime.speed = STOP_GO_SPEED;
                regime.direction = planar_direction(rng);
            }
            RegimeKind::Teleport => {
                for window in [TELEPORT_FIRST, TELEPORT_SECOND] {
                    let tick = rng.random_range(window.0..=window.1);
                    let distance = range(rng, TELEPORT_DISTANCE);
                    let direction = planar_direction(rng);
                    regime.teleports.push(TeleportEvent { tick, distance, direction });
                }
            }
        }
        regime
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, position: Vec3, rng: &mut R) -> TargetState {
        let mut state = TargetState {
            position,
            velocity: self.direction * self.speed,
            phase_left: 0,
            moving: self.speed > 0.0,
            phase_log: Vec::new(),
        };
        let hold = match self.kind {
            RegimeKind::RandomWalk => Some(ticks(rng, RANDOM_WALK_HOLD)),
            RegimeKind::StopAndGo => Some(ticks(rng, STOP_GO_MOVE)),
            _ => None,
        };
        if let Some(h) = hold {
            state.phase_left = h;
            state.phase_log.push(h);
        }
        state
    }
}

/// Advances the target by one tick of length `dt` and returns the new
/// position with the reported velocity (m/s). On a teleport tick the position
/// jumps and the reported velocity is exactly zero.
pub fn step_target<R: Rng + ?Sized>(
    regime: &MotionRegime,
    state: &mut TargetState,
    tick: u64,
    dt: f64,
    rng: &mut R,
) -> (Vec3, Vec3) {
    match regime.kind {
        RegimeKind::Static => (state.position, Vec3::ZERO),
        RegimeKind::UniformEasy | RegimeKind::UniformMedium | RegimeKind::UniformHard => {
            state.position += state.velocity * dt;
            (state.position, state.velocity)
        }
        RegimeKind::AccelEasy | RegimeKind::AccelMedium | RegimeKind::AccelHard => {
            let before = state.position;
            state.position += state.velocity * dt + regime.acceleration * (0.5 * dt * dt);
            state.velocity += regime.acceleration * dt;
            (state.position, (state.position - before) * (1.0 / dt))
        }
        RegimeKind::RandomWalk => {
            if state.phase_left == 0 {
                let h = ticks(rng, RANDOM_WALK_HOLD);
                state.phase_left = h;
                state.phase_log.push(h);
                state.velocity = planar_direction(rng) * regime.speed;
            }
            state.phase_left -= 1;
            state.position += state.velocity * dt;
            (state.position, state.velocity)
        }
        RegimeKind::StopAndGo => {
            if state.phase_left == 0 {
                state.moving = !state.moving;
                let h = if state.moving {
                    state.velocity = planar_direction(rng) * regime.speed;
                    ticks(rng, STOP_GO_MOVE)
                } else {
                    state.velocity = Vec3::ZERO;
                    ticks(rng, STOP_GO_PAUSE)
                };
                state.phase_left = h;
                state.phase_log.push(h);
            }
            state.phase_left -= 1;
            state.position += state.velocity * dt;
            (state.position, state.velocity)
        }
        RegimeKind::Teleport => {
            if let Some(e) = regime.teleports.iter().find(|e| e.tick == tick) {
                state.position += e.direction * e.distance;
            }
            (state.position, Vec3::ZERO)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DT: f64 = 0.05;

    fn run(kind: RegimeKind, seed: u64, n: u64) -> (MotionRegime, TargetState, Vec<(Vec3, Vec3)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let regime = MotionRegime::sample(kind, &mut rng);
        let mut state = regime.initial_state(Vec3::new(0.0, 0.0, 0.02), &mut rng);
        let mut out = vec![(state.position, Vec3::ZERO)];
        for t in 1..=n {
            out.push(step_target(&regime, &mut state, t, DT, &mut rng));
        }
        (regime, state, out)
    }

    #[test]
    fn static_never_moves() {
        let (_, _, trace) = run(RegimeKind::Static, 3, 200);
        assert!(trace.iter().all(|(p, v)| *p == trace[0].0 && v.is_zero()));
    }

    #[test]
    fn uniform_hard_at_8_cm_s_moves_4_mm_per_tick() {
        let regime = MotionRegime {
            kind: RegimeKind::UniformHard,
            speed: 0.08,
            direction: Vec3::new(1.0, 0.0, 0.0),
            acceleration: Vec3::ZERO,
            teleports: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut state = regime.initial_state(Vec3::ZERO, &mut rng);
        let mut prev = state.position;
        for t in 1..20 {
            let (p, v) = step_target(&regime, &mut state, t, DT, &mut rng);
            assert!(((p - prev).x - 0.004).abs() < 1e-15);
            assert_eq!((p - prev).y, 0.0);
            assert_eq!(v, Vec3::new(0.08, 0.0, 0.0));
            prev = p;
        }
    }

    #[test]
    fn teleport_ticks_jump_with_zero_reported_velocity() {
        for seed in 0..50 {
            let (regime, _, trace) = run(RegimeKind::Teleport, seed, 200);
            let events: Vec<u64> = regime.teleports.iter().map(|e| e.tick).collect();
            for t in 1..trace.len() {
                let jump = (trace[t].0 - trace[t - 1].0).norm();
                assert!(trace[t].1.is_zero());
                if events.contains(&(t as u64)) {
                    assert!(jump >= 0.08);
                } else {
                    assert_eq!(jump, 0.0);
                }
            }
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("uniform_hard".parse::<RegimeKind>().unwrap(), RegimeKind::UniformHard);
        assert_eq!("StopAndGo".parse::<RegimeKind>().unwrap(), RegimeKind::StopAndGo);
        assert!("sideways".parse::<RegimeKind>().is_err());
        assert_eq!(parse_regime_list("all").unwrap().len(), 10);
        assert_eq!(
            parse_regime_list("Teleport, static,Teleport").unwrap(),
            vec![RegimeKind::Static, RegimeKind::Teleport]
        );
        assert!(parse_regime_list(" , ").is_err());
    }

    fn speed_per_tick(trace: &[(Vec3, Vec3)], t: usize) -> f64 {
        (trace[t].0 - trace[t - 1].0).norm() / DT
    }

    #[test]
    fn sampled_parameters_within_bounds() {
        for seed in 0..10_000u64 {
            for kind in RegimeKind::ALL {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(kind as u64));
                let r = MotionRegime::sample(kind, &mut rng);
                let within = |x: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&x);
                match kind {
                    RegimeKind::UniformEasy => assert!(within(r.speed, UNIFORM_EASY_SPEED)),
                    RegimeKind::UniformMedium => assert!(within(r.speed, UNIFORM_MEDIUM_SPEED)),
                    RegimeKind::UniformHard => assert!(within(r.speed, UNIFORM_HARD_SPEED)),
                    RegimeKind::AccelEasy => assert!(within(r.acceleration.norm(), (0.02 - 1e-15, 0.03 + 1e-15))),
                    RegimeKind::AccelMedium => assert!(within(r.acceleration.norm(), (0.03 - 1e-15, 0.05 + 1e-15))),
                    RegimeKind::AccelHard => assert!(within(r.acceleration.norm(), (0.05 - 1e-15, 0.09 + 1e-15))),
                    RegimeKind::Teleport => {
                        assert!((3..=10).contains(&r.teleports[0].tick));
                        assert!((80..=140).contains(&r.teleports[1].tick));
                        assert!(r.teleports.iter().all(|e| e.distance >= 0.08));
                    }
                    _ => {}
                }
                if matches!(kind, RegimeKind::AccelEasy | RegimeKind::AccelMedium | RegimeKind::AccelHard) {
                    assert!(within(r.speed, ACCEL_BASE_SPEED));
                }
                assert_eq!(r.direction.z, 0.0);
                assert_eq!(r.acceleration.z, 0.0);
            }
        }
    }

    #[test]
    fn irregular_schedules_within_bounds() {
        for seed in 0..300 {
            let (_, state, trace) = run(RegimeKind::RandomWalk, seed, 200);
            for t in 1..trace.len() {
                assert!((speed_per_tick(&trace, t) - RANDOM_WALK_SPEED).abs() < 1e-12);
            }
            assert!(state.phase_log.iter().all(|h| (5..=12).contains(h)));

            let (_, state, trace) = run(RegimeKind::StopAndGo, seed, 200);
            for (i, h) in state.phase_log.iter().enumerate() {
                let bounds = if i % 2 == 0 { 3..=7 } else { 3..=6 };
                assert!(bounds.contains(h), "phase {i} len {h}");
            }
            for t in 1..trace.len() {
                let s = speed_per_tick(&trace, t);
                assert!(s == 0.0 || (s - STOP_GO_SPEED).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn motion_is_planar_and_deterministic() {
        for kind in RegimeKind::ALL {
            let a = run(kind, 17, 200);
            let b = run(kind, 17, 200);
            assert_eq!(a, b);
            assert!(a.2.iter().all(|(p, _)| p.z == 0.02));
        }
    }
}
