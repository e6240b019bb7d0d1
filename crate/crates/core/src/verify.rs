//! Oracle-equivalence and identity suite behind the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{derive_latch_constants, DisturbanceEstimate, Vec3, WrapperConfig, EPSILON_NORM};
use crate::oracle::{solve_joint, solve_joint_perpendicular, CostInstance};
use crate::pace::compute_alpha;
use crate::path::{compute_offsets, cosh_profile, fib_numerator, fib_profile, lucas_numerator, MAX_PROFILE_K};

pub const ORACLE_TOLERANCE: f64 = 1e-8;
pub const PROFILE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub k_max: usize,
    pub instances: usize,
    pub seed: u64,
    /// Negative control: skews every closed-form α before comparison.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            k_max: 8,
            instances: 1000,
            seed: 0,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Reported but excluded from the overall verdict.
    pub informational: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub families: Vec<FamilyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(|f| f.passed || f.informational)
    }

    pub fn failing(&self) -> impl Iterator<Item = &FamilyResult> {
        self.families.iter().filter(|f| !f.passed && !f.informational)
    }
}

fn family(name: &str, cases: usize, max_deviation: f64, tolerance: f64) -> FamilyResult {
    FamilyResult {
        name: name.to_owned(),
        cases,
        max_deviation,
        tolerance,
        passed: max_deviation <= tolerance,
        informational: false,
    }
}

fn unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if let Some(u) = v.normalized(0.1) {
            if v.norm() <= 1.0 {
                return u;
            }
        }
    }
}

/// A random vector whose cosine with `axis` is non-negative.
fn forward<R: Rng>(rng: &mut R, axis: Vec3, scale: f64) -> Vec3 {
    let u = unit(rng);
    let u = if u.dot(&axis) < 0.0 { u - axis * (2.0 * u.dot(&axis)) } else { u };
    u * scale
}

fn perpendicular<R: Rng>(rng: &mut R, axis: Vec3, scale: f64) -> Vec3 {
    loop {
        let u = unit(rng);
        if let Some(p) = (u - axis * u.dot(&axis)).normalized(0.1) {
            return p * scale;
        }
    }
}

/// Max deviation in α and per-step offset between the closed form and an
/// oracle solution.
fn deviation(inst: &CostInstance, oracle: &crate::oracle::CostBreakdown, fault: bool) -> Result<f64> {
    let d = DisturbanceEstimate::new(inst.velocity, inst.acceleration, inst.lambda)?;
    let res = compute_alpha(inst.delta_p, &d, inst.k, EPSILON_NORM);
    let offsets = compute_offsets(&res, inst.k, inst.lambda)?;
    let alpha = res.alpha_star + if fault { 1e-6 } else { 0.0 };
    let mut dev = (alpha - oracle.alpha).abs();
    for (a, b) in offsets.offsets.iter().zip(&oracle.deltas) {
        dev = dev.max((*a - *b).max_abs());
    }
    Ok(dev)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccelFamily {
    None,
    Perpendicular,
    General,
}

/// Draws an oracle instance. Velocity and acceleration never point against
/// the plan so that α* stays in its unclamped branch.
pub fn random_instance<R: Rng>(rng: &mut R, k_max: usize, lambdas: &[f64], accel: AccelFamily) -> Result<CostInstance> {
    let k = rng.random_range(1..=k_max.max(1));
    let lambda = lambdas[rng.random_range(0..lambdas.len())];
    let dp_dir = unit(rng);
    let delta_p = dp_dir * rng.random_range(0.002..0.02);
    let speed = rng.random_range(0.0..0.01);
    let velocity = forward(rng, dp_dir, speed);
    let accel_scale = rng.random_range(1e-5..2e-3);
    let acceleration = match accel {
        AccelFamily::None => Vec3::ZERO,
        AccelFamily::Perpendicular => perpendicular(rng, dp_dir, accel_scale),
        AccelFamily::General => forward(rng, dp_dir, accel_scale),
    };
    CostInstance::new(delta_p, velocity, acceleration, k, lambda)
}

/// Max deviation over `n` instances against the chosen oracle.
pub fn oracle_family(
    opts: &VerifyOptions,
    lambdas: &[f64],
    accel: AccelFamily,
    perpendicular_oracle: bool,
    stream: u64,
) -> Result<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.instances {
        let inst = random_instance(&mut rng, opts.k_max, lambdas, accel)?;
        let oracle = if perpendicular_oracle {
            solve_joint_perpendicular(&inst)?
        } else {
            solve_joint(&inst)?
        };
        worst = worst.max(deviation(&inst, &oracle, opts.inject_fault)?);
    }
    Ok((opts.instances, worst))
}

fn profile_families(k_max: usize) -> Result<Vec<FamilyResult>> {
    let k_max = k_max.clamp(1, MAX_PROFILE_K);
    let mut out = Vec::new();

    let expected_small: [(usize, &[f64]); 2] = [(1, &[0.5]), (2, &[0.8, 0.6])];
    let mut dev: f64 = 0.0;
    let mut cases = 0;
    for (k, want) in expected_small.iter().filter(|(k, _)| *k <= k_max) {
        for (a, b) in fib_profile(*k)?.iter().zip(want.iter()) {
            dev = dev.max((a - b).abs());
            cases += 1;
        }
    }
    out.push(family("fibonacci-small-windows", cases, dev, 0.0));

    let mut dev: f64 = 0.0;
    for k in 1..=k_max {
        for (a, b) in fib_profile(k)?.iter().zip(cosh_profile(k, 1.0)?) {
            dev = dev.max((a - b).abs());
        }
    }
    out.push(family("cosh-unit-lambda-equals-fibonacci", k_max, dev, PROFILE_TOLERANCE));

    let mut dev: f64 = 0.0;
    for k in 1..=k_max {
        for c in cosh_profile(k, 1e-8)? {
            dev = dev.max((0.999 - c).max(0.0));
        }
        for c in cosh_profile(k, 1e8)? {
            dev = dev.max((c - 1e-3).max(0.0));
        }
    }
    out.push(family("cosh-lambda-limits", 2 * k_max, dev, 0.0));

    let mut dev: f64 = 0.0;
    for k in 1..=k_max {
        dev = dev.max(fib_numerator(k, k)?.unsigned_abs() as f64);
        dev = dev.max(lucas_numerator(k, k)?.unsigned_abs() as f64);
    }
    out.push(family("boundary-numerators-vanish", 2 * k_max, dev, 0.0));
    Ok(out)
}

fn latch_families() -> Vec<FamilyResult> {
    let c = derive_latch_constants(&WrapperConfig::default());
    vec![
        family("latch-beta-out", 1, (c.beta_out - 0.083).abs(), 1e-4),
        family("latch-threshold", 1, (c.l_th - 0.147).abs(), 1e-12),
        family("latch-sticky-reference", 1, (c.r_th - c.l_th).abs(), 0.0),
    ]
}

/// Runs every family. Families that compare against a weaker optimum than
/// the closed form targets are marked informational.
pub fn run_suite(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut families = Vec::new();
    let (n, dev) = oracle_family(opts, &[0.25, 1.0, 4.0], AccelFamily::None, false, 1)?;
    families.push(family("first-order-oracle", n, dev, ORACLE_TOLERANCE));
    let (n, dev) = oracle_family(opts, &[1.0], AccelFamily::Perpendicular, false, 2)?;
    families.push(family("second-order-perpendicular-accel-oracle", n, dev, ORACLE_TOLERANCE));
    let (n, dev) = oracle_family(opts, &[1.0], AccelFamily::General, true, 3)?;
    families.push(family("second-order-perpendicular-offset-oracle", n, dev, ORACLE_TOLERANCE));
    let (n, dev) = oracle_family(opts, &[1.0], AccelFamily::General, false, 4)?;
    let mut general = family("second-order-unconstrained-oracle", n, dev, ORACLE_TOLERANCE);
    general.informational = true;
    families.push(general);
    families.extend(profile_families(opts.k_max)?);
    families.extend(latch_families());
    Ok(VerifyReport {
        options: opts.clone(),
        families,
    })
}
