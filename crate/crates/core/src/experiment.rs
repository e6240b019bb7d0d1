//! Run specifications, seed-paired batches, sweeps, overhead timing, and
//! their CSV / JSON artifacts.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::batch::run_batch;
use crate::error::{PpcError, Result};
use crate::latch::LatchState;
use crate::model::{derive_latch_constants, ActionStep, ChunkPlan, DisturbanceEstimate, Vec3, WrapperConfig};
use crate::sim::{parse_regime_list, EpisodeConfig, EpisodeRecord, NoiseParams, RegimeKind};
use crate::wrapper::{correct_chunk, ChunkContext, WrapperOptions};

/// Column order of the per-episode CSV.
pub const EPISODE_COLUMNS: [&str; 10] = [
    "regime",
    "seed",
    "ppc",
    "intercepted",
    "intercept_tick",
    "terminal_distance",
    "min_distance",
    "mean_alpha",
    "latch_rate",
    "nu_rate",
];

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 8] = ["axis", "value", "arm", "successes", "trials", "rate", "ci_low", "ci_high"];

pub const CONFIDENCE: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Run,
    Sweep,
    Bench,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    BetaOut,
    FixedAlpha,
    Noise,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::BetaOut => "beta_out",
            SweepAxis::FixedAlpha => "fixed_alpha",
            SweepAxis::Noise => "noise",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = PpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "beta_out" => Ok(SweepAxis::BetaOut),
            "fixed_alpha" => Ok(SweepAxis::FixedAlpha),
            "noise" => Ok(SweepAxis::Noise),
            other => Err(PpcError::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Fully resolved invocation. Echoed into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub command: Command,
    pub regimes: Vec<RegimeKind>,
    pub trials: u64,
    pub seed_base: u64,
    pub ppc_pair: bool,
    pub beta_in: f64,
    pub lambda: f64,
    pub fixed_alpha: Option<f64>,
    pub beta_out: Option<f64>,
    pub latch: bool,
    pub second_order: bool,
    pub noise_sv: f64,
    pub noise_st: f64,
    pub max_policy_step: f64,
    pub planning_latency_ticks: u64,
    pub max_ticks: u64,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<f64>,
    pub k_max: usize,
    pub calls: usize,
    pub bench_k: usize,
    pub out: Option<String>,
    /// Worker count; not part of the echo because it does not affect results.
    #[serde(skip)]
    pub jobs: usize,
}

impl RunSpec {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            regimes: RegimeKind::ALL.to_vec(),
            trials: 100,
            seed_base: 0,
            ppc_pair: true,
            beta_in: 0.3,
            lambda: 1.0,
            fixed_alpha: None,
            beta_out: None,
            latch: true,
            second_order: true,
            noise_sv: 0.0,
            noise_st: 0.0,
            max_policy_step: 0.02,
            planning_latency_ticks: 0,
            max_ticks: 200,
            sweep_axis: None,
            sweep_values: Vec::new(),
            k_max: 8,
            calls: 1000,
            bench_k: 2,
            out: None,
            jobs: 0,
        }
    }

    /// Applies one `key=value` setting from a config file.
    pub fn apply_setting(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| PpcError::InvalidConfig(format!("invalid {what} `{value}` for `{key}`"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("number"));
        let int = |v: &str| v.trim().parse::<u64>().map_err(|_| bad("integer"));
        let flag = |v: &str| match v.trim() {
            "true" | "1" | "on" | "yes" => Ok(true),
            "false" | "0" | "off" | "no" => Ok(false),
            _ => Err(bad("boolean")),
        };
        let optional = |v: &str| -> Result<Option<f64>> {
            match v.trim() {
                "" | "none" | "dynamic" => Ok(None),
                x => num(x).map(Some),
            }
        };
        match key.trim().replace('-', "_").as_str() {
            "regimes" => self.regimes = parse_regime_list(value)?,
            "trials" => self.trials = int(value)?,
            "seed_base" => self.seed_base = int(value)?,
            "ppc_pair" => self.ppc_pair = flag(value)?,
            "beta_in" => self.beta_in = num(value)?,
            "lambda" => self.lambda = num(value)?,
            "fixed_alpha" => self.fixed_alpha = optional(value)?,
            "beta_out" => self.beta_out = optional(value)?,
            "latch" => self.latch = flag(value)?,
            "second_order" => self.second_order = flag(value)?,
            "noise_sv" => self.noise_sv = num(value)?,
            "noise_st" => self.noise_st = num(value)?,
            "max_policy_step" => self.max_policy_step = num(value)?,
            "planning_latency_ticks" => self.planning_latency_ticks = int(value)?,
            "max_ticks" => self.max_ticks = int(value)?,
            "axis" | "sweep_axis" => self.sweep_axis = Some(value.parse()?),
            "values" | "sweep_values" => self.sweep_values = parse_values(value)?,
            "k_max" => self.k_max = int(value)? as usize,
            "calls" => self.calls = int(value)? as usize,
            "k" | "bench_k" => self.bench_k = int(value)? as usize,
            "out" => self.out = Some(value.trim().to_owned()),
            "jobs" => self.jobs = int(value)? as usize,
            other => return Err(PpcError::InvalidConfig(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key=value` file; `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PpcError::InvalidConfig(format!("line {}: expected key=value", n + 1)))?;
            self.apply_setting(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(PpcError::InvalidConfig("no regimes".into()));
        }
        if self.trials == 0 {
            return Err(PpcError::InvalidConfig("trials must be positive".into()));
        }
        if self.seed_base.checked_add(self.trials).is_none() {
            return Err(PpcError::InvalidConfig("seed range overflows".into()));
        }
        if !(self.noise_sv >= 0.0 && self.noise_st >= 0.0 && self.noise_sv.is_finite() && self.noise_st.is_finite()) {
            return Err(PpcError::InvalidConfig("noise deviations must be finite and non-negative".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(PpcError::InvalidLambda(self.lambda));
        }
        if let Some(a) = self.fixed_alpha {
            if !(a.is_finite() && a >= 1.0) {
                return Err(PpcError::InvalidConfig(format!("fixed alpha {a} must be ≥ 1")));
            }
        }
        if let Some(b) = self.beta_out {
            if !(b > 0.0 && b <= 1.0) {
                return Err(PpcError::InvalidConfig(format!("beta_out {b} must lie in (0, 1]")));
            }
        }
        if !(self.max_policy_step > 0.0 && self.max_policy_step.is_finite()) {
            return Err(PpcError::InvalidConfig("max_policy_step must be positive".into()));
        }
        if self.command == Command::Sweep {
            if self.sweep_axis.is_none() {
                return Err(PpcError::InvalidConfig("sweep needs an axis".into()));
            }
            if self.sweep_values.is_empty() {
                return Err(PpcError::InvalidConfig("sweep needs values".into()));
            }
        }
        self.wrapper_config().validate()
    }

    pub fn wrapper_config(&self) -> WrapperConfig {
        WrapperConfig {
            beta_in: self.beta_in,
            ..WrapperConfig::default()
        }
    }

    pub fn wrapper_options(&self) -> WrapperOptions {
        WrapperOptions {
            latch_enabled: self.latch,
            second_order: self.second_order,
            fixed_alpha: self.fixed_alpha,
            beta_out_override: self.beta_out,
            lambda: self.lambda,
        }
    }

    pub fn episode(&self, regime: RegimeKind, seed: u64, ppc: bool) -> EpisodeConfig {
        let mut cfg = EpisodeConfig::new(regime, seed, ppc);
        cfg.max_ticks = self.max_ticks;
        cfg.follower.max_policy_step = self.max_policy_step;
        cfg.follower.planning_latency_ticks = self.planning_latency_ticks;
        cfg.noise = NoiseParams {
            sigma_v: self.noise_sv,
            sigma_theta_deg: self.noise_st,
        };
        cfg.wrapper = self.wrapper_options();
        cfg
    }

    /// Episodes sorted by (regime, seed, arm), baseline before PPC.
    pub fn episodes(&self) -> Vec<EpisodeConfig> {
        let arms: &[bool] = if self.ppc_pair { &[false, true] } else { &[true] };
        let mut regimes = self.regimes.clone();
        regimes.sort();
        regimes.dedup();
        regimes
            .iter()
            .flat_map(|&r| {
                (self.seed_base..self.seed_base + self.trials).flat_map(move |s| arms.iter().map(move |&p| self.episode(r, s, p)))
            })
            .collect()
    }

    pub fn echo(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| PpcError::InvalidConfig(format!("invalid value `{p}`")))
        })
        .collect()
}

/// Two-sided Clopper–Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let tail = (1.0 - confidence) / 2.0;
    let (x, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).map(|b| b.inverse_cdf(tail)).unwrap_or(0.0)
    };
    let upper = if successes >= trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).map(|b| b.inverse_cdf(1.0 - tail)).unwrap_or(1.0)
    };
    (lower, upper)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Rate {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a EpisodeRecord>) -> Rate {
        let (mut s, mut n) = (0u64, 0u64);
        for r in records {
            n += 1;
            s += u64::from(r.outcome.intercepted);
        }
        let (ci_low, ci_high) = clopper_pearson(s, n, CONFIDENCE);
        Rate {
            successes: s,
            trials: n,
            rate: if n == 0 { 0.0 } else { s as f64 / n as f64 },
            ci_low,
            ci_high,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub regime: RegimeKind,
    pub ppc: Rate,
    pub baseline: Option<Rate>,
    /// PPC minus baseline interception rate over paired seeds.
    pub paired_delta: Option<f64>,
    /// Seeds where only one arm intercepted.
    pub ppc_only: u64,
    pub baseline_only: u64,
    pub mean_alpha: f64,
    pub alpha_ge2_fraction: f64,
    pub latch_rate: f64,
    pub nu_rate: f64,
}

/// Records of one batch, sorted by (regime, seed, arm).
#[derive(Clone, Debug, PartialEq)]
pub struct RunResults {
    pub spec: RunSpec,
    pub records: Vec<EpisodeRecord>,
}

pub fn run(spec: &RunSpec) -> Result<RunResults> {
    spec.validate()?;
    let mut records = run_batch(&spec.episodes(), &spec.wrapper_config(), spec.jobs)?;
    records.sort_by_key(|r| (r.regime, r.seed, r.ppc));
    Ok(RunResults {
        spec: spec.clone(),
        records,
    })
}

fn chunk_mean(records: &[&EpisodeRecord], f: impl Fn(&crate::sim::ChunkRecord) -> f64) -> f64 {
    let (sum, n) = records
        .iter()
        .flat_map(|r| r.chunks.iter())
        .fold((0.0, 0usize), |(s, n), c| (s + f(c), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl RunResults {
    pub fn arm(&self, regime: RegimeKind, ppc: bool) -> Vec<&EpisodeRecord> {
        self.records.iter().filter(|r| r.regime == regime && r.ppc == ppc).collect()
    }

    pub fn regimes(&self) -> Vec<RegimeKind> {
        let mut v: Vec<RegimeKind> = self.records.iter().map(|r| r.regime).collect();
        v.dedup();
        v
    }

    pub fn summarize(&self) -> Vec<RegimeSummary> {
        self.regimes()
            .into_iter()
            .map(|regime| {
                let on = self.arm(regime, true);
                let off = self.arm(regime, false);
                let paired = !off.is_empty();
                let (mut ppc_only, mut baseline_only) = (0, 0);
                for (a, b) in on.iter().zip(&off) {
                    match (a.outcome.intercepted, b.outcome.intercepted) {
                        (true, false) => ppc_only += 1,
                        (false, true) => baseline_only += 1,
                        _ => {}
                    }
                }
                let ppc = Rate::of(on.iter().copied());
                let baseline = paired.then(|| Rate::of(off.iter().copied()));
                RegimeSummary {
                    regime,
                    paired_delta: baseline.map(|b| ppc.rate - b.rate),
                    ppc,
                    baseline,
                    ppc_only,
                    baseline_only,
                    mean_alpha: chunk_mean(&on, |c| c.alpha),
                    alpha_ge2_fraction: chunk_mean(&on, |c| f64::from(u8::from(c.alpha >= 2.0))),
                    latch_rate: chunk_mean(&on, |c| f64::from(u8::from(c.latch_fired))),
                    nu_rate: chunk_mean(&on, |c| f64::from(u8::from(c.nu_bypass))),
                }
            })
            .collect()
    }

    /// Interception rate of one arm pooled over every regime.
    pub fn composite(&self, ppc: bool) -> Rate {
        Rate::of(self.records.iter().filter(|r| r.ppc == ppc))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# runspec: {}\n{}\n", self.spec.echo(), EPISODE_COLUMNS.join(","));
        for r in &self.records {
            let tick = r.outcome.intercept_tick.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.9},{:.9},{:.6},{:.6},{:.6}",
                r.regime,
                r.seed,
                u8::from(r.ppc),
                u8::from(r.outcome.intercepted),
                tick,
                r.outcome.terminal_distance,
                r.outcome.min_distance,
                r.mean_alpha(),
                r.latch_rate(),
                r.nu_rate(),
            );
        }
        out
    }

    pub fn summary_json(&self, generated_unix: u64) -> serde_json::Value {
        let paired = self.spec.ppc_pair;
        json!({
            "runspec": self.spec,
            "metadata": { "generated_unix": generated_unix, "episodes": self.records.len() },
            "confidence": CONFIDENCE,
            "regimes": self.summarize(),
            "composite": {
                "ppc": self.composite(true),
                "baseline": paired.then(|| self.composite(false)),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    /// `None` marks the dynamic-α reference arm of a fixed-α sweep.
    pub value: Option<f64>,
    pub arm: String,
    pub rate: Rate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResults {
    pub spec: RunSpec,
    pub rows: Vec<SweepRow>,
}

fn composite_rate(spec: &RunSpec, ppc_pair: bool) -> Result<(Rate, Option<Rate>)> {
    let s = RunSpec {
        ppc_pair,
        command: Command::Run,
        ..spec.clone()
    };
    let res = run(&s)?;
    Ok((res.composite(true), ppc_pair.then(|| res.composite(false))))
}

/// Grid evaluation over the spec's regime composite.
///
/// `beta_out` and `fixed_alpha` values override the PPC arm; a fixed-α sweep
/// adds a dynamic reference row. `noise` values are σ_θ in degrees with σ_v
/// taken from the spec, and each point reports both arms.
pub fn sweep(spec: &RunSpec) -> Result<SweepResults> {
    spec.validate()?;
    let axis = spec
        .sweep_axis
        .ok_or_else(|| PpcError::InvalidConfig("sweep needs an axis".into()))?;
    let mut rows = Vec::new();
    for &value in &spec.sweep_values {
        let mut point = spec.clone();
        match axis {
            SweepAxis::BetaOut => point.beta_out = Some(value),
            SweepAxis::FixedAlpha => point.fixed_alpha = Some(value),
            SweepAxis::Noise => point.noise_st = value,
        }
        point.validate()?;
        let with_baseline = axis == SweepAxis::Noise;
        let (ppc, base) = composite_rate(&point, with_baseline)?;
        rows.push(SweepRow {
            axis,
            value: Some(value),
            arm: "ppc".into(),
            rate: ppc,
        });
        if let Some(b) = base {
            rows.push(SweepRow {
                axis,
                value: Some(value),
                arm: "baseline".into(),
                rate: b,
            });
        }
    }
    if axis == SweepAxis::FixedAlpha {
        let dynamic = RunSpec {
            fixed_alpha: None,
            ..spec.clone()
        };
        let (ppc, _) = composite_rate(&dynamic, false)?;
        rows.push(SweepRow {
            axis,
            value: None,
            arm: "dynamic".into(),
            rate: ppc,
        });
    }
    Ok(SweepResults {
        spec: spec.clone(),
        rows,
    })
}

impl SweepResults {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# runspec: {}\n{}\n", self.spec.echo(), SWEEP_COLUMNS.join(","));
        for r in &self.rows {
            let value = r.value.map(|v| v.to_string()).unwrap_or_else(|| "dynamic".into());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{:.6}",
                r.axis.name(),
                value,
                r.arm,
                r.rate.successes,
                r.rate.trials,
                r.rate.rate,
                r.rate.ci_low,
                r.rate.ci_high
            );
        }
        out
    }

    pub fn summary_json(&self, generated_unix: u64) -> serde_json::Value {
        json!({
            "runspec": self.spec,
            "metadata": { "generated_unix": generated_unix },
            "confidence": CONFIDENCE,
            "rows": self.rows,
        })
    }

    /// Rate of the first row matching `value` and `arm`.
    pub fn rate(&self, value: Option<f64>, arm: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.value == value && r.arm == arm)
            .map(|r| r.rate.rate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub calls: usize,
    pub warmup: usize,
    pub k: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

/// Nearest-rank percentile of an ascending sample.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times `correct_chunk` single-threaded on seeded random inputs with the
/// step floor set to `k`. Warm-up calls are excluded.
pub fn bench_correct_chunk(calls: usize, k: usize, seed: u64) -> Result<BenchStats> {
    let cfg = WrapperConfig {
        k_floor: k,
        k_ceiling: WrapperConfig::default().k_ceiling.max(k),
        ..WrapperConfig::default()
    };
    cfg.validate()?;
    let warmup = (calls / 10).max(10);
    let opts = WrapperOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latch = LatchState::new(derive_latch_constants(&cfg), cfg.epsilon_norm);
    let ctx = ChunkContext {
        tcp: Vec3::new(0.0, 0.0, 0.1),
        grasp_near: false,
        nu_bypass: false,
    };
    let sample = |rng: &mut ChaCha8Rng| -> Result<(ChunkPlan, DisturbanceEstimate, Vec3)> {
        let mut v3 = |s: f64| Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
        let dir = v3(1.0);
        let steps = (0..cfg.horizon)
            .map(|_| ActionStep {
                translation: dir * 0.4,
                rotation: [0.0; 3],
                gripper: 1.0,
            })
            .collect();
        let velocity = v3(0.004);
        let acceleration = v3(2e-4);
        let delta_p = dir * 0.016;
        Ok((ChunkPlan::new(steps)?, DisturbanceEstimate::new(velocity, acceleration, 1.0)?, delta_p))
    };
    let mut times = Vec::with_capacity(calls);
    for i in 0..warmup + calls {
        let (chunk, d, dp) = sample(&mut rng)?;
        let start = Instant::now();
        let out = correct_chunk(&chunk, &d, dp, &mut latch, &ctx, &cfg, &opts)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(out);
        if i >= warmup {
            times.push(elapsed);
        }
    }
    times.sort_by(f64::total_cmp);
    let mean_ms = times.iter().sum::<f64>() / times.len().max(1) as f64;
    Ok(BenchStats {
        calls,
        warmup,
        k,
        mean_ms,
        median_ms: percentile(&times, 50.0),
        p90_ms: percentile(&times, 90.0),
        p99_ms: percentile(&times, 99.0),
        max_ms: times.last().copied().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(regimes: &[RegimeKind], trials: u64) -> RunSpec {
        RunSpec {
            regimes: regimes.to_vec(),
            trials,
            ..RunSpec::new(Command::Run)
        }
    }

    #[test]
    fn clopper_pearson_reference_values() {
        let (lo, hi) = clopper_pearson(50, 100, 0.95);
        assert_abs_diff_eq!(lo, 0.3983, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.6017, epsilon = 1e-4);
        assert_eq!(clopper_pearson(0, 10, 0.95).0, 0.0);
        assert_abs_diff_eq!(clopper_pearson(0, 10, 0.95).1, 0.3085, epsilon = 1e-4);
        assert_eq!(clopper_pearson(10, 10, 0.95).1, 1.0);
    }

    #[test]
    fn episode_cardinality_and_order() {
        let spec = small(&RegimeKind::ALL, 3);
        let eps = spec.episodes();
        assert_eq!(eps.len(), 60);
        assert!(eps.windows(2).all(|w| (w[0].regime, w[0].seed, w[0].ppc_enabled) < (w[1].regime, w[1].seed, w[1].ppc_enabled)));
        let unpaired = RunSpec { ppc_pair: false, ..spec };
        assert!(unpaired.episodes().iter().all(|e| e.ppc_enabled));
    }

    #[test]
    fn static_delta_is_zero_and_csv_is_stable() {
        let spec = small(&[RegimeKind::Static, RegimeKind::UniformHard], 5);
        let a = run(&spec).unwrap();
        let b = run(&RunSpec { jobs: 1, ..spec.clone() }).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let s = a.summarize();
        assert_eq!(s[0].regime, RegimeKind::Static);
        assert_eq!(s[0].paired_delta, Some(0.0));
        let csv = a.to_csv();
        assert!(csv.starts_with("# runspec: {"));
        assert_eq!(csv.lines().count(), 2 + 20);
        assert_eq!(csv.lines().nth(1).unwrap(), EPISODE_COLUMNS.join(","));
        let j = a.summary_json(0);
        assert_eq!(j["runspec"]["trials"], 5);
        assert!(j["regimes"][1]["ppc"]["ci_low"].as_f64().unwrap() <= j["regimes"][1]["ppc"]["rate"].as_f64().unwrap());
    }

    #[test]
    fn config_text_roundtrip() {
        let mut spec = RunSpec::new(Command::Run);
        spec.apply_config_text("# comment\ntrials = 7\nregimes=UniformHard,Static\nnoise_sv=0.2\nfixed_alpha=none\nlatch=off\n")
            .unwrap();
        assert_eq!(spec.trials, 7);
        assert_eq!(spec.regimes, vec![RegimeKind::Static, RegimeKind::UniformHard]);
        assert_eq!(spec.noise_sv, 0.2);
        assert!(!spec.latch);
        assert!(spec.apply_config_text("bogus=1").is_err());
        assert!(spec.apply_config_text("trials").is_err());
        assert!(spec.apply_config_text("trials=x").is_err());
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = RunSpec::new(Command::Run);
        s.trials = 0;
        assert!(s.validate().is_err());
        let s = RunSpec {
            fixed_alpha: Some(0.5),
            ..RunSpec::new(Command::Run)
        };
        assert!(s.validate().is_err());
        let s = RunSpec::new(Command::Sweep);
        assert!(s.validate().is_err());
    }

    #[test]
    fn sweep_rows_per_axis() {
        let mut spec = small(&[RegimeKind::UniformEasy], 2);
        spec.command = Command::Sweep;
        spec.sweep_axis = Some(SweepAxis::FixedAlpha);
        spec.sweep_values = vec![1.0, 2.0];
        let r = sweep(&spec).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rate(None, "dynamic").is_some());
        spec.sweep_axis = Some(SweepAxis::Noise);
        spec.sweep_values = vec![0.0, 10.0];
        let r = sweep(&spec).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.to_csv().lines().nth(1).unwrap().starts_with("axis,value"));
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[3.0], 90.0), 3.0);
    }

    #[test]
    fn bench_reports_ordered_stats() {
        let s = bench_correct_chunk(200, 2, 1).unwrap();
        assert_eq!(s.calls, 200);
        assert!(s.median_ms <= s.p90_ms && s.p90_ms <= s.p99_ms && s.p99_ms <= s.max_ms);
        assert!(bench_correct_chunk(50, 8, 1).is_ok());
    }
}
