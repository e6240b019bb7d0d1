//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

use std::process::{Command as Process, ExitCode};
use std::time::{Duration, Instant};

use ppc_core::experiment::{self, bench_correct_chunk, Command, RunResults, RunSpec, SweepAxis};
use ppc_core::latch::LatchState;
use ppc_core::model::{derive_latch_constants, ActionStep, ChunkPlan, DisturbanceEstimate, Vec3, WrapperConfig, EPSILON_NORM};
use ppc_core::oracle::{solve_joint, CostInstance};
use ppc_core::pace::compute_alpha;
use ppc_core::path::{compute_offsets, cosh_profile, fib_numerator, fib_profile, lucas_numerator};
use ppc_core::sim::{run_episode, EpisodeConfig, RegimeKind};
use ppc_core::verify::{random_instance, AccelFamily};
use ppc_core::wrapper::{correct_chunk, ChunkContext, WrapperOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

const TRIALS: u64 = 100;

/// Max |Δα| and max per-step offset deviation against the unconstrained
/// joint solve over `n` instances.
fn oracle_deviation(n: usize, lambdas: &[f64], accel: AccelFamily, stream: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    rng.set_stream(stream);
    let (mut da, mut dd) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let inst: CostInstance = random_instance(&mut rng, 8, lambdas, accel).unwrap();
        let oracle = solve_joint(&inst).unwrap();
        let d = DisturbanceEstimate::new(inst.velocity, inst.acceleration, inst.lambda).unwrap();
        let res = compute_alpha(inst.delta_p, &d, inst.k, EPSILON_NORM);
        let offsets = compute_offsets(&res, inst.k, inst.lambda).unwrap();
        da = da.max((res.alpha_star - oracle.alpha).abs());
        for (a, b) in offsets.offsets.iter().zip(&oracle.deltas) {
            dd = dd.max((*a - *b).max_abs());
        }
    }
    (da, dd)
}

fn c1_first_order() -> Verdict {
    let start = Instant::now();
    let (da, dd) = oracle_deviation(1000, &[0.25, 1.0, 4.0], AccelFamily::None, 11);
    let secs = start.elapsed().as_secs_f64();
    (
        da <= 1e-8 && dd <= 1e-8 && secs < 10.0,
        format!("max|Δα|={da:.2e} max|Δδ|={dd:.2e} runtime={secs:.2}s"),
    )
}

fn c2_second_order() -> Verdict {
    let (da, dd) = oracle_deviation(1000, &[1.0], AccelFamily::General, 12);
    (da <= 1e-8 && dd <= 1e-8, format!("max|Δα|={da:.2e} max|Δδ|={dd:.2e} (general acceleration, unconstrained joint solve)"))
}

fn c3_k2_profile() -> Verdict {
    let got = fib_profile(2).unwrap();
    (got == [0.8, 0.4], format!("profile(K=2)={got:?}, expected [0.8, 0.4]"))
}

fn c4_cosh() -> Verdict {
    let mut dev = 0.0f64;
    let (mut lo_min, mut hi_max) = (f64::INFINITY, 0.0f64);
    for k in 1..=16 {
        for (a, b) in fib_profile(k).unwrap().iter().zip(cosh_profile(k, 1.0).unwrap()) {
            dev = dev.max((a - b).abs());
        }
        lo_min = cosh_profile(k, 1e-8).unwrap().into_iter().fold(lo_min, f64::min);
        hi_max = cosh_profile(k, 1e8).unwrap().into_iter().fold(hi_max, f64::max);
    }
    (
        dev <= 1e-12 && lo_min > 0.999 && hi_max < 1e-3,
        format!("max|cosh−fib|={dev:.2e} min coeff(λ=1e-8)={lo_min:.6} max coeff(λ=1e8)={hi_max:.2e}"),
    )
}

fn c5_boundary() -> Verdict {
    let mut zero = true;
    for k in 1..=16 {
        zero &= fib_numerator(k, k).unwrap() == 0 && lucas_numerator(k, k).unwrap() == 0;
        zero &= fib_profile(k).unwrap().len() == k;
    }
    let last = *fib_profile(16).unwrap().last().unwrap();
    (
        zero && (last - 0.618).abs() <= 1e-3,
        format!("boundary numerators zero={zero} last coeff(K=16)={last:.6}"),
    )
}

/// Fired flags for a scripted trigger sequence from a fresh latch.
fn script(triggers: impl IntoIterator<Item = bool>) -> Vec<bool> {
    let mut latch = LatchState::new(derive_latch_constants(&WrapperConfig::default()), EPSILON_NORM);
    triggers.into_iter().map(|t| latch.update(t)).collect()
}

fn count(fired: &[bool]) -> usize {
    fired.iter().filter(|f| **f).count()
}

fn c6_latch() -> Verdict {
    let c = derive_latch_constants(&WrapperConfig::default());
    let beta_ok = (c.beta_out - 0.0830).abs() <= 1e-4;
    let lth_ok = (c.l_th - 0.147).abs() <= 1e-12;

    let n = 60;
    let single = script((0..n).map(|i| i == 0));
    let single_fires = count(&single);
    let stable = script((0..n).map(|_| false));
    let chronic = script((0..n).map(|_| true));
    let periodic = script((0..n).map(|i| i % 5 == 0));
    let tail = &periodic[n / 2..];
    let table_ok = count(&stable) == 0
        && single_fires == 2
        && single[..2] == [true, true]
        && chronic.iter().all(|f| *f)
        && tail.iter().any(|f| *f)
        && tail.iter().any(|f| !*f);
    (
        beta_ok && lth_ok && single_fires == 2 && table_ok,
        format!(
            "β_out={:.7} L_th={:.15} single-trigger fires={single_fires} stable={} chronic={}/{n} periodic-tail={}/{}",
            c.beta_out,
            c.l_th,
            count(&stable),
            count(&chronic),
            count(tail),
            tail.len()
        ),
    )
}

fn c7_identity() -> Verdict {
    let cfg = WrapperConfig::default();
    let steps = (0..cfg.horizon)
        .map(|i| ActionStep {
            translation: Vec3::new(0.1 + 0.01 * i as f64, -0.07, 0.03),
            rotation: [0.1, -0.2, 0.3],
            gripper: 1.0,
        })
        .collect();
    let chunk = ChunkPlan::new(steps).unwrap();
    let mut latch = LatchState::new(derive_latch_constants(&cfg), cfg.epsilon_norm);
    let ctx = ChunkContext {
        tcp: Vec3::new(0.0, -0.1, 0.12),
        grasp_near: false,
        nu_bypass: false,
    };
    let out = correct_chunk(
        &chunk,
        &DisturbanceEstimate::zero(),
        Vec3::new(0.004, -0.0028, 0.0012),
        &mut latch,
        &ctx,
        &cfg,
        &WrapperOptions::default(),
    )
    .unwrap();
    let k = out.corrected_steps.len();
    let chunk_identity = out.corrected_steps.iter().zip(chunk.steps()).all(|(a, b)| {
        a.translation.as_array().map(f64::to_bits) == b.translation.as_array().map(f64::to_bits)
            && a.rotation.map(f64::to_bits) == b.rotation.map(f64::to_bits)
            && a.gripper.to_bits() == b.gripper.to_bits()
    });

    let mut identical = 0;
    for seed in 0..TRIALS {
        let on = run_episode(&EpisodeConfig::new(RegimeKind::Static, seed, true), &cfg).unwrap();
        let off = run_episode(&EpisodeConfig::new(RegimeKind::Static, seed, false), &cfg).unwrap();
        let bits = |r: &ppc_core::sim::EpisodeRecord| {
            r.positions()
                .into_iter()
                .map(|(o, t)| (o.as_array().map(f64::to_bits), t.as_array().map(f64::to_bits)))
                .collect::<Vec<_>>()
        };
        if bits(&on) == bits(&off) && on.outcome == off.outcome {
            identical += 1;
        }
    }
    (
        chunk_identity && identical == TRIALS,
        format!("chunk bit-equal={chunk_identity} over {k} steps; Static paired traces bit-identical {identical}/{TRIALS}"),
    )
}

fn spec(regimes: &[RegimeKind]) -> RunSpec {
    RunSpec {
        regimes: regimes.to_vec(),
        trials: TRIALS,
        seed_base: 0,
        jobs: 0,
        ..RunSpec::new(Command::Run)
    }
}

fn c8_behavior(results: &RunResults, elapsed: Duration) -> Verdict {
    let mut ok = elapsed.as_secs_f64() < 120.0;
    let mut parts = Vec::new();
    for s in results.summarize() {
        let base = s.baseline.expect("paired").rate;
        ok &= s.ppc.rate >= base;
        if matches!(s.regime, RegimeKind::UniformHard | RegimeKind::AccelHard) {
            ok &= s.ppc.rate - base >= 0.10 - 1e-12;
        }
        parts.push(format!("{}={:.2}/{:.2}", s.regime.name(), s.ppc.rate, base));
    }
    (ok, format!("ppc/baseline {} runtime={:.1}s", parts.join(" "), elapsed.as_secs_f64()))
}

fn c9_diagnostics(results: &RunResults) -> Verdict {
    let summary = results.summarize();
    let of = |k: RegimeKind| summary.iter().find(|s| s.regime == k).unwrap();
    let ge2 = [RegimeKind::AccelEasy, RegimeKind::AccelMedium, RegimeKind::AccelHard].map(|k| of(k).alpha_ge2_fraction);
    let ordering = ge2[0] <= ge2[1] && ge2[1] <= ge2[2];
    let nu_elsewhere = summary
        .iter()
        .filter(|s| s.regime != RegimeKind::Teleport)
        .map(|s| s.nu_rate)
        .fold(0.0, f64::max);
    let nu_ok = nu_elsewhere == 0.0;

    let beta = experiment::sweep(&RunSpec {
        command: Command::Sweep,
        sweep_axis: Some(SweepAxis::BetaOut),
        sweep_values: vec![0.01, 0.02, 0.04, 0.083, 0.16, 0.4],
        ..spec(&[RegimeKind::RandomWalk, RegimeKind::StopAndGo])
    })
    .unwrap();
    let at = |v: f64| beta.rate(Some(v), "ppc").unwrap();
    let beta_ok = at(0.083) >= at(0.01) && at(0.083) >= at(0.4);

    let fixed = experiment::sweep(&RunSpec {
        command: Command::Sweep,
        sweep_axis: Some(SweepAxis::FixedAlpha),
        sweep_values: vec![1.0, 2.0, 4.0, 6.0, 8.0],
        ..spec(&RegimeKind::ALL)
    })
    .unwrap();
    let dynamic = fixed.rate(None, "dynamic").unwrap();
    let fixed_rates: Vec<f64> = [1.0, 2.0, 4.0, 6.0, 8.0].iter().map(|&a| fixed.rate(Some(a), "ppc").unwrap()).collect();
    let fixed_ok = fixed_rates.iter().all(|r| dynamic >= *r);

    (
        ordering && nu_ok && beta_ok && fixed_ok,
        format!(
            "α≥2 Accel easy/med/hard={:.3}/{:.3}/{:.3} [{}]; ν max off-Teleport={nu_elsewhere:.3} Teleport={:.3} [{}]; \
             β_out 0.01/0.083/0.4={:.3}/{:.3}/{:.3} [{}]; dynamic={dynamic:.3} fixed{{1,2,4,6,8}}={:.3?} [{}]",
            ge2[0],
            ge2[1],
            ge2[2],
            tag(ordering),
            of(RegimeKind::Teleport).nu_rate,
            tag(nu_ok),
            at(0.01),
            at(0.083),
            at(0.4),
            tag(beta_ok),
            fixed_rates,
            tag(fixed_ok)
        ),
    )
}

fn c10_noise() -> Verdict {
    let results = experiment::run(&RunSpec {
        noise_sv: 0.3,
        noise_st: 20.0,
        ..spec(&RegimeKind::ALL)
    })
    .unwrap();
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for s in results.summarize() {
        let delta = s.paired_delta.unwrap();
        ok &= delta >= 0.0;
        worst = worst.min(delta);
    }
    (ok, format!("σ_v=0.3 σ_θ=20°: min paired delta over regimes={worst:+.3}"))
}

fn c11_overhead() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [2, 8] {
        let stats = bench_correct_chunk(1000, k, 0).unwrap();
        ok &= stats.p99_ms <= 0.5;
        parts.push(format!("K={k} P99={:.4}ms", stats.p99_ms));
    }
    (ok, parts.join(" "))
}

fn c12_determinism() -> Verdict {
    let invoke = || {
        let out = Process::new(env!("CARGO_BIN_EXE_ppc"))
            .args(["run", "--regimes", "uniform_hard,accel_medium,teleport", "--trials", "20", "--seed-base", "7"])
            .env("PPC_JOBS", "0")
            .output()
            .expect("spawn ppc");
        (out.status.success(), out.stdout)
    };
    let (ok_a, a) = invoke();
    let (ok_b, b) = invoke();
    (
        ok_a && ok_b && !a.is_empty() && a == b,
        format!("two invocations, {} bytes each, identical={}", a.len(), a == b),
    )
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violated"
    }
}

fn main() -> ExitCode {
    let mut verdicts: Vec<(usize, &str, Verdict)> = vec![
        (1, "oracle equivalence, first order", c1_first_order()),
        (2, "oracle equivalence, second order", c2_second_order()),
        (3, "K=2 Fibonacci exactness", c3_k2_profile()),
        (4, "cosh form and λ limits", c4_cosh()),
        (5, "boundary identities", c5_boundary()),
        (6, "latch constants and sustain", c6_latch()),
        (7, "identity under stasis", c7_identity()),
    ];
    let start = Instant::now();
    let results = experiment::run(&spec(&RegimeKind::ALL)).unwrap();
    let elapsed = start.elapsed();
    verdicts.push((8, "behavioral improvement", c8_behavior(&results, elapsed)));
    verdicts.push((9, "diagnostics ordering", c9_diagnostics(&results)));
    verdicts.push((10, "noise robustness", c10_noise()));
    verdicts.push((11, "overhead", c11_overhead()));
    verdicts.push((12, "determinism", c12_determinism()));

    let mut failed = 0;
    for (n, name, (ok, detail)) in &verdicts {
        println!("{} criterion {n:>2} ({name}): {detail}", if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!*ok);
    }
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
