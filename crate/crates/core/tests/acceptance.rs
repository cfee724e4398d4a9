//! One test per acceptance criterion; each prints a single PASS/FAIL line.

mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhythm::analysis::{
    analytic_link_avg_with_k, analytic_link_self_to_self, analytic_link_vpki_to_vpki, anonymity_sets, check_oracles,
    sweep_grid, LinkKind,
};
use rhythm::crypto::{MockProvider, SharedProvider};
use rhythm::experiment::{Experiment, ExperimentOutput};
use rhythm::sim::invariants::{check_all, epidemic_completeness};
use rhythm::sim::{run, VehicleClass};
use rhythm::vpki::{Evidence, Vpki, VpkiError, VehicleId};

fn report(n: u32, name: &str, ok: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed <= budget;
    // Written to the handle directly so the line survives test output capture.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {n} [{name}]: {} ({detail}; {:.2}s of {:.0}s budget{})",
        if ok && within { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if within { "" } else { ", over budget" }
    );
    drop(out);
    assert!(ok, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded its runtime budget");
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run_canned(name: &str) -> ExperimentOutput {
    Experiment::from_file(&scenario_path(name)).unwrap().run().unwrap()
}

static ANONYMITY_SETS: OnceLock<(ExperimentOutput, Duration)> = OnceLock::new();

fn canned_sim() -> &'static (ExperimentOutput, Duration) {
    ANONYMITY_SETS.get_or_init(|| {
        let start = Instant::now();
        let out = run_canned("anonymity_sets.json");
        (out, start.elapsed())
    })
}

#[test]
fn criterion_1_formula_identities() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for &n in &[2u64, 10, 100, 1000] {
        for &r in &[0.1, 0.5, 0.9] {
            let inv = 1.0 / n as f64;
            for v in [
                analytic_link_vpki_to_vpki(n, r).unwrap(),
                analytic_link_avg_with_k(n, r, 0).unwrap(),
                analytic_link_avg_with_k(n, r, n).unwrap(),
            ] {
                worst = worst.max((v - inv).abs());
            }
        }
    }
    report(1, "formula identities", worst <= 1e-12, start.elapsed(), Duration::from_secs(1), &format!("max deviation {worst:.3e}"));
}

#[test]
fn criterion_2_point_value() {
    let start = Instant::now();
    let v = analytic_link_self_to_self(100, 1, 0.2).unwrap();
    let ok = (v - 1.0 / 21.0).abs() < 1e-15 && (v - 0.05).abs() < 0.005;
    report(2, "self-to-self point value", ok, start.elapsed(), Duration::from_secs(1), &format!("value {v:.6}"));
}

#[test]
fn criterion_3_oracle_agreement() {
    let start = Instant::now();
    let cells = sweep_grid();
    let checks = check_oracles(&cells, 100_000, 20_240_601, 4.0, |k, p| k.analytic(p)).unwrap();
    let failing: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{} N={} M={} r={} K={} z={:.2}", c.kind, c.params.n, c.params.m, c.params.r, c.params.k, c.z()))
        .collect();
    let kinds = LinkKind::ALL.iter().all(|k| checks.iter().any(|c| c.kind == *k));
    let worst = checks.iter().map(|c| c.z()).fold(0.0, f64::max);
    let detail = format!("{} cells, worst {worst:.2} SE, failing: {failing:?}", checks.len());
    report(3, "oracle agreement", failing.is_empty() && kinds, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_4_anonymity_set_balance() {
    let (out, elapsed) = canned_sim();
    let mut problems = Vec::new();
    let base = out.runs.iter().find(|r| r.label == "baseline").unwrap();
    let rhythm = out.runs.iter().find(|r| r.label == "rhythm").unwrap();
    let exhausted = base.output.log.vehicles_of(VehicleClass::Exhausted);
    if exhausted.len() != 1 {
        problems.push(format!("{} exhausted vehicles", exhausted.len()));
    }
    let target = exhausted[0];
    for slot in 0..base.output.log.slots.len() {
        let (_, s) = anonymity_sets(&base.output.log, slot).unwrap();
        if s != 1 {
            problems.push(format!("baseline slot {slot}: self-certified set {s}"));
        }
    }
    let base_link = base.linking.vehicle(target, 0).unwrap().estimate;
    if base_link != 1.0 {
        problems.push(format!("baseline linking {base_link}"));
    }
    let (n, m, r) = (99.0f64, 1.0f64, 0.5f64);
    let mean = m + r * n;
    let sigma = (n * r * (1.0 - r)).sqrt();
    let mut worst_dev = 0.0f64;
    // Slot 0 precedes the first flagged CAM.
    for slot in 1..rhythm.output.log.slots.len() {
        let (_, s) = anonymity_sets(&rhythm.output.log, slot).unwrap();
        let dev = (s as f64 - mean).abs() / sigma;
        worst_dev = worst_dev.max(dev);
        if dev > 4.0 {
            problems.push(format!("rhythm slot {slot}: self-certified set {s}"));
        }
    }
    let est = rhythm.linking.vehicle(target, 0).unwrap();
    let bound = analytic_link_self_to_self(99, 1, 0.5).unwrap() + 4.0 * est.std_error;
    if est.estimate > bound {
        problems.push(format!("rhythm linking {:.4} > {bound:.4}", est.estimate));
    }
    let detail = format!(
        "baseline link {base_link}, rhythm set worst {worst_dev:.2} sigma, rhythm link {:.4} <= {bound:.4}; {problems:?}",
        est.estimate
    );
    report(4, "anonymity set balance", problems.is_empty(), *elapsed, Duration::from_secs(120), &detail);
}

#[test]
fn criterion_5_protocol_invariants() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 1..=50u64 {
        let out = run(&common::random_scenario(seed)).unwrap();
        if let Some(v) = check_all(&out).first() {
            failures.push(format!("mobile seed {seed}: {v}"));
        }
        let out = run(&common::epidemic_scenario(seed)).unwrap();
        match epidemic_completeness(&out) {
            Ok((v, Some(_))) if v.is_empty() => {}
            Ok((v, Some(_))) => failures.push(format!("static seed {seed}: {}", v[0])),
            Ok((_, None)) => failures.push(format!("static seed {seed}: graph disconnected")),
            Err(e) => failures.push(format!("static seed {seed}: {e}")),
        }
        if let Some(v) = check_all(&out).first() {
            failures.push(format!("static seed {seed}: {v}"));
        }
    }
    let detail = format!("50 mobile + 50 static scenarios, failures: {failures:?}");
    report(5, "protocol invariants", failures.is_empty(), start.elapsed(), Duration::from_secs(300), &detail);
}

#[test]
fn criterion_6_crypto_properties() {
    let start = Instant::now();
    let crypto: SharedProvider = Arc::new(MockProvider);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut problems = Vec::new();
    let mut vpki = Vpki::new(crypto.clone(), 6);
    let members: Vec<_> = (0..20).map(|i| vpki.enroll(VehicleId(i)).unwrap()).collect();
    let (mut rejected, mut tampered) = (0u32, 0u32);
    for case in 0..1000u32 {
        let kp = crypto.keygen(&mut rng);
        let msg: Vec<u8> = (0..rng.gen_range(1..128)).map(|_| rng.gen()).collect();
        let sig = crypto.sign(&kp.secret, &msg).unwrap();
        if !crypto.verify(&kp.public, &msg, &sig).unwrap() {
            problems.push(format!("case {case}: sign/verify"));
        }
        let who = case as usize % members.len();
        let gsig = crypto.group_sign(&members[who].gsk, &msg, &mut rng).unwrap();
        if !crypto.group_verify(vpki.gm.group_public_key(), &msg, &gsig).unwrap() {
            problems.push(format!("case {case}: group verify"));
        }
        let r = vpki.resolve(&Evidence::GroupSignature { message: msg.clone(), signature: gsig.clone() });
        match r {
            Ok(res) if res.identity == VehicleId(who as u32) && res.transcript.len() >= 2 => {}
            other => problems.push(format!("case {case}: open/resolve {other:?}")),
        }
        let mut bad_msg = msg.clone();
        let i = rng.gen_range(0..bad_msg.len());
        bad_msg[i] ^= 1 << rng.gen_range(0..8);
        let mut bad_sig = sig.clone();
        let j = rng.gen_range(0..bad_sig.0.len());
        bad_sig.0[j] ^= 1 << rng.gen_range(0..8);
        let mut bad_gsig = gsig.clone();
        let k = rng.gen_range(0..bad_gsig.0.len());
        bad_gsig.0[k] ^= 1 << rng.gen_range(0..8);
        for rejects in [
            !crypto.verify(&kp.public, &bad_msg, &sig).unwrap_or(false),
            !crypto.verify(&kp.public, &msg, &bad_sig).unwrap_or(false),
            !crypto.group_verify(vpki.gm.group_public_key(), &bad_msg, &gsig).unwrap_or(false),
            !crypto.group_verify(vpki.gm.group_public_key(), &msg, &bad_gsig).unwrap_or(false),
        ] {
            tampered += 1;
            rejected += u32::from(rejects);
        }
    }
    if rejected != tampered {
        problems.push(format!("tamper rejection {rejected}/{tampered}"));
    }
    vpki.register(VehicleId(100)).unwrap();
    let ticket = vpki.issue_ticket(VehicleId(100)).unwrap();
    vpki.gm_register(&ticket).unwrap();
    if vpki.gm_register(&ticket).unwrap_err() != VpkiError::TicketReused {
        problems.push("GM accepted a reused ticket".into());
    }
    let short = vpki.resolutions().iter().filter(|r| r.transcript.len() < 2).count();
    if short > 0 || vpki.resolutions().is_empty() {
        problems.push(format!("{short} resolutions touched fewer than 2 entities"));
    }
    let detail = format!("1000 cases, tamper rejection {rejected}/{tampered}, {} resolutions; {problems:?}", vpki.resolutions().len());
    report(6, "crypto properties", problems.is_empty(), start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_7_determinism() {
    let start = Instant::now();
    let mut problems = Vec::new();
    let (first, _) = canned_sim();
    let second = run_canned("anonymity_sets.json");
    for (a, b) in first.runs.iter().zip(&second.runs) {
        if a.output.log.to_bytes() != b.output.log.to_bytes() {
            problems.push(format!("anonymity_sets {} log differs", a.label));
        }
    }
    let csv = |o: &ExperimentOutput| o.tables.iter().map(|t| t.to_csv().unwrap()).collect::<Vec<_>>();
    if csv(first) != csv(&second) {
        problems.push("anonymity_sets CSV differs".into());
    }
    for name in ["m_sweep.json", "k_sweep.json"] {
        if csv(&run_canned(name)) != csv(&run_canned(name)) {
            problems.push(format!("{name} CSV differs"));
        }
    }
    let detail = format!("all canned scenarios replayed; {problems:?}");
    report(7, "determinism", problems.is_empty(), start.elapsed(), Duration::from_secs(300), &detail);
}
