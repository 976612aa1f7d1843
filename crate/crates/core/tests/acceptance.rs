//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always shown. Exits
//! nonzero when a criterion fails for a reason other than a documented gap.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;

use multispan_qkd::composable::{
    optimize_composable, ratio_profile, threshold_from_profile, AttackConfig, RatioProfile,
};
use multispan_qkd::gaussian::{reset_symplectic_watermark, symplectic_watermark};
use multispan_qkd::selfcheck::{
    check_alice_conditional, check_continuous_limit, check_eve_conditional, check_mutual_information, check_reductions,
    check_shared_cm, check_tripartite_cm, check_two_mode_spectrum, CheckOutcome,
};
use multispan_qkd::ultimate::ultimate_kgr;
use multispan_qkd::unconditional::{max_secure_distance, max_tolerable_noise, optimize_unconditional};
use multispan_qkd::{LinkConfig, OptimizerSettings, ProtocolCase, Result, SecurityParams};

const EPS: f64 = 0.05;
const BETA: f64 = 0.95;
const SEED: u64 = 20240601;

/// Thresholds expected on the 1, 3, ..., 199 km grid.
const THRESHOLDS: [(usize, ProtocolCase, usize); 6] = [
    (5, ProtocolCase::PhaseInsensitive, 2),
    (5, ProtocolCase::AmplifiedQuadrature, 3),
    (10, ProtocolCase::PhaseInsensitive, 5),
    (10, ProtocolCase::AmplifiedQuadrature, 8),
    (5, ProtocolCase::DeamplifiedQuadrature, 1),
    (10, ProtocolCase::DeamplifiedQuadrature, 2),
];

/// `(M, case)` thresholds known to differ with the default modulation cap
/// `V <= 200`: for `M = 10` in case IIa the rate optimum sits on the cap at
/// long distances and the late spans keep a small amplification advantage.
const KNOWN_THRESHOLD_GAPS: [(usize, ProtocolCase); 1] = [(10, ProtocolCase::AmplifiedQuadrature)];

struct Verdict {
    id: &'static str,
    passed: bool,
    known_gap: bool,
    detail: String,
}

fn params(case: ProtocolCase) -> SecurityParams {
    SecurityParams::new(BETA, case).unwrap()
}

fn suite(outcomes: &[CheckOutcome]) -> (bool, String) {
    let passed = outcomes.iter().all(CheckOutcome::passed);
    let detail = outcomes
        .iter()
        .map(|o| format!("{} [{} cases] {:.2e} <= {:.0e}", o.name, o.cases, o.max_error, o.tolerance))
        .collect::<Vec<_>>()
        .join("; ");
    (passed, detail)
}

fn c1(profiles: &[(usize, ProtocolCase, usize, RatioProfile)]) -> Result<Verdict> {
    let mut misses = Vec::new();
    let mut detail = Vec::new();
    for (m, case, want, profile) in profiles {
        let got = threshold_from_profile(profile)?;
        detail.push(format!("M={m} {}: {got} (want {want})", case.label()));
        if got != *want {
            misses.push((*m, *case));
        }
    }
    let known_gap = !misses.is_empty() && misses.iter().all(|p| KNOWN_THRESHOLD_GAPS.contains(p));
    Ok(Verdict { id: "C1 threshold attack positions", passed: misses.is_empty(), known_gap, detail: detail.join(", ") })
}

fn c2(s: &OptimizerSettings) -> Result<Verdict> {
    let points: Vec<(f64, usize)> = [5.0, 25.0, 50.0, 100.0].iter().flat_map(|&l| [2, 5, 10].map(|m| (l, m))).collect();
    let rows = points
        .par_iter()
        .map(|&(l, m)| {
            let base = LinkConfig::new(l, m, EPS);
            let a = optimize_unconditional(&base, &params(ProtocolCase::AmplifiedQuadrature), s)?;
            let n = optimize_unconditional(&base, &params(ProtocolCase::NoAmplifier), s)?;
            Ok((a.g_opt - 1.0, (a.kgr - n.kgr).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let dg = rows.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let dk = rows.iter().map(|r| r.1).fold(0.0f64, f64::max);
    Ok(Verdict {
        id: "C2 case IIa null result",
        passed: dg == 0.0 && dk <= 1e-6,
        known_gap: false,
        detail: format!("{} points, max g_opt - 1 = {dg:.1e}, max |K_IIa - K_n| = {dk:.1e} (<= 1e-6)", rows.len()),
    })
}

fn c3(s: &OptimizerSettings) -> Result<Verdict> {
    let lengths: Vec<f64> = (0..=40).map(|i| 5.0 * i as f64).collect();
    let gains = lengths
        .par_iter()
        .map(|&l| {
            let base = LinkConfig::new(l, 10, EPS);
            let b = optimize_unconditional(&base, &params(ProtocolCase::DeamplifiedQuadrature), s)?.kgr;
            let n = optimize_unconditional(&base, &params(ProtocolCase::NoAmplifier), s)?.kgr;
            Ok(if n > 0.0 { b / n - 1.0 } else { f64::NAN })
        })
        .collect::<Result<Vec<_>>>()?;
    let (best_l, best) = lengths
        .iter()
        .zip(&gains)
        .filter(|(_, g)| g.is_finite())
        .fold((0.0, f64::NEG_INFINITY), |acc, (&l, &g)| if g > acc.1 { (l, g) } else { acc });
    let base = LinkConfig::new(0.0, 10, EPS);
    let d_b = max_secure_distance(&base, &params(ProtocolCase::DeamplifiedQuadrature), s, 400.0)?;
    let d_n = max_secure_distance(&base, &params(ProtocolCase::NoAmplifier), s, 400.0)?;
    let further = matches!((d_b, d_n), (Some(b), Some(n)) if b > n);
    Ok(Verdict {
        id: "C3 case IIb enhancement",
        passed: best >= 0.05 && further,
        known_gap: false,
        detail: format!(
            "M=10: max K_IIb/K_n - 1 = {:.1}% at L={best_l} km (>= 5%), secure distance IIb {:?} km vs n {:?} km",
            100.0 * best,
            d_b,
            d_n
        ),
    })
}

fn c8(s: &OptimizerSettings, profiles: &[(usize, ProtocolCase, usize, RatioProfile)]) -> Result<Verdict> {
    let mut notes = Vec::new();
    let mut passed = true;

    // maximal tolerable noise: IIb above the benchmark and growing with M
    let lengths = [20.0, 60.0, 100.0, 140.0];
    let eps_rows = lengths
        .par_iter()
        .map(|&l| {
            let n = max_tolerable_noise(&LinkConfig::new(l, 1, EPS), &params(ProtocolCase::NoAmplifier), s)?;
            let mut row = vec![n];
            for m in [2, 5, 10] {
                row.push(max_tolerable_noise(
                    &LinkConfig::new(l, m, EPS),
                    &params(ProtocolCase::DeamplifiedQuadrature),
                    s,
                )?);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let eps_ok = eps_rows.iter().all(|r| r.windows(2).all(|w| w[1] >= w[0] - 2e-4));
    passed &= eps_ok;
    notes.push(format!("eps_max(n <= IIb M=2 <= 5 <= 10) on {} lengths: {eps_ok}", lengths.len()));

    // case I ratio never above case IIa on the threshold grid
    let mut worst = f64::NEG_INFINITY;
    for m in [5, 10] {
        let find = |c: ProtocolCase| profiles.iter().find(|p| p.0 == m && p.1 == c).map(|p| &p.3).unwrap();
        let (pi, pa) = (find(ProtocolCase::PhaseInsensitive), find(ProtocolCase::AmplifiedQuadrature));
        for (ri, ra) in pi.ratios.iter().flatten().zip(pa.ratios.iter().flatten()) {
            if let (Some(ri), Some(ra)) = (ri, ra) {
                worst = worst.max(ri - ra);
            }
        }
    }
    passed &= worst <= 1e-3;
    notes.push(format!("max R_I - R_IIa = {worst:.1e} (<= 1e-3)"));

    // Holevo-capacity bound above the Shannon rate
    let grid: Vec<(f64, usize)> =
        [10.0, 50.0, 100.0, 150.0].iter().flat_map(|&l| [1, 4, 7, 10].map(|k| (l, k))).collect();
    let gap = grid
        .par_iter()
        .map(|&(l, k)| {
            let base = LinkConfig::new(l, 10, EPS);
            let attack = AttackConfig::new(k);
            let p = params(ProtocolCase::PhaseInsensitive);
            Ok(ultimate_kgr(&base, &p, attack, s)?.kgr_upper - optimize_composable(&base, &p, attack, s)?.kgr)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    passed &= gap >= -1e-9;
    notes.push(format!("min K~_I - K_I = {gap:.2e} on {} points", grid.len()));

    // ratios start at one for the amplified-quadrature measurements
    let mut first = 0.0f64;
    for (_, case, _, profile) in profiles {
        if *case != ProtocolCase::DeamplifiedQuadrature {
            for row in &profile.ratios {
                if let Some(r) = row[0] {
                    first = first.max((r - 1.0).abs());
                }
            }
        }
    }
    passed &= first < 1e-3;
    notes.push(format!("max |R - 1| at L=1 km for I/IIa = {first:.1e} (< 1e-3)"));

    Ok(Verdict { id: "C8 monotonicity and ordering", passed, known_gap: false, detail: notes.join("; ") })
}

fn run() -> Result<Vec<Verdict>> {
    let s = OptimizerSettings::default();
    reset_symplectic_watermark();
    let mut out = Vec::new();

    let lengths: Vec<f64> = (0..100).map(|i| 1.0 + 2.0 * i as f64).collect();
    let profiles = THRESHOLDS
        .iter()
        .map(|&(m, case, want)| {
            Ok((m, case, want, ratio_profile(&LinkConfig::new(0.0, m, EPS), &params(case), &lengths, &s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(c1(&profiles)?);
    out.push(c2(&s)?);
    out.push(c3(&s)?);

    let mut rng = StdRng::seed_from_u64(SEED);
    let (passed, detail) = suite(&[
        check_shared_cm(&mut rng, 200)?,
        check_tripartite_cm(&mut rng, 200)?,
        check_two_mode_spectrum(&mut rng, 200)?,
    ]);
    out.push(Verdict { id: "C4 oracle equivalence", passed, known_gap: false, detail });
    let (passed, detail) = suite(&[check_reductions(&mut rng, 200)?]);
    out.push(Verdict { id: "C5 reduction identities", passed, known_gap: false, detail });
    let (passed, detail) = suite(&[
        check_mutual_information(&mut rng, 100)?,
        check_alice_conditional(&mut rng, 100)?,
        check_eve_conditional(&mut rng, 100)?,
    ]);
    out.push(Verdict { id: "C6 homodyne-limit consistency", passed, known_gap: false, detail });
    let (passed, detail) = suite(&[check_continuous_limit()?]);
    out.push(Verdict { id: "C7 continuous-amplification limit", passed, known_gap: false, detail });

    out.push(c8(&s, &profiles)?);

    let w = symplectic_watermark();
    out.push(Verdict {
        id: "C9 physicality sweep",
        passed: w >= 1.0 - 1e-9,
        known_gap: false,
        detail: format!("smallest symplectic eigenvalue seen = 1 - {:.1e}", (1.0 - w).max(0.0)),
    });
    Ok(out)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let verdicts = match run() {
        Ok(v) => v,
        Err(e) => {
            println!("FAIL acceptance aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut unexpected = 0;
    for v in &verdicts {
        let tag = match (v.passed, v.known_gap) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known gap)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("{tag} {}: {}", v.id, v.detail);
    }
    println!(
        "acceptance: {} criteria, {unexpected} unexpected failures, {:.1} s",
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
