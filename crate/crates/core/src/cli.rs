//! Table-producing commands behind the `multispan-qkd` binary.
//!
//! Every command writes the resolved configuration as `#` comment lines,
//! then a CSV header and one row per parameter point. Rows are computed in
//! parallel and written in a fixed order. Numbers carry 12 significant
//! digits; a failed row keeps its place with `nan` fields and the error in
//! the trailing `status` column.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::composable::{benchmark_composable, optimize_composable, AttackConfig};
use crate::config::{RunConfig, SweepVariable};
use crate::error::{Error, Result};
use crate::link::{continuous_limit_for, effective_channel, Amplifier};
use crate::protocol::{ProtocolCase, SecurityParams};
use crate::selfcheck::run_selfcheck;
use crate::ultimate::{ultimate_benchmark, ultimate_kgr};
use crate::unconditional::{max_tolerable_noise, optimize_unconditional};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    KgrUnconditional,
    KgrComposable,
    MaxNoise,
    Ultimate,
    ContinuousLimit,
    SelfCheck,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::KgrUnconditional,
        Command::KgrComposable,
        Command::MaxNoise,
        Command::Ultimate,
        Command::ContinuousLimit,
        Command::SelfCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::KgrUnconditional => "kgr-unconditional",
            Command::KgrComposable => "kgr-composable",
            Command::MaxNoise => "max-noise",
            Command::Ultimate => "ultimate",
            Command::ContinuousLimit => "continuous-limit",
            Command::SelfCheck => "selfcheck",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Command::KgrUnconditional => {
                &["L_km", "case", "M", "kgr_bits", "v_opt", "g_opt", "g_max", "i_ab", "chi_be", "status"]
            }
            Command::KgrComposable => &["L_km", "case", "M", "k", "kgr_bits", "key_ratio", "v_opt", "g_opt", "status"],
            Command::MaxNoise => &["L_km", "case", "M", "eps_max", "status"],
            Command::Ultimate => &[
                "L_km",
                "M",
                "k",
                "kgr_upper",
                "chi_ab",
                "chi_be",
                "v_opt",
                "g_opt",
                "kgr_composable",
                "ratio_holevo_benchmark",
                "ratio_shannon_benchmark",
                "status",
            ],
            Command::ContinuousLimit => &[
                "L_km", "G_inf", "M", "t1", "n1", "t2", "n2", "t1_limit", "n1_limit", "t2_limit", "n2_limit", "status",
            ],
            Command::SelfCheck => &["check", "cases", "max_error", "tolerance", "passed"],
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

/// 1 for input problems, 2 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) | Error::NonPhysical(_) => 2,
        _ => 1,
    }
}

/// `x` with 12 significant digits, trailing zeros removed.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        trim(&format!("{x:.*}", (11 - exp) as usize))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    length_km: f64,
    excess_noise: f64,
    spans: usize,
    k: usize,
    g_inf: f64,
}

fn sweep_values(cfg: &RunConfig, var: SweepVariable) -> Option<&[f64]> {
    cfg.sweep.as_ref().filter(|s| s.variable == var).map(|s| s.values.as_slice())
}

/// Cartesian product of the sweep and the fixed lists, sweep outermost.
fn points(cfg: &RunConfig, with_attack: bool, with_g_inf: bool) -> Result<Vec<Point>> {
    let lengths = sweep_values(cfg, SweepVariable::Length).map(<[f64]>::to_vec).unwrap_or(vec![cfg.length_km]);
    let noises = sweep_values(cfg, SweepVariable::ExcessNoise).map(<[f64]>::to_vec).unwrap_or(vec![cfg.excess_noise]);
    let spans: Vec<usize> = sweep_values(cfg, SweepVariable::Spans)
        .map(|v| v.iter().map(|&m| m as usize).collect())
        .unwrap_or(cfg.spans.clone());
    let g_infs = sweep_values(cfg, SweepVariable::OverallGain).map(<[f64]>::to_vec).unwrap_or(cfg.g_inf.clone());
    let swept_k: Option<Vec<usize>> =
        sweep_values(cfg, SweepVariable::AttackSpan).map(|v| v.iter().map(|&k| k as usize).collect());
    if swept_k.is_some() && !with_attack {
        return Err(Error::Config("a sweep over k needs an attack model".into()));
    }
    if sweep_values(cfg, SweepVariable::OverallGain).is_some() && !with_g_inf {
        return Err(Error::Config("G_inf is only used by continuous-limit".into()));
    }
    let mut out = Vec::new();
    for &length_km in &lengths {
        for &excess_noise in &noises {
            for &m in &spans {
                let ks = if with_attack {
                    match &swept_k {
                        Some(ks) => crate::config::AttackSpans::List(ks.clone()).resolve(m.max(1))?,
                        None => cfg.attack.resolve(m.max(1))?,
                    }
                } else {
                    vec![0]
                };
                let gs = if with_g_inf { g_infs.clone() } else { vec![1.0] };
                for &k in &ks {
                    for &g_inf in &gs {
                        out.push(Point { length_km, excess_noise, spans: m, k, g_inf });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn row_case(case: ProtocolCase, spans: usize) -> ProtocolCase {
    if spans == 0 {
        ProtocolCase::NoAmplifier
    } else {
        case
    }
}

fn fiber(cfg: &RunConfig, p: &Point) -> crate::link::LinkConfig {
    cfg.link(p.length_km, p.spans).with_excess_noise(p.excess_noise)
}

fn status_of(err: &Error) -> String {
    format!("error: {}", err.to_string().replace([',', '\n'], ";"))
}

fn render(prefix: &[String], values: Result<Vec<f64>>, numeric_columns: usize) -> String {
    let mut fields = prefix.to_vec();
    match values {
        Ok(v) => {
            fields.extend(v.into_iter().map(format_number));
            fields.push("ok".into());
        }
        Err(e) => {
            fields.extend(std::iter::repeat_n("nan".to_string(), numeric_columns));
            fields.push(status_of(&e));
        }
    }
    fields.join(",")
}

/// `(point, case)` pairs with duplicate benchmark rows for `M = 0` removed.
fn case_points(cfg: &RunConfig, pts: Vec<Point>) -> Vec<(Point, ProtocolCase)> {
    let mut out: Vec<(Point, ProtocolCase)> = Vec::new();
    for p in pts {
        for &case in &cfg.cases {
            let case = row_case(case, p.spans);
            let dup = out.iter().any(|(q, c)| {
                *c == case
                    && q.spans == p.spans
                    && q.k == p.k
                    && q.length_km == p.length_km
                    && q.excess_noise == p.excess_noise
            });
            if !dup {
                out.push((p, case));
            }
        }
    }
    out
}

fn kgr_unconditional_rows(cfg: &RunConfig) -> Result<Vec<String>> {
    let work = case_points(cfg, points(cfg, false, false)?);
    Ok(work
        .par_iter()
        .map(|(p, case)| {
            let prefix = vec![format_number(p.length_km), case.label().to_string(), p.spans.to_string()];
            let values = SecurityParams::new(cfg.beta, *case)
                .and_then(|params| optimize_unconditional(&fiber(cfg, p), &params, &cfg.optimizer))
                .map(|r| vec![r.kgr, r.v_opt, r.g_opt, r.g_max, r.i_ab, r.chi_be]);
            render(&prefix, values, 6)
        })
        .collect())
}

fn kgr_composable_rows(cfg: &RunConfig) -> Result<Vec<String>> {
    let work = case_points(cfg, points(cfg, true, false)?);
    Ok(work
        .par_iter()
        .map(|(p, case)| {
            let prefix =
                vec![format_number(p.length_km), case.label().to_string(), p.spans.to_string(), p.k.to_string()];
            let values = (|| {
                let params = SecurityParams::new(cfg.beta, *case)?;
                let base = fiber(cfg, p);
                let attack = AttackConfig::new(p.k);
                let r = optimize_composable(&base, &params, attack, &cfg.optimizer)?;
                let bench = benchmark_composable(&base, cfg.beta, attack, &cfg.optimizer)?;
                let ratio = if bench.kgr > 0.0 { r.kgr / bench.kgr } else { f64::NAN };
                Ok(vec![r.kgr, ratio, r.v_opt, r.g_opt])
            })();
            render(&prefix, values, 4)
        })
        .collect())
}

fn max_noise_rows(cfg: &RunConfig) -> Result<Vec<String>> {
    if sweep_values(cfg, SweepVariable::ExcessNoise).is_some() {
        return Err(Error::Config("max-noise solves for epsilon; sweep another variable".into()));
    }
    let work = case_points(cfg, points(cfg, false, false)?);
    Ok(work
        .par_iter()
        .map(|(p, case)| {
            let prefix = vec![format_number(p.length_km), case.label().to_string(), p.spans.to_string()];
            let values = SecurityParams::new(cfg.beta, *case)
                .and_then(|params| max_tolerable_noise(&fiber(cfg, p), &params, &cfg.optimizer))
                .map(|e| vec![e]);
            render(&prefix, values, 1)
        })
        .collect())
}

fn ultimate_rows(cfg: &RunConfig) -> Result<Vec<String>> {
    let work = points(cfg, true, false)?;
    Ok(work
        .par_iter()
        .map(|p| {
            let prefix = vec![format_number(p.length_km), p.spans.to_string(), p.k.to_string()];
            let values = (|| {
                let case = row_case(ProtocolCase::PhaseInsensitive, p.spans);
                let params = SecurityParams::new(cfg.beta, case)?;
                let base = fiber(cfg, p);
                let attack = AttackConfig::new(p.k);
                let upper = ultimate_kgr(&base, &params, attack, &cfg.optimizer)?;
                let lower = optimize_composable(&base, &params, attack, &cfg.optimizer)?;
                let holevo_bench = ultimate_benchmark(&base, cfg.beta, attack, &cfg.optimizer)?;
                let shannon_bench = benchmark_composable(&base, cfg.beta, attack, &cfg.optimizer)?;
                let ratio = |den: f64| if den > 0.0 { upper.kgr_upper / den } else { f64::NAN };
                Ok(vec![
                    upper.kgr_upper,
                    upper.chi_ab,
                    upper.chi_be,
                    upper.v_opt,
                    upper.g_opt,
                    lower.kgr,
                    ratio(holevo_bench.kgr_upper),
                    ratio(shannon_bench.kgr),
                ])
            })();
            render(&prefix, values, 8)
        })
        .collect())
}

fn continuous_limit_rows(cfg: &RunConfig) -> Result<Vec<String>> {
    let work = points(cfg, false, true)?;
    Ok(work
        .par_iter()
        .map(|p| {
            let prefix = vec![format_number(p.length_km), format_number(p.g_inf), p.spans.to_string()];
            let values = (|| {
                if p.spans == 0 {
                    return Err(Error::Config("the continuous limit needs M >= 1".into()));
                }
                let base = fiber(cfg, p);
                let gain = p.g_inf.powf(1.0 / p.spans as f64);
                let finite = effective_channel(&base.with_amplifier(Amplifier::PhaseSensitive, gain));
                let limit = continuous_limit_for(&base, p.g_inf)?;
                Ok(vec![finite.t_q, finite.n_q, finite.t_p, finite.n_p, limit.t_q, limit.n_q, limit.t_p, limit.n_p])
            })();
            render(&prefix, values, 8)
        })
        .collect())
}

/// Runs `cmd` and writes its table to `out`. Returns `false` only when
/// `selfcheck` finds a failing suite.
pub fn run(cmd: Command, cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let io = |e: std::io::Error| Error::Numerical(format!("write failed: {e}"));
    let mut passed = true;
    let rows = match cmd {
        Command::KgrUnconditional => kgr_unconditional_rows(cfg)?,
        Command::KgrComposable => kgr_composable_rows(cfg)?,
        Command::MaxNoise => max_noise_rows(cfg)?,
        Command::Ultimate => ultimate_rows(cfg)?,
        Command::ContinuousLimit => continuous_limit_rows(cfg)?,
        Command::SelfCheck => {
            let report = run_selfcheck(cfg.samples, cfg.seed)?;
            passed = report.all_passed();
            report
                .outcomes
                .iter()
                .map(|o| {
                    format!(
                        "{},{},{},{},{}",
                        o.name,
                        o.cases,
                        format_number(o.max_error),
                        format_number(o.tolerance),
                        o.passed()
                    )
                })
                .collect()
        }
    };
    write!(out, "# command = {}\n{}", cmd.name(), cfg.echo()).map_err(io)?;
    writeln!(out, "{}", cmd.columns().join(",")).map_err(io)?;
    for row in rows {
        writeln!(out, "{row}").map_err(io)?;
    }
    Ok(passed)
}
