//! Run configuration: a flat `key = value` file with optional `[section]`
//! headers, plus `--key=value` overrides.
//!
//! ```text
//! [link]
//! length_km = 100
//! spans = 0, 2, 5, 10
//! excess_noise = 0.05
//!
//! [security]
//! beta = 0.95
//! cases = IIb
//!
//! [sweep]
//! variable = L
//! range = 1:200:100
//! ```
//!
//! Keys are unique across sections, so a key may be written bare or
//! qualified (`link.spans`). `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::link::LinkConfig;
use crate::optimize::OptimizerSettings;
use crate::protocol::ProtocolCase;

/// `(section, key, default)` in echo order.
const KEYS: &[(&str, &str, &str)] = &[
    ("link", "length_km", "50"),
    ("link", "spans", "5"),
    ("link", "loss_db_per_km", "0.2"),
    ("link", "excess_noise", "0.05"),
    ("link", "g_inf", "1, 1.2, 1.5"),
    ("security", "beta", "0.95"),
    ("security", "cases", "IIb"),
    ("attack", "k", "all"),
    ("optimizer", "v_min", "1.0001"),
    ("optimizer", "v_max", "200"),
    ("optimizer", "v_grid", "60"),
    ("optimizer", "g_grid", "40"),
    ("optimizer", "refine_iters", "50"),
    ("optimizer", "tol", "1e-7"),
    ("sweep", "variable", "L"),
    ("sweep", "range", ""),
    ("sweep", "values", ""),
    ("selfcheck", "samples", "200"),
    ("selfcheck", "seed", "20240601"),
];

/// Quantity scanned by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Length,
    ExcessNoise,
    AttackSpan,
    Spans,
    OverallGain,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Length => "L",
            SweepVariable::ExcessNoise => "epsilon",
            SweepVariable::AttackSpan => "k",
            SweepVariable::Spans => "M",
            SweepVariable::OverallGain => "G_inf",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, SweepVariable::AttackSpan | SweepVariable::Spans)
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L" | "length" | "length_km" => Ok(SweepVariable::Length),
            "epsilon" | "eps" | "excess_noise" => Ok(SweepVariable::ExcessNoise),
            "k" => Ok(SweepVariable::AttackSpan),
            "M" | "spans" => Ok(SweepVariable::Spans),
            "G_inf" | "g_inf" => Ok(SweepVariable::OverallGain),
            other => Err(Error::Config(format!("unknown sweep variable '{other}'"))),
        }
    }
}

/// One swept quantity and its values; everything else stays fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl SweepSpec {
    /// `steps >= 2` equally spaced points from `lo` to `hi > lo`.
    pub fn range(variable: SweepVariable, lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Config(format!("sweep needs at least 2 steps, got {steps}")));
        }
        if !(hi > lo) {
            return Err(Error::Config(format!("empty sweep range {lo}:{hi}")));
        }
        let values = (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect();
        Self::list(variable, values)
    }

    pub fn list(variable: SweepVariable, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        if variable.is_integer() && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(Error::Config(format!("sweep over {} needs non-negative integers", variable.name())));
        }
        Ok(Self { variable, values })
    }
}

/// Attack positions: every span or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpans {
    All,
    List(Vec<usize>),
}

impl AttackSpans {
    pub fn resolve(&self, spans: usize) -> Result<Vec<usize>> {
        match self {
            AttackSpans::All => Ok((1..=spans).collect()),
            AttackSpans::List(ks) => {
                if let Some(k) = ks.iter().find(|&&k| k == 0 || k > spans) {
                    return Err(Error::Config(format!("attacked span k = {k} outside 1..={spans}")));
                }
                Ok(ks.clone())
            }
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub length_km: f64,
    /// `0` selects the unamplified benchmark.
    pub spans: Vec<usize>,
    pub loss_db_per_km: f64,
    pub excess_noise: f64,
    pub g_inf: Vec<f64>,
    pub beta: f64,
    pub cases: Vec<ProtocolCase>,
    pub attack: AttackSpans,
    pub optimizer: OptimizerSettings,
    pub sweep: Option<SweepSpec>,
    pub samples: usize,
    pub seed: u64,
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    /// Base fiber for `spans` (0 maps to a single unamplified span).
    pub fn link(&self, length_km: f64, spans: usize) -> LinkConfig {
        LinkConfig::new(length_km, spans.max(1), self.excess_noise).with_loss_rate(self.loss_db_per_km)
    }

    /// The resolved values, one `# key = value` line each.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (section, key, _) in KEYS {
            let full = format!("{section}.{key}");
            let value = &self.entries[&full];
            let _ = writeln!(out, "# {full} = {value}");
        }
        out
    }
}

fn find_key(name: &str) -> Option<(&'static str, &'static str)> {
    let (section, key) = match name.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, name),
    };
    KEYS.iter().find(|(s, k, _)| *k == key && section.is_none_or(|want| want == *s)).map(|(s, k, _)| (*s, *k))
}

/// Parses config text into qualified `section.key -> value` entries.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| Error::Config(format!("line {}: {msg}", no + 1));
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| at(format!("unterminated section header '{line}'")))?;
            let name = name.trim();
            if !KEYS.iter().any(|(s, _, _)| *s == name) {
                return Err(at(format!("unknown section '{name}'")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, got '{line}'")))?;
        let key = key.trim();
        let qualified = match (&section, key.contains('.')) {
            (Some(s), false) => format!("{s}.{key}"),
            _ => key.to_string(),
        };
        let (s, k) = find_key(&qualified).ok_or_else(|| at(format!("unknown key '{key}'")))?;
        out.insert(format!("{s}.{k}"), value.trim().to_string());
    }
    Ok(out)
}

/// Applies `--key=value` arguments on top of `entries`.
pub fn apply_overrides(entries: &mut BTreeMap<String, String>, overrides: &[String]) -> Result<()> {
    for arg in overrides {
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("override '{arg}' must look like --key=value")))?;
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{arg}' must look like --key=value")))?;
        let (s, k) = find_key(key.trim()).ok_or_else(|| Error::Config(format!("unknown override key '{key}'")))?;
        entries.insert(format!("{s}.{k}"), value.trim().to_string());
    }
    Ok(())
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("key '{key}' is empty")));
    }
    items.into_iter().map(|s| parse_num(key, s)).collect()
}

/// Resolves defaults, file entries and overrides into a validated config.
pub fn resolve(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut entries: BTreeMap<String, String> =
        KEYS.iter().map(|(s, k, d)| (format!("{s}.{k}"), d.to_string())).collect();
    entries.extend(parse_entries(text)?);
    apply_overrides(&mut entries, overrides)?;
    let get = |k: &str| entries[k].as_str();

    let attack = match get("attack.k") {
        "all" => AttackSpans::All,
        v => AttackSpans::List(parse_list("k", v)?),
    };
    let cases = get("security.cases")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(ProtocolCase::from_str)
        .collect::<Result<Vec<_>>>()?;
    if cases.is_empty() {
        return Err(Error::Config("key 'cases' is empty".into()));
    }
    let optimizer = OptimizerSettings {
        v_range: (parse_num("v_min", get("optimizer.v_min"))?, parse_num("v_max", get("optimizer.v_max"))?),
        v_grid: parse_num("v_grid", get("optimizer.v_grid"))?,
        g_grid: parse_num("g_grid", get("optimizer.g_grid"))?,
        refine_iters: parse_num("refine_iters", get("optimizer.refine_iters"))?,
        tol: parse_num("tol", get("optimizer.tol"))?,
    };
    optimizer.validate()?;

    let variable: SweepVariable = get("sweep.variable").parse()?;
    let sweep = match (get("sweep.range"), get("sweep.values")) {
        ("", "") => None,
        (range, "") => {
            let parts: Vec<&str> = range.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!("sweep range '{range}' must be lo:hi:steps")));
            }
            Some(SweepSpec::range(
                variable,
                parse_num("range", parts[0])?,
                parse_num("range", parts[1])?,
                parse_num("range", parts[2])?,
            )?)
        }
        ("", values) => Some(SweepSpec::list(variable, parse_list("values", values)?)?),
        _ => return Err(Error::Config("give either sweep.range or sweep.values, not both".into())),
    };

    let cfg = RunConfig {
        length_km: parse_num("length_km", get("link.length_km"))?,
        spans: parse_list("spans", get("link.spans"))?,
        loss_db_per_km: parse_num("loss_db_per_km", get("link.loss_db_per_km"))?,
        excess_noise: parse_num("excess_noise", get("link.excess_noise"))?,
        g_inf: parse_list("g_inf", get("link.g_inf"))?,
        beta: parse_num("beta", get("security.beta"))?,
        cases,
        attack,
        optimizer,
        sweep,
        samples: parse_num("samples", get("selfcheck.samples"))?,
        seed: parse_num("seed", get("selfcheck.seed"))?,
        entries: entries.clone(),
    };
    crate::protocol::SecurityParams::new(cfg.beta, ProtocolCase::NoAmplifier)?;
    for &m in &cfg.spans {
        cfg.link(cfg.length_km, m).validate()?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = resolve("", &[]).unwrap();
        assert_eq!(cfg.spans, vec![5]);
        assert_eq!(cfg.beta, 0.95);
        assert_eq!(cfg.excess_noise, 0.05);
        assert_eq!(cfg.cases, vec![ProtocolCase::DeamplifiedQuadrature]);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[link]\nspans = 2, 5 # two links\n[sweep]\nrange = 10:30:3\n";
        let cfg = resolve(text, &["--beta=0.9".into(), "--link.excess_noise=0.02".into()]).unwrap();
        assert_eq!(cfg.spans, vec![2, 5]);
        assert_eq!(cfg.beta, 0.9);
        assert_eq!(cfg.excess_noise, 0.02);
        assert_eq!(cfg.sweep.unwrap().values, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn diagnostics_name_the_line() {
        let err = resolve("[link]\nspans = 5\nbogus = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = resolve("spans 5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(resolve("[nowhere]\n", &[]).is_err());
    }

    #[test]
    fn empty_sweeps_are_rejected() {
        assert!(resolve("range = 5:5:2\n", &[]).is_err());
        assert!(resolve("range = 1:5:1\n", &[]).is_err());
        assert!(resolve("range = 1:5\n", &[]).is_err());
        assert!(resolve("variable = k\nvalues = 1.5\n", &[]).is_err());
    }

    #[test]
    fn attack_list_validation() {
        let cfg = resolve("k = 1, 6\n", &[]).unwrap();
        assert!(cfg.attack.resolve(5).is_err());
        assert_eq!(AttackSpans::All.resolve(3).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn echo_is_complete() {
        let cfg = resolve("", &["--spans=10".into()]).unwrap();
        let echo = cfg.echo();
        assert!(echo.contains("# link.spans = 10\n"));
        assert_eq!(echo.lines().count(), KEYS.len());
    }
}
