//! Multispan fiber link with an amplifier after every span.
//!
//! Spans are identical: each is a thermal-loss channel of transmissivity
//! `T = 10^(-kappa L / (10 M))` followed by an amplifier of gain `G`. The
//! thermal photon number of a span is chosen so that the unamplified link
//! reproduces a single thermal-loss channel with total excess noise `epsilon`.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::gaussian::{apply_cp, embed_on_modes, CovarianceMatrix, GaussianCPMap};

/// Typical attenuation of standard single-mode fiber, dB/km.
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Amplifier {
    None,
    /// Two-mode squeezing with a vacuum idler that is traced out.
    PhaseInsensitive,
    /// Single-mode squeezing: `q` amplified, `p` deamplified.
    PhaseSensitive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub length_km: f64,
    pub spans: usize,
    pub loss_db_per_km: f64,
    pub excess_noise: f64,
    pub amplifier: Amplifier,
    /// Power gain of every amplifier (variance gain of the amplified quadrature).
    pub gain: f64,
}

impl LinkConfig {
    /// Unamplified link with the default fiber loss.
    pub fn new(length_km: f64, spans: usize, excess_noise: f64) -> Self {
        Self {
            length_km,
            spans,
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
            excess_noise,
            amplifier: Amplifier::None,
            gain: 1.0,
        }
    }

    pub fn with_amplifier(mut self, amplifier: Amplifier, gain: f64) -> Self {
        self.amplifier = amplifier;
        self.gain = if amplifier == Amplifier::None { 1.0 } else { gain };
        self
    }

    pub fn with_loss_rate(mut self, loss_db_per_km: f64) -> Self {
        self.loss_db_per_km = loss_db_per_km;
        self
    }

    pub fn with_length(mut self, length_km: f64) -> Self {
        self.length_km = length_km;
        self
    }

    pub fn with_excess_noise(mut self, excess_noise: f64) -> Self {
        self.excess_noise = excess_noise;
        self
    }

    pub fn with_spans(mut self, spans: usize) -> Self {
        self.spans = spans;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km >= 0.0) || !self.length_km.is_finite() {
            return Err(Error::Config(format!("length {} km must be finite and >= 0", self.length_km)));
        }
        if self.spans == 0 {
            return Err(Error::Config("a link needs at least one span".into()));
        }
        if !(self.loss_db_per_km >= 0.0) || !self.loss_db_per_km.is_finite() {
            return Err(Error::Config(format!("loss rate {} dB/km must be >= 0", self.loss_db_per_km)));
        }
        if !(self.excess_noise >= 0.0) || !self.excess_noise.is_finite() {
            return Err(Error::Config(format!("excess noise {} must be >= 0", self.excess_noise)));
        }
        if !(self.gain >= 1.0) || !self.gain.is_finite() {
            return Err(Error::Config(format!("gain {} must be >= 1", self.gain)));
        }
        if self.amplifier == Amplifier::None && self.gain != 1.0 {
            return Err(Error::Config("an unamplified link has unit gain".into()));
        }
        Ok(())
    }

    pub fn span_params(&self) -> SpanParams {
        span_params(self)
    }

    /// `T_n = T^M`, the transmissivity of the whole fiber without amplifiers.
    pub fn total_transmissivity(&self) -> f64 {
        10f64.powf(-self.loss_db_per_km * self.length_km / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanParams {
    pub transmissivity: f64,
    pub thermal_photons: f64,
}

/// Per-span transmissivity and thermal photon number
/// `n_T = T^M eps / (2 (1 - T^M))`, zero on a lossless or noiseless link.
pub fn span_params(config: &LinkConfig) -> SpanParams {
    let m = config.spans.max(1) as f64;
    let transmissivity = 10f64.powf(-config.loss_db_per_km * config.length_km / (10.0 * m));
    let total = config.total_transmissivity();
    let thermal_photons = if config.excess_noise == 0.0 || total >= 1.0 {
        0.0
    } else {
        total * config.excess_noise / (2.0 * (1.0 - total))
    };
    SpanParams { transmissivity, thermal_photons }
}

pub fn amplifier_map(kind: Amplifier, gain: f64) -> Result<GaussianCPMap> {
    if !(gain >= 1.0) || !gain.is_finite() {
        return domain(format!("amplifier gain {gain} < 1"));
    }
    let id = DMatrix::<f64>::identity(2, 2);
    Ok(match kind {
        Amplifier::None => GaussianCPMap::identity(1),
        Amplifier::PhaseInsensitive => GaussianCPMap::from_parts(&id * gain.sqrt(), &id * (gain - 1.0)),
        Amplifier::PhaseSensitive => {
            let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![gain.sqrt(), 1.0 / gain.sqrt()]));
            GaussianCPMap::from_parts(s, DMatrix::zeros(2, 2))
        }
    })
}

/// Thermal-loss channel: `X = sqrt(T) 1`, `Y = (1 - T)(1 + 2 n) 1`.
pub fn thermal_loss_map(transmissivity: f64, thermal_photons: f64) -> Result<GaussianCPMap> {
    if !(transmissivity > 0.0 && transmissivity <= 1.0) {
        return domain(format!("transmissivity {transmissivity} outside (0, 1]"));
    }
    if !(thermal_photons >= 0.0) || !thermal_photons.is_finite() {
        return domain(format!("thermal photon number {thermal_photons} < 0"));
    }
    let id = DMatrix::<f64>::identity(2, 2);
    Ok(GaussianCPMap::from_parts(
        &id * transmissivity.sqrt(),
        &id * ((1.0 - transmissivity) * (1.0 + 2.0 * thermal_photons)),
    ))
}

/// Map of one span (loss, then amplification) on a single mode.
pub fn span_map(config: &LinkConfig) -> Result<GaussianCPMap> {
    let sp = span_params(config);
    thermal_loss_map(sp.transmissivity, sp.thermal_photons)?.then(&amplifier_map(config.amplifier, config.gain)?)
}

/// Sends mode `on_mode` of `input` through spans `spans` (1-based, inclusive).
/// An empty range returns the input unchanged.
pub fn propagate_link(
    input: &CovarianceMatrix,
    config: &LinkConfig,
    on_mode: usize,
    spans: RangeInclusive<usize>,
) -> Result<CovarianceMatrix> {
    config.validate()?;
    let n = input.n_modes();
    if on_mode >= n {
        return Err(Error::ModeIndex { index: on_mode, modes: n });
    }
    if spans.is_empty() {
        return Ok(input.clone());
    }
    if *spans.start() < 1 || *spans.end() > config.spans {
        return domain(format!("span range {}..={} outside 1..={}", spans.start(), spans.end(), config.spans));
    }
    let step = embed_on_modes(&span_map(config)?, &[on_mode], n)?;
    let mut sigma = input.clone();
    for _ in spans {
        sigma = apply_cp(&sigma, &step)?;
    }
    Ok(sigma)
}

/// Transmissivity and added noise (referred to the input) per quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannel {
    pub t_q: f64,
    pub t_p: f64,
    pub n_q: f64,
    pub n_p: f64,
}

impl EffectiveChannel {
    pub const IDENTITY: EffectiveChannel = EffectiveChannel { t_q: 1.0, t_p: 1.0, n_q: 0.0, n_p: 0.0 };

    /// Output variance of the chosen quadrature for an input of variance `v`.
    pub fn output_variance_q(&self, v: f64) -> f64 {
        self.t_q * (v + self.n_q)
    }

    pub fn output_variance_p(&self, v: f64) -> f64 {
        self.t_p * (v + self.n_p)
    }
}

/// `sum_{i<j} x^i / x^(j-1)`, the accumulated input-referred noise weight of
/// `j` identical spans with round-trip factor `x = G T`. Equals
/// `(1 - x^j) / ((1 - x) x^(j-1))`, including the `x = 1` limit `j`.
fn span_noise_weight(x: f64, spans: usize) -> f64 {
    let inv = 1.0 / x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..spans {
        sum += term;
        term *= inv;
    }
    sum
}

/// Effective channel of the whole link.
pub fn effective_channel(config: &LinkConfig) -> EffectiveChannel {
    effective_channel_after(config, config.spans)
}

/// Effective channel of the first `spans` spans of the link.
pub fn effective_channel_after(config: &LinkConfig, spans: usize) -> EffectiveChannel {
    if spans == 0 {
        return EffectiveChannel::IDENTITY;
    }
    let sp = span_params(config);
    let t = sp.transmissivity;
    let g = config.gain;
    let thermal = (1.0 - t) * (1.0 + 2.0 * sp.thermal_photons) / t;
    let j = spans as i32;
    match config.amplifier {
        Amplifier::None => {
            let n = span_noise_weight(t, spans) * thermal;
            EffectiveChannel { t_q: t.powi(j), t_p: t.powi(j), n_q: n, n_p: n }
        }
        Amplifier::PhaseInsensitive => {
            let gt = g * t;
            let amp_noise = (g - 1.0) / gt;
            let n = span_noise_weight(gt, spans) * (thermal + amp_noise);
            EffectiveChannel { t_q: gt.powi(j), t_p: gt.powi(j), n_q: n, n_p: n }
        }
        Amplifier::PhaseSensitive => {
            let (up, down) = (g * t, t / g);
            EffectiveChannel {
                t_q: up.powi(j),
                t_p: down.powi(j),
                n_q: span_noise_weight(up, spans) * thermal,
                n_p: span_noise_weight(down, spans) * thermal,
            }
        }
    }
}

/// Alice-Bob covariance matrix after a TMSV of variance `v` has crossed
/// the whole link, from the effective channel parameters.
pub fn shared_cm(config: &LinkConfig, v: f64) -> Result<CovarianceMatrix> {
    shared_cm_after(config, v, config.spans)
}

/// Alice-Bob covariance matrix after the first `spans` spans.
pub fn shared_cm_after(config: &LinkConfig, v: f64, spans: usize) -> Result<CovarianceMatrix> {
    if !(v >= 1.0) {
        return domain(format!("sub-vacuum modulation V = {v}"));
    }
    let ch = effective_channel_after(config, spans);
    let z = (v * v - 1.0).sqrt();
    let (zq, zp) = (ch.t_q.sqrt() * z, ch.t_p.sqrt() * z);
    let data = DMatrix::from_row_slice(
        4,
        4,
        &[
            v,
            0.0,
            zq,
            0.0, //
            0.0,
            v,
            0.0,
            -zp, //
            zq,
            0.0,
            ch.output_variance_q(v),
            0.0, //
            0.0,
            -zp,
            0.0,
            ch.output_variance_p(v),
        ],
    );
    CovarianceMatrix::new(data)
}

/// `(1 - x) / x * ln(t_n) / ln(x)`, continuous at `x = 1`.
fn log_ratio_noise(x: f64, total_transmissivity: f64) -> f64 {
    let y = x.ln();
    // (1 - x) / ln x = -expm1(y) / y -> -1 as y -> 0
    let ratio = if y.abs() < 1e-300 { -1.0 } else { -y.exp_m1() / y };
    ratio / x * total_transmissivity.ln()
}

/// Continuous-amplification limit (`M -> infinity` at fixed `T^M = t_n` and
/// overall gain `G^M = g_inf`) of the phase-sensitive link.
pub fn continuous_limit_channel(
    total_transmissivity: f64,
    thermal_photons: f64,
    g_inf: f64,
) -> Result<EffectiveChannel> {
    if !(total_transmissivity > 0.0 && total_transmissivity < 1.0) {
        return domain(format!("total transmissivity {total_transmissivity} outside (0, 1)"));
    }
    if !(g_inf >= 1.0) || !g_inf.is_finite() {
        return domain(format!("overall gain {g_inf} < 1"));
    }
    if !(thermal_photons >= 0.0) {
        return domain(format!("thermal photon number {thermal_photons} < 0"));
    }
    let weight = 1.0 + 2.0 * thermal_photons;
    let (up, down) = (g_inf * total_transmissivity, total_transmissivity / g_inf);
    Ok(EffectiveChannel {
        t_q: up,
        t_p: down,
        n_q: log_ratio_noise(up, total_transmissivity) * weight,
        n_p: log_ratio_noise(down, total_transmissivity) * weight,
    })
}

/// Continuous limit for the fiber described by `config` (spans and gain ignored).
pub fn continuous_limit_for(config: &LinkConfig, g_inf: f64) -> Result<EffectiveChannel> {
    let sp = span_params(config);
    continuous_limit_channel(config.total_transmissivity(), sp.thermal_photons, g_inf)
}

/// Closed-form gain bound from the input-power condition on the first span:
/// `V / (1 + T (V + eps - 1))` for phase-sensitive links and
/// `(1 + V) / (2 + T (V + eps - 1))` for phase-insensitive ones.
/// An unamplified link has bound 1. The value may drop below 1 for weak
/// modulation; callers that treat `G = 1` as always admissible should use
/// [`admissible_gain_max`].
pub fn gain_constraint_max(v: f64, transmissivity: f64, excess_noise: f64, amplifier: Amplifier) -> f64 {
    let spread = transmissivity * (v + excess_noise - 1.0);
    match amplifier {
        Amplifier::None => 1.0,
        Amplifier::PhaseSensitive => v / (1.0 + spread),
        Amplifier::PhaseInsensitive => (1.0 + v) / (2.0 + spread),
    }
}

/// `max(1, G_max)`: the unamplified configuration is always allowed.
pub fn admissible_gain_max(config: &LinkConfig, v: f64) -> f64 {
    let t = span_params(config).transmissivity;
    gain_constraint_max(v, t, config.excess_noise, config.amplifier).max(1.0)
}

/// Checks `T^(j) [V + N^(j)] <= V` on the amplified quadrature after every
/// span `j = 1..M`.
pub fn check_power_constraint(config: &LinkConfig, v: f64) -> bool {
    (1..=config.spans).all(|j| {
        let ch = effective_channel_after(config, j);
        ch.output_variance_q(v) <= v * (1.0 + 1e-12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::tmsv_cm;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn span_parameters() {
        let sp = LinkConfig::new(0.0, 3, 0.05).span_params();
        assert_eq!(sp.transmissivity, 1.0);
        assert_eq!(sp.thermal_photons, 0.0);

        let sp = LinkConfig::new(50.0, 1, 0.05).span_params();
        assert_relative_eq!(sp.transmissivity, 0.1, max_relative = 1e-14);

        let sp = LinkConfig::new(50.0, 5, 0.05).span_params();
        assert_relative_eq!(sp.transmissivity, 0.630_957_344_480_193, max_relative = 1e-12);
        assert_relative_eq!(sp.thermal_photons, 0.1 * 0.05 / 1.8, max_relative = 1e-12);

        assert_eq!(LinkConfig::new(50.0, 5, 0.0).span_params().thermal_photons, 0.0);
    }

    #[test]
    fn amplifier_maps() {
        assert_eq!(amplifier_map(Amplifier::PhaseInsensitive, 1.0).unwrap(), GaussianCPMap::identity(1));
        let vac = CovarianceMatrix::vacuum(1);
        let out = apply_cp(&vac, &amplifier_map(Amplifier::PhaseSensitive, 4.0).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(0, 0), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.get(1, 1), 0.25, epsilon = 1e-14);
        let out = apply_cp(&vac, &amplifier_map(Amplifier::PhaseInsensitive, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(0, 0), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.get(1, 1), 3.0, epsilon = 1e-14);
        assert!(amplifier_map(Amplifier::PhaseSensitive, 0.9).is_err());
    }

    #[test]
    fn amplifier_maps_are_completely_positive() {
        for g in [1.0, 1.3, 4.0] {
            for kind in [Amplifier::PhaseInsensitive, Amplifier::PhaseSensitive] {
                let m = amplifier_map(kind, g).unwrap();
                assert!(GaussianCPMap::new(m.x().clone(), m.y().clone()).is_ok());
            }
        }
    }

    #[test]
    fn thermal_loss_values() {
        assert_eq!(thermal_loss_map(1.0, 0.3).unwrap(), GaussianCPMap::identity(1));
        let out = apply_cp(&crate::gaussian::thermal_cm(1.0).unwrap(), &thermal_loss_map(0.5, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(0, 0), 2.0, epsilon = 1e-14);
        let out = apply_cp(&CovarianceMatrix::vacuum(1), &thermal_loss_map(0.63096, 2.7778e-3).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(0, 0), 0.63096 + 0.36904 * (1.0 + 2.0 * 2.7778e-3), epsilon = 1e-14);
        assert_abs_diff_eq!(out.get(0, 0), 1.00205, epsilon = 1e-5);
        assert!(thermal_loss_map(0.0, 0.0).is_err());
        assert!(thermal_loss_map(0.5, -1.0).is_err());
    }

    #[test]
    fn lossless_unit_gain_link_is_identity() {
        let cfg = LinkConfig::new(0.0, 4, 0.0).with_amplifier(Amplifier::PhaseInsensitive, 1.0);
        let input = tmsv_cm(3.0).unwrap();
        let out = propagate_link(&input, &cfg, 1, 1..=4).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    #[allow(clippy::reversed_empty_ranges)]
    fn propagation_rejects_bad_ranges() {
        let cfg = LinkConfig::new(10.0, 3, 0.01);
        let input = tmsv_cm(3.0).unwrap();
        assert!(propagate_link(&input, &cfg, 1, 1..=4).is_err());
        assert!(propagate_link(&input, &cfg, 2, 1..=3).is_err());
        assert_eq!(propagate_link(&input, &cfg, 1, 3..=2).unwrap(), input);
    }

    #[test]
    fn unamplified_noise_identity() {
        let cfg = LinkConfig::new(0.0, 2, 0.05);
        // choose L so that T = 0.5 per span
        let l = 10.0 * 2.0 * 2f64.log10() / 0.2;
        let ch = effective_channel(&cfg.with_length(l));
        assert_relative_eq!(ch.t_q, 0.25, max_relative = 1e-12);
        assert_relative_eq!(ch.n_q, 3.05, max_relative = 1e-12);
        let psa = effective_channel(&cfg.with_length(l).with_amplifier(Amplifier::PhaseSensitive, 1.0));
        assert_relative_eq!(psa.n_p, 3.05, max_relative = 1e-12);
        assert_relative_eq!(psa.t_p, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn compensating_gain_limit() {
        let cfg = LinkConfig::new(30.0, 3, 0.05);
        let sp = cfg.span_params();
        let g = 1.0 / sp.transmissivity;
        let ch = effective_channel(&cfg.with_amplifier(Amplifier::PhaseInsensitive, g));
        let n = (1.0 - sp.transmissivity) * (1.0 + 2.0 * sp.thermal_photons) / sp.transmissivity;
        let ng = (g - 1.0) / (g * sp.transmissivity);
        assert_relative_eq!(ch.t_q, 1.0, max_relative = 1e-12);
        assert_relative_eq!(ch.n_q, 3.0 * (n + ng), max_relative = 1e-12);
    }

    #[test]
    fn shared_cm_matches_tmsv_on_lossless_link() {
        let cfg = LinkConfig::new(0.0, 3, 0.05);
        let cm = shared_cm(&cfg, 4.0).unwrap();
        for (a, b) in cm.matrix().iter().zip(tmsv_cm(4.0).unwrap().matrix().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn psa_shared_cm_orders_quadratures() {
        let cfg = LinkConfig::new(40.0, 4, 0.05).with_amplifier(Amplifier::PhaseSensitive, 1.1);
        let cm = shared_cm(&cfg, 5.0).unwrap();
        assert!(cm.get(2, 2) >= cm.get(3, 3));
        assert!(cm.get(0, 2) >= -cm.get(1, 3));
    }

    #[test]
    fn gain_bounds() {
        assert_relative_eq!(
            gain_constraint_max(10.0, 0.9, 0.0, Amplifier::PhaseSensitive),
            10.0 / 9.1,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            gain_constraint_max(10.0, 0.9, 0.0, Amplifier::PhaseInsensitive),
            11.0 / 10.1,
            max_relative = 1e-14
        );
        assert_eq!(gain_constraint_max(7.0, 1.0, 0.0, Amplifier::PhaseSensitive), 1.0);
        assert_eq!(gain_constraint_max(7.0, 0.5, 0.1, Amplifier::None), 1.0);
    }

    #[test]
    fn continuous_limit_at_unit_gain() {
        let ch = continuous_limit_channel(0.1, 0.01, 1.0).unwrap();
        assert_eq!(ch.t_q, 0.1);
        assert_relative_eq!(ch.n_q, 9.0 * 1.02, max_relative = 1e-12);
        assert_relative_eq!(ch.n_p, ch.n_q, max_relative = 1e-12);
        assert!(continuous_limit_channel(1.0, 0.0, 1.0).is_err());
        assert!(continuous_limit_channel(0.5, 0.0, 0.5).is_err());
    }

    #[test]
    fn continuous_limit_removable_singularity() {
        // G_inf T_n = 1: (1 - x) / (x ln x) -> -1, so N_1 -> -ln(T_n) (1 + 2 n)
        let t_n: f64 = 0.2;
        let n_bar = 0.05;
        let ch = continuous_limit_channel(t_n, n_bar, 1.0 / t_n).unwrap();
        assert_relative_eq!(ch.t_q, 1.0, max_relative = 1e-14);
        assert_relative_eq!(ch.n_q, -t_n.ln() * (1.0 + 2.0 * n_bar), max_relative = 1e-12);
        // approach from both sides
        for delta in [1e-7, -1e-7] {
            let near = continuous_limit_channel(t_n, n_bar, (1.0 + delta) / t_n).unwrap();
            assert_relative_eq!(near.n_q, ch.n_q, max_relative = 1e-6);
        }
    }

    #[test]
    fn validation() {
        assert!(LinkConfig::new(-1.0, 1, 0.0).validate().is_err());
        assert!(LinkConfig::new(1.0, 0, 0.0).validate().is_err());
        assert!(LinkConfig::new(1.0, 1, -0.1).validate().is_err());
        let mut cfg = LinkConfig::new(1.0, 1, 0.0);
        cfg.gain = 1.5;
        assert!(cfg.validate().is_err());
        assert!(cfg.with_amplifier(Amplifier::PhaseSensitive, 0.5).validate().is_err());
        assert!(LinkConfig::new(1.0, 2, 0.0).with_amplifier(Amplifier::None, 3.0).validate().is_ok());
    }
}
