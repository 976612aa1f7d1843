use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gaussian::{MeasurementKind, Quadrature};
use crate::link::{Amplifier, LinkConfig};

/// Amplifier/measurement combination under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolCase {
    /// Case I: phase-insensitive amplifiers, Bob homodynes `q` (or `p`, same statistics).
    PhaseInsensitive,
    /// Case IIa: phase-sensitive amplifiers, Bob homodynes the amplified quadrature `q`.
    AmplifiedQuadrature,
    /// Case IIb: phase-sensitive amplifiers, Bob homodynes the squeezed quadrature `p`.
    DeamplifiedQuadrature,
    /// Benchmark without amplifiers.
    NoAmplifier,
}

impl ProtocolCase {
    pub const ALL: [ProtocolCase; 4] = [
        ProtocolCase::PhaseInsensitive,
        ProtocolCase::AmplifiedQuadrature,
        ProtocolCase::DeamplifiedQuadrature,
        ProtocolCase::NoAmplifier,
    ];

    pub fn amplifier(self) -> Amplifier {
        match self {
            ProtocolCase::PhaseInsensitive => Amplifier::PhaseInsensitive,
            ProtocolCase::AmplifiedQuadrature | ProtocolCase::DeamplifiedQuadrature => Amplifier::PhaseSensitive,
            ProtocolCase::NoAmplifier => Amplifier::None,
        }
    }

    pub fn quadrature(self) -> Quadrature {
        match self {
            ProtocolCase::DeamplifiedQuadrature => Quadrature::P,
            _ => Quadrature::Q,
        }
    }

    pub fn bob_measurement(self) -> MeasurementKind {
        MeasurementKind::homodyne(self.quadrature())
    }

    /// Short label used in tables: `I`, `IIa`, `IIb`, `n`.
    pub fn label(self) -> &'static str {
        match self {
            ProtocolCase::PhaseInsensitive => "I",
            ProtocolCase::AmplifiedQuadrature => "IIa",
            ProtocolCase::DeamplifiedQuadrature => "IIb",
            ProtocolCase::NoAmplifier => "n",
        }
    }

    /// The fiber of `base` equipped with this case's amplifiers at `gain`.
    pub fn configure(self, base: &LinkConfig, gain: f64) -> LinkConfig {
        base.with_amplifier(self.amplifier(), gain)
    }

    pub(crate) fn check_link(self, link: &LinkConfig) -> Result<()> {
        let compatible = link.amplifier == self.amplifier() || (self == ProtocolCase::NoAmplifier && link.gain == 1.0);
        if compatible {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "case {} does not match a link with {:?} amplifiers",
                self.label(),
                link.amplifier
            )))
        }
    }
}

impl fmt::Display for ProtocolCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProtocolCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "pia" => Ok(ProtocolCase::PhaseInsensitive),
            "iia" | "psa-q" => Ok(ProtocolCase::AmplifiedQuadrature),
            "iib" | "psa-p" => Ok(ProtocolCase::DeamplifiedQuadrature),
            "n" | "none" | "no-amplifier" => Ok(ProtocolCase::NoAmplifier),
            other => Err(Error::Config(format!("unknown protocol case '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams {
    /// Reconciliation efficiency, in `(0, 1]`.
    pub beta: f64,
    pub case: ProtocolCase,
}

impl SecurityParams {
    pub fn new(beta: f64, case: ProtocolCase) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Config(format!("reconciliation efficiency {beta} outside (0, 1]")));
        }
        Ok(Self { beta, case })
    }

    pub fn with_case(self, case: ProtocolCase) -> Self {
        Self { case, ..self }
    }
}

/// Key rate in bits per channel use with the point it was evaluated at.
/// Negative rates are kept as they are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub kgr: f64,
    pub v_opt: f64,
    pub g_opt: f64,
    pub g_max: f64,
    pub i_ab: f64,
    pub chi_be: f64,
    pub constraint_active: bool,
}
