//! Physical parameters of the dissipative double well.
//!
//! Everything is expressed in working units where `hbar = M = m0 = 1`, so
//! positions carry units of `m0^(-1/2)`, energies of `m0`, the quartic
//! coupling of `m0^3` and the dissipation strength of `m0^(2-s)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("s must be odd and positive, got {0}")]
    EvenOrNonPositiveExponent(i64),
    #[error("lambda0 must be finite and > 0, got {0}")]
    NonPositiveCoupling(f64),
    #[error("eta must be finite and >= 0, got {0}")]
    NegativeDissipation(f64),
}

/// Bare double-well parameters: `V0(q) = -m0sq q^2 / 2 + lambda0 q^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda0: f64,
    /// Fixed to one in working units; kept so unit audits can see it.
    pub m0sq: f64,
}

impl ModelParams {
    pub fn new(lambda0: f64) -> Result<Self, ModelError> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(ModelError::NonPositiveCoupling(lambda0));
        }
        Ok(Self {
            lambda0,
            m0sq: 1.0,
        })
    }

    /// Position of the right-hand well of the bare potential.
    pub fn well_position(&self) -> f64 {
        (self.m0sq / (4.0 * self.lambda0)).sqrt()
    }

    /// Depth of the bare wells, `-m0sq^2 / (16 lambda0)`.
    pub fn well_depth(&self) -> f64 {
        -self.m0sq * self.m0sq / (16.0 * self.lambda0)
    }
}

pub fn bare_potential(q: f64, p: &ModelParams) -> f64 {
    let q2 = q * q;
    -0.5 * p.m0sq * q2 + p.lambda0 * q2 * q2
}

/// Sign `(-1)^((s-1)/2)` carried by the `|E|^s` term of the dissipative action.
pub fn dissipation_sign(s: i64) -> Result<i8, ModelError> {
    if s < 1 || s % 2 == 0 {
        return Err(ModelError::EvenOrNonPositiveExponent(s));
    }
    Ok(if ((s - 1) / 2) % 2 == 0 { 1 } else { -1 })
}

/// How the dissipation term acts on the propagator of `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// Ohmic: suppresses propagation below `E_c = eta`.
    IrCutoff,
    /// `s = 5, 9, ...`: suppresses propagation above `E_c`.
    UvCutoff,
    /// `s = 3, 7, ...`: the propagator has a pole at `E_c`; the theory only exists below it.
    Singular,
    None,
}

/// Environment with spectral density `J(omega) = eta omega^s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationSpec {
    s: i64,
    eta: f64,
    sigma: i8,
    regime: Regime,
}

impl DissipationSpec {
    pub fn new(s: i64, eta: f64) -> Result<Self, ModelError> {
        let sigma = dissipation_sign(s)?;
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(ModelError::NegativeDissipation(eta));
        }
        let regime = regime_of(s, sigma, eta);
        Ok(Self {
            s,
            eta,
            sigma,
            regime,
        })
    }

    /// The dissipationless theory; `s` is irrelevant and set to 1.
    pub fn none() -> Self {
        Self {
            s: 1,
            eta: 0.0,
            sigma: 1,
            regime: Regime::None,
        }
    }

    pub fn s(&self) -> i64 {
        self.s
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sigma(&self) -> i8 {
        self.sigma
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Dissipative addend `sigma eta Lambda^(s-2)` of the flow's log argument.
    pub fn propagator_shift(&self, lambda: f64) -> f64 {
        if self.eta == 0.0 {
            return 0.0;
        }
        f64::from(self.sigma) * self.eta * lambda.powi((self.s - 2) as i32)
    }
}

fn regime_of(s: i64, sigma: i8, eta: f64) -> Regime {
    if eta == 0.0 {
        Regime::None
    } else if sigma < 0 {
        Regime::Singular
    } else if s == 1 {
        Regime::IrCutoff
    } else {
        Regime::UvCutoff
    }
}

pub fn classify_regime(spec: &DissipationSpec) -> Regime {
    regime_of(spec.s, spec.sigma, spec.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bare_potential_values() {
        let p = ModelParams::new(1.0).unwrap();
        assert_eq!(bare_potential(0.0, &p), 0.0);
        assert_eq!(bare_potential(1.0, &p), 0.5);
        let qs = p.well_position();
        assert!((qs - 0.5).abs() < 1e-15);
        assert!((bare_potential(qs, &p) + 0.0625).abs() < 1e-15);
        assert!((p.well_depth() + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn sign_by_parity() {
        assert_eq!(dissipation_sign(1), Ok(1));
        assert_eq!(dissipation_sign(3), Ok(-1));
        assert_eq!(dissipation_sign(5), Ok(1));
        assert_eq!(dissipation_sign(7), Ok(-1));
        assert!(dissipation_sign(2).is_err());
        assert!(dissipation_sign(0).is_err());
        assert!(dissipation_sign(-1).is_err());
    }

    #[test]
    fn regimes() {
        let r = |s, eta| DissipationSpec::new(s, eta).unwrap().regime();
        assert_eq!(r(1, 0.5), Regime::IrCutoff);
        assert_eq!(r(5, 1.0), Regime::UvCutoff);
        assert_eq!(r(9, 1.0), Regime::UvCutoff);
        assert_eq!(r(3, 0.01), Regime::Singular);
        assert_eq!(r(7, 0.01), Regime::Singular);
        assert_eq!(r(1, 0.0), Regime::None);
        assert!(DissipationSpec::new(1, -0.1).is_err());
        assert!(DissipationSpec::new(4, 0.1).is_err());
        assert!(ModelParams::new(0.0).is_err());
    }

    proptest! {
        #[test]
        fn sign_alternates(k in 0i64..1000) {
            let s = 2 * k + 1;
            let a = dissipation_sign(s).unwrap();
            let b = dissipation_sign(s + 2).unwrap();
            prop_assert_eq!(a * b, -1);
        }

        #[test]
        fn potential_is_even(q in -10.0f64..10.0, l in 0.01f64..10.0) {
            let p = ModelParams::new(l).unwrap();
            prop_assert_eq!(bare_potential(q, &p), bare_potential(-q, &p));
        }

        #[test]
        fn no_dissipation_means_no_regime(k in 0i64..50) {
            let spec = DissipationSpec::new(2 * k + 1, 0.0).unwrap();
            prop_assert_eq!(classify_regime(&spec), Regime::None);
        }
    }
}
