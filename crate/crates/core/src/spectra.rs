//! Environment-side formulas: the cutoff factor `f(E) = E^2 Delta(E)`, the
//! effective cutoff scale, the Ohmic kernel and its mass counterterm, and the
//! long-range correlator of `q` with an Ohmic propagator.

use std::f64::consts::PI;

use thiserror::Error;

use crate::model::{DissipationSpec, Regime};
use crate::quadrature::GaussLegendre;

/// Relative size of `E^2 + sigma eta E^s` (against `E^2`) treated as a pole.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("energy must be finite and > 0, got {0}")]
    BadEnergy(f64),
    #[error("propagator pole at E = {0}")]
    PoleAt(f64),
    #[error("effective cutoff undefined without dissipation")]
    Undefined,
    #[error("kernel is singular at zero time separation")]
    ZeroSeparation,
    #[error("bath cutoff must be > 0, got {0}")]
    BadBathCutoff(f64),
    #[error("correlator needs tau > 0, eta >= 0 and m_eff^2 > 0")]
    BadCorrelatorArgs,
    #[error("correlator quadrature did not converge: value {value:e}, error estimate {error:e}")]
    NoConvergence { value: f64, error: f64 },
}

/// An environment together with its effective cutoff scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub spec: DissipationSpec,
    /// `eta^(-1/(s-2))`; `None` when `eta = 0`.
    pub e_c: Option<f64>,
}

impl CutoffProfile {
    pub fn new(spec: DissipationSpec) -> Self {
        Self {
            spec,
            e_c: effective_cutoff(&spec).ok(),
        }
    }

    pub fn factor(&self, e: f64) -> Result<f64, SpectraError> {
        cutoff_factor(e, &self.spec)
    }

    /// `(E, f(E))` over `points` log-spaced energies; poles give `None`.
    pub fn table(&self, e_min: f64, e_max: f64, points: usize) -> Vec<(f64, Option<f64>)> {
        let span = (e_max / e_min).ln();
        (0..points)
            .map(|k| {
                let frac = if points > 1 {
                    k as f64 / (points - 1) as f64
                } else {
                    0.0
                };
                let e = e_min * (span * frac).exp();
                (e, self.factor(e).ok())
            })
            .collect()
    }
}

/// Energy at which the dissipative term equals the kinetic one.
pub fn effective_cutoff(spec: &DissipationSpec) -> Result<f64, SpectraError> {
    if spec.eta() == 0.0 {
        return Err(SpectraError::Undefined);
    }
    Ok(spec.eta().powf(-1.0 / (spec.s() - 2) as f64))
}

/// Ratio of the dissipative propagator to the free one, `E^2 / (E^2 + sigma eta E^s)`.
///
/// Evaluated as `1 / (1 + sigma (E/E_c)^(s-2))`, which equals 1/2 at `E = E_c`
/// to the last bit.
pub fn cutoff_factor(e: f64, spec: &DissipationSpec) -> Result<f64, SpectraError> {
    if !(e.is_finite() && e > 0.0) {
        return Err(SpectraError::BadEnergy(e));
    }
    let Ok(e_c) = effective_cutoff(spec) else {
        return Ok(1.0);
    };
    let ratio = f64::from(spec.sigma()) * (e / e_c).powi((spec.s() - 2) as i32);
    let denom = 1.0 + ratio;
    if denom.abs() < POLE_TOL {
        return Err(SpectraError::PoleAt(e));
    }
    Ok(1.0 / denom)
}

/// True when `f` blows up at `E_c`, i.e. the theory only exists below it.
pub fn has_pole(spec: &DissipationSpec) -> bool {
    spec.regime() == Regime::Singular
}

/// Nonlocal Ohmic coupling `alpha(tau) = eta / (2 pi tau^2)`.
pub fn ohmic_kernel(dtau: f64, eta: f64) -> Result<f64, SpectraError> {
    if dtau == 0.0 {
        return Err(SpectraError::ZeroSeparation);
    }
    Ok(eta / (2.0 * PI * dtau * dtau))
}

/// Coefficient `eta omega_c / pi` of the local `q^2` counterterm.
pub fn mass_counterterm(eta: f64, omega_c: f64) -> Result<f64, SpectraError> {
    if !(omega_c > 0.0) {
        return Err(SpectraError::BadBathCutoff(omega_c));
    }
    Ok(eta * omega_c / PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlator {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Number of half-period panels fed to the Euler averaging of the tail.
const TAIL_PANELS: usize = 40;
const GAUSS_POINTS: usize = 16;

/// `int dE/(2 pi) e^{i E tau} / (E^2 + eta |E| + m^2)`.
///
/// Written as `(1/pi) int_0^inf cos(E tau) g(E) dE` and summed over the
/// half periods of the cosine. The first panel ends at `E = pi/(2 tau)`;
/// panels are integrated by Gauss-Legendre until the amplitude of `g` is
/// smooth on the panel scale, and the remaining alternating series is
/// accelerated by repeated averaging of its partial sums.
pub fn long_range_correlator(tau: f64, eta: f64, m_eff_sq: f64) -> Result<Correlator, SpectraError> {
    if !(tau > 0.0 && eta >= 0.0 && m_eff_sq > 0.0 && tau.is_finite() && eta.is_finite()) {
        return Err(SpectraError::BadCorrelatorArgs);
    }
    let g = |e: f64| 1.0 / (e * e + eta * e + m_eff_sq);
    let rule = GaussLegendre::new(GAUSS_POINTS);
    let period = PI / tau;
    let panel = |k: usize| {
        let a = if k == 0 { 0.0 } else { (k as f64 - 0.5) * period };
        let b = (k as f64 + 0.5) * period;
        rule.integrate(a, b, |e| (e * tau).cos() * g(e))
    };

    let scale = m_eff_sq.sqrt().max(eta).max(period);
    let e_cut = 40.0 * scale;
    let head = (e_cut / period).ceil() as usize;

    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in 0..head {
        // Kahan summation: the head can be long and nearly cancelling.
        let y = panel(k) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }

    let mut partial = Vec::with_capacity(TAIL_PANELS + 1);
    let mut tail = 0.0;
    partial.push(tail);
    for k in head..head + TAIL_PANELS {
        tail += panel(k);
        partial.push(tail);
    }
    // Repeated averaging (Euler transform) of the alternating partial sums.
    let mut level = partial;
    while level.len() > 2 {
        level = level.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let tail_value = 0.5 * (level[0] + level[1]);
    let tail_err = 0.5 * (level[0] - level[1]).abs();

    let value = (sum + tail_value) / PI;
    let error_estimate = tail_err / PI + 1e-16 * head as f64 * (sum.abs() / PI).max(1e-300);
    let panels = head + TAIL_PANELS;
    if !(error_estimate <= 1e-9 * value.abs() + 1e-14) {
        return Err(SpectraError::NoConvergence {
            value,
            error: error_estimate,
        });
    }
    Ok(Correlator {
        value,
        error_estimate,
        panels,
    })
}
