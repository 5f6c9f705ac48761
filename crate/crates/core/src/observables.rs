//! Physical quantities read off the infrared effective potential.

use serde::Serialize;
use thiserror::Error;

use crate::grid::PotentialGrid;
use crate::model::DissipationSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservablesError {
    /// Two mirror-image global minima: the localized phase. A report, not a failure.
    #[error("degenerate minima at q = {left} and q = {right}")]
    DegenerateMinimum { left: f64, right: f64 },
    #[error("susceptibility needs m_eff^2 > 0, got {0}")]
    NotInSymmetricPhase(f64),
    #[error("minimum at the edge of the grid (node {0})")]
    MinimumAtBoundary(usize),
}

/// Where the global minimum of the potential sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Minimum {
    /// A single minimum (at the origin for an even potential).
    Unique(f64),
    /// A mirror pair `+-q`, `q > 0`.
    Pair(f64),
}

impl Minimum {
    /// The minimizer, or the positive member of the pair.
    pub fn position(&self) -> f64 {
        match *self {
            Minimum::Unique(q) | Minimum::Pair(q) => q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    /// `<q>`; the positive member of the pair in the localized phase.
    pub q_mean: f64,
    pub degenerate: bool,
    pub e0: f64,
    pub m_eff_sq: f64,
    pub chi: Option<f64>,
    /// The gap equals `sqrt(m_eff_sq)` only without dissipation.
    pub gap_valid: bool,
}

impl Observables {
    pub fn m_eff(&self) -> Option<f64> {
        (self.m_eff_sq > 0.0).then(|| self.m_eff_sq.sqrt())
    }

    pub fn gap(&self) -> Option<f64> {
        if self.gap_valid {
            self.m_eff()
        } else {
            None
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Offset, in units of `h`, of the vertex of the parabola through three nodes.
fn vertex_offset(vm: f64, v0: f64, vp: f64) -> f64 {
    let curv = vm - 2.0 * v0 + vp;
    if curv > 0.0 {
        (0.5 * (vm - vp) / curv).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Global minimum node refined by a three-point parabola.
///
/// For a mirror pair of global minima the positive member is located and
/// reported through [`Minimum::Pair`].
pub fn locate_minimum(grid: &PotentialGrid) -> Result<Minimum, ObservablesError> {
    let v = grid.values();
    let n = v.len();
    let c = grid.center();
    let mut i = argmin(v);
    let mirror = n - 1 - i;
    let pair = i != c && v[mirror] <= v[i];
    if pair {
        i = i.max(mirror);
    }
    if i == 0 || i == n - 1 {
        return Err(ObservablesError::MinimumAtBoundary(i));
    }
    let q = grid.q(i) + grid.spacing() * vertex_offset(v[i - 1], v[i], v[i + 1]);
    Ok(if pair {
        Minimum::Pair(q)
    } else {
        Minimum::Unique(q)
    })
}

/// `<q>`: the minimizer, or `DegenerateMinimum` with the `+-` pair.
pub fn find_minimum(grid: &PotentialGrid) -> Result<f64, ObservablesError> {
    match locate_minimum(grid)? {
        Minimum::Unique(q) => Ok(q),
        Minimum::Pair(q) => Err(ObservablesError::DegenerateMinimum { left: -q, right: q }),
    }
}

/// Index of the node nearest `q`, kept two nodes away from either edge.
fn anchor(grid: &PotentialGrid, q: f64) -> usize {
    let i = (q / grid.spacing()).round() as isize + grid.center() as isize;
    i.clamp(2, grid.len() as isize - 3) as usize
}

/// `V_eff(q_mean)` from the parabola through the three nodes around it.
pub fn ground_state_energy(grid: &PotentialGrid, q_mean: f64) -> f64 {
    let v = grid.values();
    let i = anchor(grid, q_mean);
    let u = (q_mean - grid.q(i)) / grid.spacing();
    let (vm, v0, vp) = (v[i - 1], v[i], v[i + 1]);
    v0 + 0.5 * (vp - vm) * u + 0.5 * (vm - 2.0 * v0 + vp) * u * u
}

/// Curvature at `q_mean` from the quartic through the five nearest nodes.
///
/// Exact for polynomials up to degree four, so its error is `O(h^4)`.
pub fn effective_mass(grid: &PotentialGrid, q_mean: f64) -> f64 {
    let v = grid.values();
    let h = grid.spacing();
    let i = anchor(grid, q_mean);
    let u = (q_mean - grid.q(i)) / h;
    let (f_2, f_1, f0, f1, f2) = (v[i - 2], v[i - 1], v[i], v[i + 1], v[i + 2]);
    // Sums are paired symmetrically so that mirrored data gives identical results.
    let c2 = (16.0 * (f_1 + f1) - (f_2 + f2) - 30.0 * f0) / 24.0;
    let c3 = ((f2 - f_2) - 2.0 * (f1 - f_1)) / 12.0;
    let c4 = ((f_2 + f2) - 4.0 * (f_1 + f1) + 6.0 * f0) / 24.0;
    (2.0 * c2 + 6.0 * c3 * u + 12.0 * c4 * u * u) / (h * h)
}

/// Seven-point, sixth-order curvature at a node; an independent cross-check
/// of [`effective_mass`].
pub fn refined_curvature(grid: &PotentialGrid, i: usize) -> f64 {
    let v = grid.values();
    let h = grid.spacing();
    let i = i.clamp(3, grid.len() - 4);
    let s1 = v[i - 1] + v[i + 1];
    let s2 = v[i - 2] + v[i + 2];
    let s3 = v[i - 3] + v[i + 3];
    (2.0 * s3 - 27.0 * s2 + 270.0 * s1 - 490.0 * v[i]) / (180.0 * h * h)
}

pub fn susceptibility(m_eff_sq: f64) -> Result<f64, ObservablesError> {
    if !(m_eff_sq > 0.0) {
        return Err(ObservablesError::NotInSymmetricPhase(m_eff_sq));
    }
    Ok(1.0 / m_eff_sq)
}

/// All observables of a finished flow.
pub fn observe(grid: &PotentialGrid, spec: &DissipationSpec) -> Result<Observables, ObservablesError> {
    let min = locate_minimum(grid)?;
    let q_mean = min.position();
    let m_eff_sq = effective_mass(grid, q_mean);
    let degenerate = matches!(min, Minimum::Pair(_));
    Ok(Observables {
        q_mean,
        degenerate,
        e0: ground_state_energy(grid, q_mean),
        m_eff_sq,
        chi: if degenerate {
            None
        } else {
            susceptibility(m_eff_sq).ok()
        },
        gap_valid: spec.eta() == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_flow, FlowConfig};
    use crate::model::ModelParams;
    use proptest::prelude::*;

    fn harmonic(omega: f64, n: usize) -> PotentialGrid {
        PotentialGrid::from_fn(4.0, n, |q| 0.5 * omega * omega * q * q).unwrap()
    }

    #[test]
    fn synthetic_minima() {
        assert_eq!(find_minimum(&harmonic(1.0, 401)).unwrap(), 0.0);
        let p = ModelParams::new(1.0).unwrap();
        let bare = PotentialGrid::init_from_bare(&p, 4.0, 401).unwrap();
        match find_minimum(&bare) {
            Err(ObservablesError::DegenerateMinimum { left, right }) => {
                assert!((right - 0.5).abs() < 1e-3);
                assert_eq!(left, -right);
            }
            other => panic!("{other:?}"),
        }
        // Off-node minimum of a shifted parabola is recovered exactly.
        let g = PotentialGrid::from_fn(4.0, 401, |q| {
            let a = q.abs() - 1.2345;
            a * a - 2.0
        })
        .unwrap();
        let m = locate_minimum(&g).unwrap();
        assert!(matches!(m, Minimum::Pair(_)));
        assert!((m.position() - 1.2345).abs() < 1e-12);
        assert!((ground_state_energy(&g, m.position()) + 2.0).abs() < 1e-12);
        assert!((effective_mass(&g, m.position()) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn susceptibility_examples() {
        assert_eq!(susceptibility(1.0).unwrap(), 1.0);
        assert_eq!(susceptibility(4.0).unwrap(), 0.25);
        assert!(matches!(
            susceptibility(-0.1),
            Err(ObservablesError::NotInSymmetricPhase(_))
        ));
        assert!(susceptibility(0.0).is_err());
    }

    #[test]
    fn harmonic_flow_observables() {
        for (omega, tol) in [(1.0, 1e-3), (2.0, 2e-3)] {
            let g = harmonic(omega, 401);
            let r = integrate_flow(&g, &DissipationSpec::none(), &FlowConfig::with_uv(1e3)).unwrap();
            let o = observe(&r.final_grid, &DissipationSpec::none()).unwrap();
            assert_eq!(o.q_mean, 0.0);
            assert!((o.e0 - 0.5 * omega).abs() < tol, "E0 = {}", o.e0);
            assert!((o.m_eff_sq / (omega * omega) - 1.0).abs() < 1e-8);
            assert!((o.chi.unwrap() - 1.0 / (omega * omega)).abs() < 1e-8);
            assert!(o.gap_valid);
            assert!((o.gap().unwrap() - omega).abs() < 1e-8);
        }
        let flat = PotentialGrid::from_fn(4.0, 41, |_| 0.0).unwrap();
        let r = integrate_flow(&flat, &DissipationSpec::none(), &FlowConfig::with_uv(1e3)).unwrap();
        assert_eq!(ground_state_energy(&r.final_grid, 0.0), 0.0);
    }

    #[test]
    fn double_well_observables_and_robustness() {
        let p = ModelParams::new(1.0).unwrap();
        let g = PotentialGrid::init_from_bare(&p, 4.0, 401).unwrap();
        let none = DissipationSpec::none();
        let r = integrate_flow(&g, &none, &FlowConfig::with_uv(1e3)).unwrap();
        let o = observe(&r.final_grid, &none).unwrap();
        assert_eq!(o.q_mean, 0.0);
        assert!(!o.degenerate);
        let chi_ref = 1.0 / refined_curvature(&r.final_grid, r.final_grid.center());
        assert!((o.chi.unwrap() / chi_ref - 1.0).abs() < 1e-3);

        let damped = DissipationSpec::new(1, 2.0).unwrap();
        let r = integrate_flow(&g, &damped, &FlowConfig::with_uv(1e3)).unwrap();
        let o = observe(&r.final_grid, &damped).unwrap();
        assert!(!o.gap_valid);
        assert!(o.gap().is_none());
    }

    #[test]
    fn constant_shift_moves_only_the_energy() {
        let p = ModelParams::new(1.0).unwrap();
        let none = DissipationSpec::none();
        let cfg = FlowConfig::with_uv(1e2);
        let a = PotentialGrid::init_from_bare(&p, 4.0, 201).unwrap();
        let b = PotentialGrid::from_values(4.0, a.values().iter().map(|v| v + 3.0).collect()).unwrap();
        let oa = observe(&integrate_flow(&a, &none, &cfg).unwrap().final_grid, &none).unwrap();
        let ob = observe(&integrate_flow(&b, &none, &cfg).unwrap().final_grid, &none).unwrap();
        assert_eq!(oa.q_mean, ob.q_mean);
        assert!((ob.e0 - oa.e0 - 3.0).abs() < 1e-9);
        assert!((ob.m_eff_sq / oa.m_eff_sq - 1.0).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn quartic_curvature_is_exact(a in 0.1f64..5.0, b in 0.0f64..3.0, c in -2.0f64..2.0) {
            let g = PotentialGrid::from_fn(3.0, 301, |q| c + a * q * q + b * q.powi(4)).unwrap();
            let q = find_minimum(&g).unwrap();
            prop_assert_eq!(q, 0.0);
            prop_assert!((effective_mass(&g, q) - 2.0 * a).abs() < 1e-8 * (1.0 + a + b));
            prop_assert!((ground_state_energy(&g, q) - c).abs() < 1e-12 * (1.0 + c.abs()));
        }

        #[test]
        fn chi_times_mass_is_one(m2 in 1e-6f64..1e3) {
            prop_assert!((susceptibility(m2).unwrap() * m2 - 1.0).abs() < 1e-15);
        }
    }
}
