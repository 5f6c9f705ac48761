//! Wilsonian potential sampled on a uniform grid symmetric about `q = 0`.

use std::io::{self, Write};

use thiserror::Error;

use crate::model::{bare_potential, ModelParams};
use crate::output::fmt_num;

/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 41;

/// Relative tolerance, against `max |V|`, for the even-parity check.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs an odd number of nodes >= {MIN_NODES}, got {0}")]
    BadNodeCount(usize),
    #[error("q_max must be finite and > 0, got {0}")]
    BadHalfWidth(f64),
    #[error("q_max = {q_max} does not contain the wells with margin (need >= {required})")]
    DomainTooSmall { q_max: f64, required: f64 },
    #[error("non-finite potential value at node {0}")]
    NonFinite(usize),
    #[error("potential is not even: |V[i] - V[n-1-i]| = {drift:e} at node {node}")]
    Asymmetric { node: usize, drift: f64 },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    q_max: f64,
    values: Vec<f64>,
}

impl PotentialGrid {
    /// Samples the bare double well. The domain must reach three well
    /// positions out, `q_max >= 3 / sqrt(4 lambda0)`.
    pub fn init_from_bare(p: &ModelParams, q_max: f64, n: usize) -> Result<Self, GridError> {
        let required = 3.0 * p.well_position();
        if q_max < required {
            return Err(GridError::DomainTooSmall { q_max, required });
        }
        Self::from_fn(q_max, n, |q| bare_potential(q, p))
    }

    pub fn from_fn(q_max: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        check_shape(q_max, n)?;
        let h = 2.0 * q_max / (n - 1) as f64;
        let c = (n / 2) as isize;
        // Node positions are built from the signed offset to the centre so
        // that q_i = -q_{n-1-i} holds bit for bit.
        let values = (0..n as isize)
            .map(|i| f((i - c) as f64 * h))
            .collect();
        Self::from_values(q_max, values)
    }

    pub fn from_values(q_max: f64, values: Vec<f64>) -> Result<Self, GridError> {
        check_shape(q_max, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        let grid = Self { q_max, values };
        let (node, drift) = grid.symmetry_drift();
        if drift > SYMMETRY_TOL * grid.max_abs().max(f64::MIN_POSITIVE) {
            return Err(GridError::Asymmetric { node, drift });
        }
        Ok(grid)
    }

    /// Replaces the samples without re-validating; used by the flow, which
    /// keeps values finite and tracks parity itself.
    pub(crate) fn with_values_unchecked(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            q_max: self.q_max,
            values,
        }
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.q_max / (self.values.len() - 1) as f64
    }

    pub fn center(&self) -> usize {
        self.values.len() / 2
    }

    pub fn q(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.spacing()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest parity violation `|V[i] - V[n-1-i]|` and where it occurs.
    pub fn symmetry_drift(&self) -> (usize, f64) {
        let n = self.values.len();
        (0..n / 2)
            .map(|i| (i, (self.values[i] - self.values[n - 1 - i]).abs()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    pub fn second_derivative(&self, i: usize) -> f64 {
        second_derivative_at(&self.values, self.spacing(), i)
    }

    /// `m^2_Lambda`: the curvature at `q = 0`.
    pub fn curvature_at_origin(&self) -> f64 {
        self.second_derivative(self.center())
    }

    /// Writes `q,V` with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "q,V")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", fmt_num(self.q(i)), fmt_num(*v))?;
        }
        Ok(())
    }
}

fn check_shape(q_max: f64, n: usize) -> Result<(), GridError> {
    if n < MIN_NODES || n % 2 == 0 {
        return Err(GridError::BadNodeCount(n));
    }
    if !(q_max.is_finite() && q_max > 0.0) {
        return Err(GridError::BadHalfWidth(q_max));
    }
    Ok(())
}

/// Three-point central stencil inside, second-order one-sided stencils at the ends.
pub fn second_derivative_at(v: &[f64], h: f64, i: usize) -> f64 {
    let n = v.len();
    let inv_h2 = 1.0 / (h * h);
    if i == 0 {
        (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv_h2
    } else if i == n - 1 {
        (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) * inv_h2
    } else {
        ((v[i - 1] + v[i + 1]) - 2.0 * v[i]) * inv_h2
    }
}

/// Fills `out` with the second derivative at every node.
pub fn second_derivatives(v: &[f64], h: f64, out: &mut [f64]) {
    let n = v.len();
    let inv_h2 = 1.0 / (h * h);
    // (left + right) is commutative, so mirrored nodes get bit-identical values.
    for i in 1..n - 1 {
        out[i] = ((v[i - 1] + v[i + 1]) - 2.0 * v[i]) * inv_h2;
    }
    out[0] = second_derivative_at(v, h, 0);
    out[n - 1] = second_derivative_at(v, h, n - 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bare_grid_layout() {
        let p = ModelParams::new(1.0).unwrap();
        let g = PotentialGrid::init_from_bare(&p, 4.0, 401).unwrap();
        assert_eq!(g.values()[g.center()], 0.0);
        let imin = (0..g.len())
            .min_by(|&a, &b| g.values()[a].total_cmp(&g.values()[b]))
            .unwrap();
        assert!((g.q(imin).abs() - 0.5).abs() < g.spacing());
        for i in 0..g.len() {
            assert_eq!(g.values()[i], g.values()[g.len() - 1 - i]);
        }

        let p = ModelParams::new(0.1).unwrap();
        let g = PotentialGrid::init_from_bare(&p, 6.0, 601).unwrap();
        let imin = (0..g.len())
            .min_by(|&a, &b| g.values()[a].total_cmp(&g.values()[b]))
            .unwrap();
        assert!((g.q(imin).abs() - 1.0 / 0.4f64.sqrt()).abs() < g.spacing());
    }

    #[test]
    fn rejects_bad_shapes() {
        let p = ModelParams::new(0.1).unwrap();
        assert!(matches!(
            PotentialGrid::init_from_bare(&p, 4.0, 801),
            Err(GridError::DomainTooSmall { .. })
        ));
        assert!(matches!(
            PotentialGrid::from_fn(4.0, 800, |_| 0.0),
            Err(GridError::BadNodeCount(800))
        ));
        assert!(matches!(
            PotentialGrid::from_fn(4.0, 39, |_| 0.0),
            Err(GridError::BadNodeCount(39))
        ));
        assert!(matches!(
            PotentialGrid::from_fn(4.0, 41, |q| q),
            Err(GridError::Asymmetric { .. })
        ));
        assert!(matches!(
            PotentialGrid::from_fn(4.0, 41, |q| if q == 0.0 { f64::NAN } else { 0.0 }),
            Err(GridError::NonFinite(20))
        ));
    }

    #[test]
    fn stencil_on_simple_functions() {
        let g = PotentialGrid::from_fn(4.0, 801, |q| 0.5 * q * q).unwrap();
        for i in 1..g.len() - 1 {
            assert!((g.second_derivative(i) - 1.0).abs() < 1e-9, "node {i}");
        }
        assert!((g.second_derivative(0) - 1.0).abs() < 1e-8);
        assert!((g.second_derivative(g.len() - 1) - 1.0).abs() < 1e-8);
        assert!((g.curvature_at_origin() - 1.0).abs() < 1e-9);

        let flat = PotentialGrid::from_fn(4.0, 41, |_| 3.0).unwrap();
        for i in 0..flat.len() {
            assert_eq!(flat.second_derivative(i), 0.0);
        }
    }

    #[test]
    fn quartic_curvature_error_is_second_order() {
        // q_max = 2, n = 401 puts a node at q = 1 with h = 0.01.
        let g = PotentialGrid::from_fn(2.0, 401, |q| q.powi(4)).unwrap();
        let i = 300;
        assert!((g.q(i) - 1.0).abs() < 1e-12);
        // Leading error is h^2 V''''/12 = 2e-4.
        assert!((g.second_derivative(i) - 12.0).abs() < 2e-3);
    }

    #[test]
    fn bare_curvature_at_origin() {
        for l in [0.1, 0.4, 1.0, 5.0] {
            let p = ModelParams::new(l).unwrap();
            let g = PotentialGrid::init_from_bare(&p, 4.0f64.max(3.0 * p.well_position()), 801)
                .unwrap();
            // The stencil error at the origin is h^2 * 24 lambda0 / 12.
            let h = g.spacing();
            assert!((g.curvature_at_origin() + 1.0).abs() < 2.0 * l * h * h + 1e-12);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = PotentialGrid::from_fn(1.0, 41, |q| q * q).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "q,V");
        assert_eq!(lines.len(), 42);
        assert_eq!(lines[21], "0.00000000000e0,0.00000000000e0");
    }

    proptest! {
        // Cubic polynomials are reproduced to rounding at interior nodes.
        #[test]
        fn cubic_exactness(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
            let h = 0.05;
            let v: Vec<f64> = (0..41).map(|i| {
                let q = (i as f64 - 20.0) * h;
                a * q * q * q + b * q * q + c * q
            }).collect();
            for i in 1..40 {
                let q = (i as f64 - 20.0) * h;
                let exact = 6.0 * a * q + 2.0 * b;
                prop_assert!((second_derivative_at(&v, h, i) - exact).abs() < 1e-9);
            }
        }
    }
}
