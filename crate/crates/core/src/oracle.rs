//! Exact spectrum of the undamped double well from the Schrödinger equation.
//!
//! `H = -1/2 d^2/dq^2 + V(q)` is discretized with the three-point Laplacian
//! on the interior nodes of a uniform grid over `[-q_max, q_max]`, with
//! Dirichlet ends. Levels come from Sturm-sequence bisection on the
//! symmetric tridiagonal matrix, eigenvectors from inverse iteration.

use serde::Serialize;
use thiserror::Error;

use crate::model::{bare_potential, ModelParams};

/// Largest admissible `|psi|` at the outermost interior node, relative to `max |psi|`.
pub const BOUNDARY_TOL: f64 = 1e-8;
pub const DEFAULT_NODES: usize = 4001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle grid needs an odd number of nodes >= 5 and q_max > 0 (got n = {n}, q_max = {q_max})")]
    BadGrid { q_max: f64, n: usize },
    #[error("asked for {asked} levels, grid has {available} interior nodes")]
    BadLevelCount { asked: usize, available: usize },
    #[error(
        "level {level} has boundary amplitude {amplitude:e} (> {BOUNDARY_TOL:e} of its maximum); \
         increase q_max beyond {q_max}"
    )]
    BoundaryContamination { level: usize, amplitude: f64, q_max: f64 },
    #[error("the gap needs at least two levels")]
    NeedTwoLevels,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// Lowest `k` levels, ascending.
    pub energies: Vec<f64>,
    pub q_max: f64,
    pub n: usize,
    pub k: usize,
    /// True when the levels are the `(h, h/2)` Richardson combination.
    pub extrapolated: bool,
}

impl SpectrumResult {
    pub fn gap(&self) -> Result<f64, OracleError> {
        gap(self)
    }
}

/// `E_1 - E_0`.
pub fn gap(spectrum: &SpectrumResult) -> Result<f64, OracleError> {
    match spectrum.energies.as_slice() {
        [e0, e1, ..] => Ok(e1 - e0),
        _ => Err(OracleError::NeedTwoLevels),
    }
}

/// `12 / sqrt(min(1, 4 lambda0))`: about twelve oscillator lengths past the wells.
pub fn default_half_width(p: &ModelParams) -> f64 {
    12.0 / (4.0 * p.lambda0).min(1.0).sqrt()
}

/// Interior part of the discretized Hamiltonian.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// The constant off-diagonal element `-1 / (2 h^2)`.
    pub off: f64,
    pub h: f64,
}

impl Tridiagonal {
    pub fn hamiltonian(v: impl Fn(f64) -> f64, q_max: f64, n: usize) -> Result<Self, OracleError> {
        if n < 5 || n % 2 == 0 || !(q_max > 0.0 && q_max.is_finite()) {
            return Err(OracleError::BadGrid { q_max, n });
        }
        let h = 2.0 * q_max / (n - 1) as f64;
        let c = (n / 2) as isize;
        let kin = 1.0 / (h * h);
        let diag = (1..n as isize - 1)
            .map(|i| kin + v((i - c) as f64 * h))
            .collect();
        Ok(Self {
            diag,
            off: -0.5 * kin,
            h,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via LDL^T pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut piv = 1.0;
        for (i, d) in self.diag.iter().enumerate() {
            piv = if i == 0 { d - x } else { d - x - e2 / piv };
            if piv == 0.0 {
                piv = -f64::EPSILON * (d.abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if piv < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin bounds on the spectrum.
    fn bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |m, d| m.min(d - r));
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, d| m.max(d + r));
        (lo, hi)
    }

    /// The `j`-th eigenvalue (0-based) by bisection to full precision.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Normalized eigenvector for `energy` by inverse iteration.
    pub fn eigenvector(&self, energy: f64) -> Vec<f64> {
        let n = self.len();
        let shift = energy + 1e-10 * energy.abs().max(1.0);
        // Deterministic start with components of both parities.
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for _ in 0..3 {
            // Thomas algorithm for (T - shift) y = x.
            let mut den = self.diag[0] - shift;
            c[0] = self.off / den;
            d[0] = x[0] / den;
            for i in 1..n {
                den = self.diag[i] - shift - self.off * c[i - 1];
                if den == 0.0 {
                    den = f64::EPSILON;
                }
                c[i] = self.off / den;
                d[i] = (x[i] - self.off * d[i - 1]) / den;
            }
            x[n - 1] = d[n - 1];
            for i in (0..n - 1).rev() {
                x[i] = d[i] - c[i] * x[i + 1];
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        let imax = (0..n)
            .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
            .unwrap_or(0);
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        x
    }
}

/// Sign changes of `psi`, ignoring components below `1e-6` of its maximum.
pub fn node_count(psi: &[f64]) -> usize {
    let cut = 1e-6 * psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last = 0.0;
    let mut nodes = 0;
    for &v in psi.iter().filter(|v| v.abs() > cut) {
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            nodes += 1;
        }
        last = v;
    }
    nodes
}

/// `max(|psi_first|, |psi_last|) / max |psi|`.
pub fn boundary_amplitude(psi: &[f64]) -> f64 {
    let max = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let edge = psi[0].abs().max(psi[psi.len() - 1].abs());
    edge / max
}

/// Lowest `k` levels of `-1/2 d^2/dq^2 + v(q)`, with the boundary check.
pub fn solve_potential(
    v: impl Fn(f64) -> f64,
    q_max: f64,
    n: usize,
    k: usize,
) -> Result<SpectrumResult, OracleError> {
    let t = Tridiagonal::hamiltonian(v, q_max, n)?;
    if k == 0 || k > t.len() {
        return Err(OracleError::BadLevelCount {
            asked: k,
            available: t.len(),
        });
    }
    let mut energies = Vec::with_capacity(k);
    for j in 0..k {
        let e = t.eigenvalue(j);
        let amplitude = boundary_amplitude(&t.eigenvector(e));
        if amplitude > BOUNDARY_TOL {
            return Err(OracleError::BoundaryContamination {
                level: j,
                amplitude,
                q_max,
            });
        }
        energies.push(e);
    }
    Ok(SpectrumResult {
        energies,
        q_max,
        n,
        k,
        extrapolated: false,
    })
}

/// Lowest `k` levels of the bare double well.
pub fn solve_schrodinger(p: &ModelParams, q_max: f64, n: usize, k: usize) -> Result<SpectrumResult, OracleError> {
    solve_potential(|q| bare_potential(q, p), q_max, n, k)
}

/// Richardson combination `(4 E(h/2) - E(h)) / 3` of the grids with `n` and
/// `2n - 1` nodes; removes the `O(h^2)` error of the three-point Laplacian.
pub fn solve_potential_extrapolated(
    v: impl Fn(f64) -> f64,
    q_max: f64,
    n: usize,
    k: usize,
) -> Result<SpectrumResult, OracleError> {
    let coarse = solve_potential(&v, q_max, n, k)?;
    let fine = solve_potential(&v, q_max, 2 * n - 1, k)?;
    let energies = coarse
        .energies
        .iter()
        .zip(&fine.energies)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect();
    Ok(SpectrumResult {
        energies,
        q_max,
        n: 2 * n - 1,
        k,
        extrapolated: true,
    })
}

pub fn solve_schrodinger_extrapolated(
    p: &ModelParams,
    q_max: f64,
    n: usize,
    k: usize,
) -> Result<SpectrumResult, OracleError> {
    solve_potential_extrapolated(|q| bare_potential(q, p), q_max, n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(q: f64) -> f64 {
        0.5 * q * q
    }

    #[test]
    fn harmonic_levels() {
        let plain = solve_potential(harmonic, 10.0, 2001, 4).unwrap();
        let rich = solve_potential_extrapolated(harmonic, 10.0, 2001, 4).unwrap();
        for j in 0..4 {
            let exact = j as f64 + 0.5;
            // Three-point error is -h^2 <p^4> / 24 = -(h^2 / 32) (2 j^2 + 2 j + 1).
            let predicted = -1e-4 / 32.0 * (2 * j * j + 2 * j + 1) as f64;
            assert!((plain.energies[j] - exact - predicted).abs() < 1e-8, "level {j}");
            assert!((rich.energies[j] - exact).abs() < 1e-5, "level {j}");
        }
        assert!((plain.gap().unwrap() - 1.0).abs() < 1e-4);
        assert!((rich.gap().unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn matches_lapack_reference() {
        // Same discretization solved by an independent dense tridiagonal eigensolver.
        let cases = [
            (1.0, 12.0, [0.51477764853185, 2.02053135495344, 4.19099904808009, 6.70534535553741]),
            (0.1, 18.973665961010276, [-0.15412674285677, 0.14275823413705, 1.01016521644858, 1.94907436710225]),
            (10.0, 12.0, [1.37155184969149, 4.98930762185057, 9.88812164613553, 15.5153256624872]),
        ];
        for (l, q_max, reference) in cases {
            let p = ModelParams::new(l).unwrap();
            assert_eq!(default_half_width(&p), q_max);
            let s = solve_schrodinger(&p, q_max, DEFAULT_NODES, 4).unwrap();
            for (e, r) in s.energies.iter().zip(reference) {
                assert!((e - r).abs() < 1e-10 * r.abs().max(1.0), "lambda0 = {l}: {e} vs {r}");
            }
        }
    }

    #[test]
    fn parity_alternates() {
        let p = ModelParams::new(0.4).unwrap();
        let t = Tridiagonal::hamiltonian(|q| bare_potential(q, &p), 8.0, 1601).unwrap();
        let n = t.len();
        for j in 0..5 {
            let psi = t.eigenvector(t.eigenvalue(j));
            assert_eq!(node_count(&psi), j);
            let parity = if j % 2 == 0 { 1.0 } else { -1.0 };
            let q = |i: usize| (i as f64 + 1.0 - 800.0) * t.h;
            let mut mean = 0.0;
            for i in 0..n {
                assert!((psi[i] - parity * psi[n - 1 - i]).abs() < 1e-8);
                mean += q(i) * psi[i] * psi[i];
            }
            assert!(mean.abs() < 1e-8);
        }
    }

    #[test]
    fn levels_converge_monotonically_from_below() {
        let p = ModelParams::new(1.0).unwrap();
        let runs: Vec<_> = [1001, 2001, 4001]
            .iter()
            .map(|&n| solve_schrodinger(&p, 6.0, n, 4).unwrap())
            .collect();
        let limit = solve_schrodinger_extrapolated(&p, 6.0, 4001, 4).unwrap();
        for j in 0..4 {
            let e: Vec<f64> = runs.iter().map(|r| r.energies[j]).collect();
            assert!(e[0] < e[1] && e[1] < e[2] && e[2] < limit.energies[j]);
            // Each doubling cuts the change by about four.
            let ratio = (e[1] - e[0]) / (e[2] - e[1]);
            assert!((ratio - 4.0).abs() < 0.01, "level {j}: {ratio}");
        }
    }

    #[test]
    fn gap_trend_over_coupling() {
        let mut last = f64::INFINITY;
        for l in [10.0, 5.0, 2.0, 1.0, 0.4, 0.1] {
            let p = ModelParams::new(l).unwrap();
            let s = solve_schrodinger(&p, default_half_width(&p), 2001, 3).unwrap();
            let g = s.gap().unwrap();
            assert!(g > 0.0 && g < last, "lambda0 = {l}");
            last = g;
            let spacing = s.energies[2] - s.energies[1];
            if l == 10.0 {
                assert!(g / spacing > 0.7);
            }
            if l == 0.1 {
                assert!(g / spacing < 0.4);
            }
        }
    }

    #[test]
    fn detects_boundary_contamination() {
        let p = ModelParams::new(0.1).unwrap();
        assert!(matches!(
            solve_schrodinger(&p, 2.5, 401, 2),
            Err(OracleError::BoundaryContamination { .. })
        ));
        assert!(matches!(
            solve_schrodinger(&p, 10.0, 400, 2),
            Err(OracleError::BadGrid { .. })
        ));
        let one = solve_schrodinger(&p, 10.0, 401, 1).unwrap();
        assert_eq!(one.gap(), Err(OracleError::NeedTwoLevels));
    }
}
