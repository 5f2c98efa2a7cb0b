//! Direct finite-difference discretization of `L_p = sigma_3 (-d^2/dx^2 + 1 + V^(p))`
//! and the search for its gap eigenvalue near the threshold `z = 1`.
//!
//! In the variables `s = u_1 + u_2`, `d = u_1 - u_2` the eigenproblem
//! `L_p u = z u` splits into
//!
//! ```text
//! L_+ s = z d,   L_- d = z s,   L_- = T - G,   L_+ = T - p G,
//! ```
//!
//! with `T = -D^2 + 1` and `G = Q_p^{p-1}`. The same discrete matrix therefore
//! has eigenvalues `z` exactly when `L_- L_+` has eigenvalues `z^2`. Both
//! routes are available: the full `2n x 2n` matrix for structural checks,
//! and the banded product (half the size, an eighth of the work) for scans.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_line, LineFit};
use crate::grid::{make_grid, Grid, GridFunction, Rule};
use crate::soliton::eval_soliton_power;

/// Eigenvalues with `|Im z| < IMAG_TOLERANCE` count as real.
pub const IMAG_TOLERANCE: f64 = 1e-8;

/// Fraction of the squared norm an eigenvector must keep inside `|x| <= L/2`.
pub const LOCALIZATION_THRESHOLD: f64 = 0.99;

/// Gap eigenvalues below this are the (numerically split) zero eigenvalue.
const ZERO_MODE_CUTOFF: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Fd2,
    Fd4,
}

impl Scheme {
    /// Central stencil of `d^2/dx^2` at offsets `0, 1, 2, ...` (times `h^-2`).
    fn stencil(self) -> &'static [f64] {
        match self {
            Scheme::Fd2 => &[-2.0, 1.0],
            Scheme::Fd4 => &[-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
        }
    }
}

/// `sigma_3 (-D^2 + 1 + V)` on the unknowns of a uniform grid.
///
/// Dirichlet problems use the interior nodes (the boundary values are zero);
/// periodic problems drop the duplicated right endpoint.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    grid: Arc<Grid>,
    p: Option<f64>,
    bc: BoundaryCondition,
    scheme: Scheme,
    offset: usize,
    nodes: Vec<f64>,
    coupling: Vec<f64>,
    h: f64,
}

/// Build the discretized linearized operator for power `p`.
#[allow(non_snake_case)]
pub fn discretize_L(
    p: f64,
    grid: &Arc<Grid>,
    bc: BoundaryCondition,
    scheme: Scheme,
) -> Result<DiscretizedOperator> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::param("p", p, "the soliton exists only for p > 1"));
    }
    DiscretizedOperator::build(Some(p), grid, bc, scheme)
}

impl DiscretizedOperator {
    /// The free operator `sigma_3 (-D^2 + 1)`, whose spectrum avoids `(-1, 1)`.
    pub fn free(grid: &Arc<Grid>, bc: BoundaryCondition, scheme: Scheme) -> Result<Self> {
        Self::build(None, grid, bc, scheme)
    }

    fn build(p: Option<f64>, grid: &Arc<Grid>, bc: BoundaryCondition, scheme: Scheme) -> Result<Self> {
        let h = grid.spacing().ok_or_else(|| {
            Error::Precondition(format!(
                "finite differences need a uniform grid, got the {} rule",
                grid.rule()
            ))
        })?;
        let all = grid.nodes();
        let (offset, nodes) = match bc {
            BoundaryCondition::Dirichlet => (1, all[1..all.len() - 1].to_vec()),
            BoundaryCondition::Periodic => (0, all[..all.len() - 1].to_vec()),
        };
        let coupling = match p {
            Some(p) => nodes
                .iter()
                .map(|&x| eval_soliton_power(p, x))
                .collect::<Result<Vec<_>>>()?,
            None => vec![0.0; nodes.len()],
        };
        Ok(DiscretizedOperator {
            grid: Arc::clone(grid),
            p,
            bc,
            scheme,
            offset,
            nodes,
            coupling,
            h,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `None` for the free operator.
    pub fn p(&self) -> Option<f64> {
        self.p
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Number of unknowns per component.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Banded entries `(j, T_ij)` of `T = -D^2 + 1` in row `i`.
    fn t_row(&self, i: usize) -> Vec<(usize, f64)> {
        let n = self.len() as isize;
        let h2 = self.h * self.h;
        let mut row = Vec::with_capacity(5);
        for (k, &c) in self.scheme.stencil().iter().enumerate() {
            let offsets: &[isize] = if k == 0 { &[0] } else { &[-(k as isize), k as isize] };
            for &o in offsets {
                let j = i as isize + o;
                let j = match self.bc {
                    BoundaryCondition::Dirichlet if !(0..n).contains(&j) => continue,
                    BoundaryCondition::Dirichlet => j,
                    BoundaryCondition::Periodic => j.rem_euclid(n),
                };
                let diag = if o == 0 { 1.0 } else { 0.0 };
                row.push((j as usize, -c / h2 + diag));
            }
        }
        row
    }

    /// Rows of `L_- = T - G` (`coupling = 1`) or `L_+ = T - p G` (`coupling = p`).
    fn reduced_row(&self, i: usize, coupling: f64) -> Vec<(usize, f64)> {
        let mut row = self.t_row(i);
        for (j, v) in row.iter_mut() {
            if *j == i {
                *v -= coupling * self.coupling[i];
            }
        }
        row
    }

    fn p_or_one(&self) -> f64 {
        self.p.unwrap_or(1.0)
    }

    /// The `2n x 2n` matrix `[[T + a, b], [-b, -(T + a)]]` with
    /// `a = -(p+1)/2 G` and `b = -(p-1)/2 G`.
    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.len();
        let p = self.p_or_one();
        let mut m = Mat::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            let a = -0.5 * (p + 1.0) * self.coupling[i];
            let b = -0.5 * (p - 1.0) * self.coupling[i];
            for (j, t) in self.t_row(i) {
                m[(i, j)] += t;
                m[(n + i, n + j)] -= t;
            }
            m[(i, i)] += a;
            m[(n + i, n + i)] -= a;
            m[(i, n + i)] = b;
            m[(n + i, i)] = -b;
        }
        m
    }

    /// `L_- L_+`, whose eigenvalues are the squares of the eigenvalues of [`Self::to_dense`].
    pub fn reduced_product(&self) -> Mat<f64> {
        let n = self.len();
        let p = self.p_or_one();
        let mut m = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for (k, lm) in self.reduced_row(i, 1.0) {
                for (j, lp) in self.reduced_row(k, p) {
                    m[(i, j)] += lm * lp;
                }
            }
        }
        m
    }

    /// All eigenvalues of the full matrix.
    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        general_eigenvalues(&self.to_dense())
    }

    /// All eigenvalues `z^2` of the reduced product.
    pub fn squared_eigenvalues(&self) -> Result<Vec<c64>> {
        general_eigenvalues(&self.reduced_product())
    }

    /// Solve `L_p u = z u` for the eigenvalue `z` (with `z^2` from the reduced
    /// product) by inverse iteration, and return `u` on the full grid, zero at
    /// Dirichlet boundary nodes.
    pub fn eigenvector(&self, z: f64) -> Result<GridFunction> {
        let n = self.len();
        let p = self.p_or_one();
        let z2 = z * z;
        let shift = z2 + 1e-9 * z2.abs().max(1e-3);
        let mut shifted = self.reduced_product();
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        let lu = shifted.partial_piv_lu();
        let mut s = Mat::<f64>::from_fn(n, 1, |i, _| 1.0 + 0.1 * (i % 7) as f64);
        for _ in 0..4 {
            s = lu.solve(&s);
            let norm = s.norm_l2();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Eigensolver("inverse iteration broke down".into()));
            }
            s /= faer::Scale(norm);
        }
        // d = L_+ s / z
        let d: Vec<f64> = (0..n)
            .map(|i| {
                self.reduced_row(i, p)
                    .into_iter()
                    .map(|(j, v)| v * s[(j, 0)])
                    .sum::<f64>()
                    / z
            })
            .collect();
        let total = self.grid.len();
        let mut first = vec![0.0; total];
        let mut second = vec![0.0; total];
        for i in 0..n {
            first[i + self.offset] = 0.5 * (s[(i, 0)] + d[i]);
            second[i + self.offset] = 0.5 * (s[(i, 0)] - d[i]);
        }
        if self.bc == BoundaryCondition::Periodic {
            first[total - 1] = first[0];
            second[total - 1] = second[0];
        }
        GridFunction::from_components(&self.grid, &first, &second)
    }
}

fn general_eigenvalues(m: &Mat<f64>) -> Result<Vec<c64>> {
    m.eigenvalues()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Fraction of `|u|^2` (both components) carried by `|x| <= L/2`.
pub fn localization(u: &GridFunction) -> f64 {
    let grid = u.grid();
    let half = 0.5 * grid.half_length();
    let (mut inside, mut total) = (0.0, 0.0);
    for (i, &x) in grid.nodes().iter().enumerate() {
        let [a, b] = u.at(i);
        let mass = a * a + b * b;
        total += mass;
        if x.abs() <= half {
            inside += mass;
        }
    }
    if total > 0.0 {
        inside / total
    } else {
        0.0
    }
}

/// One gap eigenvalue `z = 1 - alpha^2` at `p = 3 + eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumScanRow {
    pub p: f64,
    pub eps: f64,
    pub z: f64,
    pub alpha: f64,
    pub ratio: f64,
}

impl SpectrumScanRow {
    pub fn new(p: f64, z: f64) -> Self {
        let eps = p - 3.0;
        let alpha = (1.0 - z).sqrt();
        SpectrumScanRow {
            p,
            eps,
            z,
            alpha,
            ratio: alpha / (eps * eps),
        }
    }
}

/// A localized eigenvalue in the gap with its eigenvector.
#[derive(Debug, Clone)]
pub struct GapEigenvalue {
    pub row: SpectrumScanRow,
    pub localization: f64,
    pub eigenvector: GridFunction,
}

impl GapEigenvalue {
    /// Largest `C e^{0.8 alpha L/2}` ratio violation: `max |u(x)| e^{0.8 alpha (|x| - x_0)} / |u(x_0)|`
    /// over the outer quarter `3L/4 <= |x| <= L`, with `x_0 = 3L/4`. At most 1 (up to
    /// rounding) when the tail decays at least like `e^{-0.8 alpha |x|}`.
    pub fn tail_decay_ratio(&self) -> f64 {
        let u = &self.eigenvector;
        let grid = u.grid();
        let amp = |i: usize| {
            let [a, b] = u.at(i);
            a.hypot(b)
        };
        let rate = 0.8 * self.row.alpha;
        let mut worst: f64 = 0.0;
        for side in [-1.0, 1.0] {
            let i0 = grid.nearest_index(side * 0.75 * grid.half_length());
            let x0 = grid.nodes()[i0].abs();
            let reference = amp(i0);
            for (i, &x) in grid.nodes().iter().enumerate() {
                if x * side >= x0 {
                    worst = worst.max(amp(i) * (rate * (x.abs() - x0)).exp() / reference);
                }
            }
        }
        worst
    }
}

/// Result of a gap-eigenvalue search.
#[derive(Debug, Clone)]
pub enum GapOutcome {
    Eigenvalue(GapEigenvalue),
    /// No localized eigenvalue in the gap; `candidate_z` is the real eigenvalue
    /// closest to the threshold (usually the lowest box state above 1).
    Resonance { candidate_z: f64, localization: f64 },
}

impl GapOutcome {
    pub fn eigenvalue(&self) -> Option<&GapEigenvalue> {
        match self {
            GapOutcome::Eigenvalue(e) => Some(e),
            GapOutcome::Resonance { .. } => None,
        }
    }

    /// `z` of the eigenvalue, or of the resonance candidate.
    pub fn z(&self) -> f64 {
        match self {
            GapOutcome::Eigenvalue(e) => e.row.z,
            GapOutcome::Resonance { candidate_z, .. } => *candidate_z,
        }
    }
}

/// Search `(0, 1)` for the localized eigenvalue of `L_p` closest to 1
/// (Dirichlet, fourth-order differences, `n_points` nodes on `[-L, L]`).
pub fn gap_eigenvalue(p: f64, half_length: f64, n_points: usize) -> Result<GapOutcome> {
    if !(p > 1.0 && p < 5.0) {
        return Err(Error::param("p", p, "gap eigenvalues are searched for 1 < p < 5"));
    }
    let grid = make_grid(half_length, n_points, Rule::Trapezoid)?;
    let op = discretize_L(p, &grid, BoundaryCondition::Dirichlet, Scheme::Fd4)?;
    let z2 = op.squared_eigenvalues()?;
    let mut real: Vec<f64> = z2
        .iter()
        .filter(|w| w.im.abs() < IMAG_TOLERANCE && w.re > 0.0)
        .map(|w| w.re.sqrt())
        .collect();
    real.sort_by(|a, b| b.total_cmp(a));
    if let Some(&z) = real.iter().find(|&&z| z < 1.0 && z > ZERO_MODE_CUTOFF) {
        let eigenvector = op.eigenvector(z)?;
        let loc = localization(&eigenvector);
        if loc >= LOCALIZATION_THRESHOLD {
            return Ok(GapOutcome::Eigenvalue(GapEigenvalue {
                row: SpectrumScanRow::new(p, z),
                localization: loc,
                eigenvector,
            }));
        }
        return Ok(GapOutcome::Resonance {
            candidate_z: z,
            localization: loc,
        });
    }
    let candidate_z = real
        .iter()
        .copied()
        .filter(|&z| z > ZERO_MODE_CUTOFF)
        .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
        .ok_or_else(|| Error::Eigensolver("no real eigenvalue near the threshold".into()))?;
    let loc = localization(&op.eigenvector(candidate_z)?);
    Ok(GapOutcome::Resonance {
        candidate_z,
        localization: loc,
    })
}

/// How [`scan_bifurcation`] picks the domain and the resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    /// `alpha_2` used in `L = max(min_half_length, tail_factor / (alpha_2 eps^2))`.
    pub alpha2: f64,
    pub min_half_length: f64,
    pub tail_factor: f64,
    /// Target node spacing.
    pub spacing: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            alpha2: 2.53 / 8.0,
            min_half_length: 40.0,
            tail_factor: 8.0,
            spacing: 0.1,
        }
    }
}

impl ScanOptions {
    pub fn half_length(&self, eps: f64) -> f64 {
        self.min_half_length.max(self.tail_factor / (self.alpha2 * eps * eps))
    }

    pub fn n_points(&self, half_length: f64) -> usize {
        (2.0 * half_length / self.spacing).round() as usize + 1
    }
}

/// Status of one `p` in a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScanStatus {
    Eigenvalue { row: SpectrumScanRow, localization: f64 },
    Resonance { candidate_z: f64, localization: f64 },
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub p: f64,
    pub eps: f64,
    pub half_length: f64,
    pub n_points: usize,
    #[serde(flatten)]
    pub status: ScanStatus,
}

impl ScanEntry {
    pub fn row(&self) -> Option<&SpectrumScanRow> {
        match &self.status {
            ScanStatus::Eigenvalue { row, .. } => Some(row),
            _ => None,
        }
    }
}

/// Run [`gap_eigenvalue`] for every `p`, with the domain growing like `eps^-2`.
/// Failures are recorded per entry and do not stop the scan.
pub fn scan_bifurcation(p_list: &[f64], options: ScanOptions) -> Result<Vec<ScanEntry>> {
    if p_list.is_empty() {
        return Err(Error::Precondition("scan needs at least one p".into()));
    }
    if let Some(&p) = p_list.iter().find(|&&p| p == 3.0) {
        return Err(Error::param("p", p, "the scan excludes the resonant power p = 3"));
    }
    if !(options.alpha2 > 0.0 && options.spacing > 0.0) {
        return Err(Error::param("alpha2", options.alpha2, "scan options must be positive"));
    }
    Ok(p_list
        .iter()
        .map(|&p| {
            let eps = p - 3.0;
            let half_length = options.half_length(eps);
            let n_points = options.n_points(half_length);
            let status = match gap_eigenvalue(p, half_length, n_points) {
                Ok(GapOutcome::Eigenvalue(e)) => ScanStatus::Eigenvalue {
                    row: e.row,
                    localization: e.localization,
                },
                Ok(GapOutcome::Resonance {
                    candidate_z,
                    localization,
                }) => ScanStatus::Resonance {
                    candidate_z,
                    localization,
                },
                Err(e) => ScanStatus::Failed {
                    message: e.to_string(),
                },
            };
            ScanEntry {
                p,
                eps,
                half_length,
                n_points,
                status,
            }
        })
        .collect())
}

/// Fit of `1 - z = alpha^2` against `|eps|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationFit {
    /// Exponent `k` in `1 - z ~ C |eps|^k`.
    pub exponent: f64,
    /// `alpha_2` with the exponent fixed at 4: geometric mean of `alpha / eps^2`.
    pub alpha2: f64,
    /// `sqrt(C)` from the free fit.
    pub alpha2_free: f64,
    pub rows: usize,
}

pub fn fit_bifurcation(rows: &[SpectrumScanRow]) -> Result<BifurcationFit> {
    let xs: Vec<f64> = rows.iter().map(|r| r.eps.abs().ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (1.0 - r.z).ln()).collect();
    let LineFit { slope, intercept } = fit_line(&xs, &ys)?;
    let mean_log_ratio = rows.iter().map(|r| r.ratio.ln()).sum::<f64>() / rows.len() as f64;
    Ok(BifurcationFit {
        exponent: slope,
        alpha2: mean_log_ratio.exp(),
        alpha2_free: (0.5 * intercept).exp(),
        rows: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real_parts(z: &[c64]) -> Vec<f64> {
        z.iter().filter(|w| w.im.abs() < IMAG_TOLERANCE).map(|w| w.re).collect()
    }

    #[test]
    fn rejects_non_uniform_grid_and_bad_p() {
        let gl = make_grid(10.0, 101, Rule::GaussLegendreComposite).unwrap();
        assert!(discretize_L(3.0, &gl, BoundaryCondition::Dirichlet, Scheme::Fd4).is_err());
        let grid = make_grid(10.0, 101, Rule::Trapezoid).unwrap();
        assert!(discretize_L(1.0, &grid, BoundaryCondition::Dirichlet, Scheme::Fd4).is_err());
        assert!(gap_eigenvalue(5.0, 20.0, 201).is_err());
        assert!(scan_bifurcation(&[3.0], ScanOptions::default()).is_err());
        assert!(scan_bifurcation(&[], ScanOptions::default()).is_err());
    }

    #[test]
    fn free_operator_has_no_gap_spectrum() {
        let grid = make_grid(20.0, 201, Rule::Trapezoid).unwrap();
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
            for scheme in [Scheme::Fd2, Scheme::Fd4] {
                let op = DiscretizedOperator::free(&grid, bc, scheme).unwrap();
                let ev = op.eigenvalues().unwrap();
                assert!(ev.iter().all(|z| z.re.abs() >= 1.0 - 1e-10 && z.im.abs() < 1e-8));
            }
        }
    }

    #[test]
    fn reduced_product_squares_the_spectrum() {
        let grid = make_grid(12.0, 121, Rule::Trapezoid).unwrap();
        let op = discretize_L(3.4, &grid, BoundaryCondition::Dirichlet, Scheme::Fd4).unwrap();
        let mut full: Vec<f64> = real_parts(&op.eigenvalues().unwrap())
            .into_iter()
            .filter(|z| *z > 0.5)
            .map(|z| z * z)
            .collect();
        let mut reduced: Vec<f64> = real_parts(&op.squared_eigenvalues().unwrap())
            .into_iter()
            .filter(|z| *z > 0.25)
            .collect();
        full.sort_by(f64::total_cmp);
        reduced.sort_by(f64::total_cmp);
        assert_eq!(full.len(), reduced.len());
        for (a, b) in full.iter().zip(&reduced) {
            assert!((a - b).abs() < 1e-8 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn spectrum_is_symmetric() {
        let grid = make_grid(20.0, 301, Rule::Trapezoid).unwrap();
        for p in [2.6, 3.0, 3.5] {
            let op = discretize_L(p, &grid, BoundaryCondition::Dirichlet, Scheme::Fd4).unwrap();
            let ev = op.eigenvalues().unwrap();
            let gap: Vec<f64> = real_parts(&ev).into_iter().filter(|z| z.abs() < 1.0 && z.abs() > 0.1).collect();
            for z in &gap {
                assert!(gap.iter().any(|w| (w + z).abs() < 1e-8), "p = {p}: no partner for {z}");
            }
        }
    }

    #[test]
    fn zero_is_an_eigenvalue() {
        let grid = make_grid(40.0, 2000, Rule::Trapezoid).unwrap();
        let op = discretize_L(3.0, &grid, BoundaryCondition::Dirichlet, Scheme::Fd4).unwrap();
        let smallest = op
            .squared_eigenvalues()
            .unwrap()
            .iter()
            .map(|w| w.norm().sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(smallest <= 1e-3, "smallest |z| = {smallest}");
    }

    #[test]
    fn eigenvector_solves_the_eigenproblem() {
        let outcome = gap_eigenvalue(3.8, 40.0, 401).unwrap();
        let e = outcome.eigenvalue().expect("p = 3.8 has a gap eigenvalue");
        let grid = e.eigenvector.grid();
        let op = discretize_L(3.8, grid, BoundaryCondition::Dirichlet, Scheme::Fd4).unwrap();
        let n = op.len();
        let m = op.to_dense();
        let u: Vec<f64> = (0..2 * n)
            .map(|k| e.eigenvector.values()[if k < n { k + 1 } else { grid.len() + k - n + 1 }])
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..2 * n {
            let lu: f64 = (0..2 * n).map(|j| m[(i, j)] * u[j]).sum();
            worst = worst.max((lu - e.row.z * u[i]).abs());
        }
        let scale = u.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        assert!(worst < 1e-8 * scale, "{worst}");
        assert!(e.localization >= LOCALIZATION_THRESHOLD);
        assert!(e.row.z > 0.0 && e.row.z < 1.0);
    }

    #[test]
    fn tail_decays_at_least_like_the_eigenvalue_predicts() {
        for p in [3.8, 2.2] {
            let e = gap_eigenvalue(p, 40.0, 401).unwrap();
            let e = e.eigenvalue().unwrap().clone();
            assert!(e.tail_decay_ratio() <= 1.0 + 1e-6, "p = {p}: {}", e.tail_decay_ratio());
        }
    }

    #[test]
    fn scan_row_bookkeeping() {
        let row = SpectrumScanRow::new(3.5, 0.99);
        assert_abs_diff_eq!(row.eps, 0.5);
        assert_abs_diff_eq!(row.alpha, 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(row.ratio, 0.4, epsilon = 1e-13);
        let options = ScanOptions::default();
        assert_abs_diff_eq!(options.half_length(0.8), 40.0);
        assert!(options.half_length(0.4) > 150.0);
    }

    #[test]
    fn fit_of_an_exact_law() {
        let rows: Vec<SpectrumScanRow> = [0.4, -0.6, 0.8]
            .iter()
            .map(|&e: &f64| SpectrumScanRow::new(3.0 + e, 1.0 - (0.3 * e * e).powi(2)))
            .collect();
        let fit = fit_bifurcation(&rows).unwrap();
        assert_abs_diff_eq!(fit.exponent, 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.alpha2, 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.alpha2_free, 0.3, epsilon = 1e-10);
    }
}
