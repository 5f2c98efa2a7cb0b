//! Lyapunov-Schmidt expansion data for the bifurcating eigenvalue.
//!
//! With `eps = p - 3` and `z = 1 - alpha^2`, the Birman-Schwinger equation
//! `(K_{alpha,eps} + 1) w = 0` is solved order by order,
//!
//! ```text
//! w     = w_0 + eps w_1 + eps^2 w_2 + ...
//! alpha = eps^2 alpha_2 + ...
//! ```
//!
//! The components of `w_1`, `w_2` along `v` are explicit. The components in
//! `Ran(1 - P)` need `(Pbar (K_00 + 1) Pbar)^{-1}` on `{v, w_0}^perp`, which is
//! computed by a Galerkin method on an enveloped Fourier basis with `v` and
//! `w_0` projected out.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{build_v, inner, Grid, GridFunction, Projector};
use crate::operator::{apply, assemble_full_k, assemble_k, KernelOperator, OperatorTag, ScalarKernel, ALPHA_FLOOR};
use crate::soliton::{eval_weight_half, q1, q2, q3_sq, sech, sech2, tanh};

/// Relative size of `<g, v>` and `<g, w_0>` tolerated by the complement solve.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-6;

/// The seven operators of the expansion of `K_{alpha,eps}`, assembled once.
#[derive(Debug, Clone)]
pub struct ExpansionOperators {
    pub km10: KernelOperator,
    pub km11: KernelOperator,
    pub km12: KernelOperator,
    pub k00: KernelOperator,
    pub k01: KernelOperator,
    pub k02: KernelOperator,
    pub k10: KernelOperator,
}

impl ExpansionOperators {
    pub fn assemble(grid: &Arc<Grid>) -> Result<Self> {
        Ok(ExpansionOperators {
            km10: assemble_k(OperatorTag::Km10, grid)?,
            km11: assemble_k(OperatorTag::Km11, grid)?,
            km12: assemble_k(OperatorTag::Km12, grid)?,
            k00: assemble_k(OperatorTag::K00, grid)?,
            k01: assemble_k(OperatorTag::K01, grid)?,
            k02: assemble_k(OperatorTag::K02, grid)?,
            k10: assemble_k(OperatorTag::K10, grid)?,
        })
    }

    /// `(K_00 + 1) f`
    pub fn k00_plus_one(&self, f: &GridFunction) -> Result<GridFunction> {
        apply(&self.k00, f)?.add(f)
    }
}

/// `w_0 = |V_0|^{1/2} u_0` with the resonance `u_0 = 2 (tanh^2 x, -sech^2 x)`.
pub fn build_w0(grid: &Arc<Grid>) -> GridFunction {
    GridFunction::from_fn(grid, |x| {
        let t = tanh(x);
        let u0 = [2.0 * t * t, -2.0 * sech2(x)];
        eval_weight_half(x).apply(u0)
    })
}

/// Settings for [`build_galerkin_basis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GalerkinOptions {
    /// Highest Fourier index `k` in `cos(k pi x / L)`, `sin(k pi x / L)`.
    pub n_modes: usize,
    /// Envelope `sech(rate * x)` multiplying every mode.
    pub envelope_rate: f64,
    /// Gram eigen-directions below this fraction of the largest are dropped.
    pub prune_tolerance: f64,
    /// Upper bound on the condition number of the retained Gram matrix.
    pub condition_ceiling: f64,
}

impl Default for GalerkinOptions {
    fn default() -> Self {
        GalerkinOptions {
            n_modes: 96,
            envelope_rate: 0.5,
            prune_tolerance: 1e-10,
            condition_ceiling: 1e8,
        }
    }
}

impl GalerkinOptions {
    pub fn with_modes(n_modes: usize) -> Self {
        GalerkinOptions {
            n_modes,
            ..Default::default()
        }
    }
}

/// Orthonormal basis of a subspace of `{v, w_0}^perp`.
#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    functions: Vec<GridFunction>,
    /// Condition number of the Gram matrix restricted to the retained directions
    /// of the raw (enveloped, projected) modes.
    pub gram_condition: f64,
    /// Number of raw modes before pruning.
    pub raw_count: usize,
    matrix: Mat<f64>,
}

impl GalerkinBasis {
    pub fn functions(&self) -> &[GridFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

fn weighted_rows(grid: &Grid, m: &Mat<f64>) -> Mat<f64> {
    let n = grid.len();
    let w = grid.weights();
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| w[i % n] * m[(i, j)])
}

fn column(m: &Mat<f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// Enveloped Fourier modes in both components, with `v` and `w_0` projected
/// out, pruned to a well-conditioned set and orthonormalized.
pub fn build_galerkin_basis(
    grid: &Arc<Grid>,
    w0: &GridFunction,
    options: GalerkinOptions,
) -> Result<GalerkinBasis> {
    if options.n_modes < 8 {
        return Err(Error::param(
            "n_modes",
            options.n_modes as f64,
            "at least 8 Fourier modes are required",
        ));
    }
    let n = grid.len();
    let half = grid.half_length();
    let p = Projector::onto(build_v(grid))?;
    let p0 = Projector::onto(w0.clone())?;

    let mut raw: Vec<GridFunction> = Vec::with_capacity(2 * (2 * options.n_modes + 1));
    for comp in 0..2 {
        for k in 0..=options.n_modes {
            let freq = k as f64 * std::f64::consts::PI / half;
            let shapes: &[fn(f64) -> f64] = if k == 0 { &[f64::cos] } else { &[f64::cos, f64::sin] };
            for shape in shapes {
                let f = GridFunction::from_fn(grid, |x| {
                    let val = sech(options.envelope_rate * x) * shape(freq * x);
                    if comp == 0 {
                        [val, 0.0]
                    } else {
                        [0.0, val]
                    }
                });
                raw.push(p0.complement(&p.complement(&f)?)?);
            }
        }
    }
    let raw_count = raw.len();
    let phi = Mat::from_fn(2 * n, raw_count, |i, j| raw[j].values()[i]);
    let gram = phi.transpose() * weighted_rows(grid, &phi);
    let evd = gram
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Gram eigendecomposition failed: {e:?}")))?;
    let lambdas: Vec<f64> = (0..raw_count).map(|k| evd.S()[k]).collect();
    let lambda_max = lambdas.iter().cloned().fold(0.0_f64, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::Numerical("Galerkin basis is empty".into()));
    }
    let floor = lambda_max * options.prune_tolerance.max(1.0 / options.condition_ceiling);
    let kept: Vec<usize> = (0..raw_count).filter(|&k| lambdas[k] >= floor).collect();
    if kept.is_empty() {
        return Err(Error::Numerical("Galerkin basis is empty after pruning".into()));
    }
    let lambda_min = kept.iter().map(|&k| lambdas[k]).fold(f64::INFINITY, f64::min);
    let u = evd.U();
    let coeffs = Mat::from_fn(raw_count, kept.len(), |i, j| u[(i, kept[j])] / lambdas[kept[j]].sqrt());
    let ortho = &phi * &coeffs;
    let mut functions = Vec::with_capacity(kept.len());
    for j in 0..kept.len() {
        let f = GridFunction::from_values(grid, column(&ortho, j))?;
        functions.push(p0.complement(&p.complement(&f)?)?);
    }
    let matrix = Mat::from_fn(2 * n, functions.len(), |i, j| functions[j].values()[i]);
    Ok(GalerkinBasis {
        functions,
        gram_condition: lambda_max / lambda_min,
        raw_count,
        matrix,
    })
}

/// `B a = b` with `B_{jk} = <phi_j, (K_00 + 1) phi_k>`, factored once.
#[derive(Debug)]
pub struct GalerkinSystem {
    basis: GalerkinBasis,
    matrix: Mat<f64>,
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    /// 2-norm condition number of `B`.
    pub condition: f64,
}

impl GalerkinSystem {
    pub fn new(basis: GalerkinBasis, k00: &KernelOperator) -> Result<Self> {
        let grid = Arc::clone(basis.functions[0].grid());
        let m = basis.len();
        let mut image = Mat::<f64>::zeros(2 * grid.len(), m);
        for (j, phi) in basis.functions.iter().enumerate() {
            let kphi = k00.apply_values(phi.values());
            for (i, (a, b)) in kphi.iter().zip(phi.values()).enumerate() {
                image[(i, j)] = a + b;
            }
        }
        let matrix = weighted_rows(&grid, &basis.matrix).transpose() * &image;
        let sv = matrix
            .singular_values()
            .map_err(|e| Error::Numerical(format!("SVD of the Galerkin matrix failed: {e:?}")))?;
        let (smax, smin) = (sv[0], sv[sv.len() - 1]);
        if !(smin > 1e-14 * smax) {
            return Err(Error::Numerical(format!(
                "Galerkin matrix is numerically singular (singular values {smax:e} .. {smin:e}, basis size {m}, Gram condition {:e})",
                basis.gram_condition
            )));
        }
        let lu = matrix.partial_piv_lu();
        Ok(GalerkinSystem {
            basis,
            matrix,
            lu,
            condition: smax / smin,
        })
    }

    pub fn basis(&self) -> &GalerkinBasis {
        &self.basis
    }

    /// Solve `Pbar (K_00 + 1) Pbar x = g` for `g` orthogonal to `v` and `w_0`.
    pub fn invert_on_complement(
        &self,
        g: &GridFunction,
        v: &GridFunction,
        w0: &GridFunction,
    ) -> Result<GridFunction> {
        let gn = g.norm();
        if gn == 0.0 {
            return Ok(GridFunction::zeros(g.grid()));
        }
        for (name, d) in [("v", v), ("w_0", w0)] {
            let overlap = inner(g, d)?.abs();
            if overlap > ORTHOGONALITY_TOLERANCE * gn * d.norm() {
                return Err(Error::Precondition(format!(
                    "right-hand side is not orthogonal to {name}: <g, {name}> = {overlap:e}"
                )));
            }
        }
        let grid = g.grid();
        let m = self.basis.len();
        let w = grid.weights();
        let n = grid.len();
        let rhs = Mat::from_fn(m, 1, |j, _| {
            let phi = self.basis.functions[j].values();
            g.values()
                .iter()
                .enumerate()
                .map(|(i, gv)| w[i % n] * phi[i] * gv)
                .sum::<f64>()
        });
        let mut coeffs = self.lu.solve(&rhs);
        // one step of iterative refinement
        let residual = &rhs - &self.matrix * &coeffs;
        let correction = self.lu.solve(&residual);
        coeffs += correction;
        let x = &self.basis.matrix * &coeffs;
        GridFunction::from_values(grid, column(&x, 0))
    }
}

/// The six inner products defining `alpha_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alpha2Terms {
    pub numerator_terms: [f64; 4],
    pub denominator_terms: [f64; 2],
}

impl Alpha2Terms {
    pub fn alpha2(&self) -> f64 {
        self.numerator_terms.iter().sum::<f64>() / self.denominator_terms.iter().sum::<f64>()
    }
}

/// The two quadrature routes to `<w_0, K_02 w_0> + (1/4) <w_0, K_00 K_{-12} w_0>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    pub c2: f64,
    /// Reduced to single integrals with `h = -Q^2` and its second-component analogue.
    pub single_integral: f64,
    /// Operator route, `K_02` and `K_00 K_{-12}` applied to `w_0`.
    pub double_integral: f64,
}

impl CrossCheck {
    pub fn relative_disagreement(&self) -> f64 {
        (self.single_integral - self.double_integral).abs() / self.single_integral.abs()
    }
}

/// Everything the expansion produces. Serialized as-is by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionResult {
    pub w0: GridFunction,
    pub w1: GridFunction,
    pub w2: GridFunction,
    pub alpha2: f64,
    pub numerator_terms: [f64; 4],
    pub denominator_terms: [f64; 2],
    #[serde(rename = "A")]
    pub a: [[f64; 2]; 2],
    pub identity_residual: f64,
    pub c2: f64,
}

/// Side information from one expansion run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionDiagnostics {
    pub basis_size: usize,
    pub raw_basis_size: usize,
    pub gram_condition: f64,
    pub galerkin_condition: f64,
    /// `|Pbar (K_00+1) Pbar Pbar w_1 - g_1| / |g_1|`
    pub w1_relative_residual: f64,
    /// Same for `w_2`.
    pub w2_relative_residual: f64,
    /// `<g_2, w_0>`, which vanishes by the choice of `alpha_2`.
    pub w2_solvability: f64,
    pub crosscheck: CrossCheck,
}

/// Grid, operators, `v`, `w_0`, and the factored Galerkin system.
#[derive(Debug)]
pub struct ExpansionContext {
    grid: Arc<Grid>,
    ops: ExpansionOperators,
    v: GridFunction,
    w0: GridFunction,
    p: Projector,
    system: GalerkinSystem,
}

impl ExpansionContext {
    pub fn new(grid: &Arc<Grid>, options: GalerkinOptions) -> Result<Self> {
        let ops = ExpansionOperators::assemble(grid)?;
        let v = build_v(grid);
        let w0 = build_w0(grid);
        let basis = build_galerkin_basis(grid, &w0, options)?;
        let system = GalerkinSystem::new(basis, &ops.k00)?;
        Ok(ExpansionContext {
            grid: Arc::clone(grid),
            p: Projector::onto(v.clone())?,
            ops,
            v,
            w0,
            system,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn operators(&self) -> &ExpansionOperators {
        &self.ops
    }

    pub fn v(&self) -> &GridFunction {
        &self.v
    }

    pub fn w0(&self) -> &GridFunction {
        &self.w0
    }

    pub fn system(&self) -> &GalerkinSystem {
        &self.system
    }

    fn ap(&self, op: &KernelOperator, f: &GridFunction) -> Result<GridFunction> {
        apply(op, f)
    }

    fn pbar(&self, f: &GridFunction) -> Result<GridFunction> {
        self.p.complement(f)
    }

    /// `Pbar (K_00 + 1) Pbar f`
    pub fn complement_operator(&self, f: &GridFunction) -> Result<GridFunction> {
        let inner_f = self.pbar(f)?;
        self.pbar(&self.ops.k00_plus_one(&inner_f)?)
    }

    pub fn invert_on_complement(&self, g: &GridFunction) -> Result<GridFunction> {
        self.system.invert_on_complement(g, &self.v, &self.w0)
    }

    /// `<w_0, (1/4) K_00 K_{-11} w_0 + K_01 w_0>`, zero analytically.
    pub fn verify_first_order_identity(&self) -> Result<f64> {
        let (a, b) = self.first_order_summands()?;
        Ok(a + b)
    }

    /// The two summands of the first-order identity, separately.
    pub fn first_order_summands(&self) -> Result<(f64, f64)> {
        let km11w0 = self.ap(&self.ops.km11, &self.w0)?;
        let a = 0.25 * inner(&self.w0, &self.ap(&self.ops.k00, &km11w0)?)?;
        let b = inner(&self.w0, &self.ap(&self.ops.k01, &self.w0)?)?;
        Ok((a, b))
    }

    /// Right-hand side `g_1 = -(1/4 Pbar K_00 K_{-11} w_0 + Pbar K_01 w_0)`.
    pub fn w1_rhs(&self) -> Result<GridFunction> {
        let km11w0 = self.ap(&self.ops.km11, &self.w0)?;
        let a = self.ap(&self.ops.k00, &km11w0)?.scaled(0.25);
        let b = self.ap(&self.ops.k01, &self.w0)?;
        Ok(self.pbar(&a.add(&b)?)?.scaled(-1.0))
    }

    /// `w_1 = (1/4) K_{-11} w_0 + (Pbar (K_00+1) Pbar)^{-1} g_1`.
    pub fn solve_w1(&self) -> Result<GridFunction> {
        let pw1 = self.ap(&self.ops.km11, &self.w0)?.scaled(0.25);
        let pbar_w1 = self.invert_on_complement(&self.w1_rhs()?)?;
        pw1.add(&pbar_w1)
    }

    pub fn alpha2_terms(&self, w1: &GridFunction) -> Result<Alpha2Terms> {
        let ops = &self.ops;
        let w0 = &self.w0;
        let km11w1 = self.ap(&ops.km11, w1)?;
        let km12w0 = self.ap(&ops.km12, w0)?;
        let numerator_terms = [
            -0.25 * inner(w0, &self.ap(&ops.k00, &km11w1)?)?,
            -0.25 * inner(w0, &self.ap(&ops.k00, &km12w0)?)?,
            -inner(w0, &self.ap(&ops.k01, w1)?)?,
            -inner(w0, &self.ap(&ops.k02, w0)?)?,
        ];
        let k00p1w0 = ops.k00_plus_one(w0)?;
        let denominator_terms = [
            inner(w0, &self.ap(&ops.k10, w0)?)?,
            0.25 * inner(w0, &self.ap(&ops.k00, &k00p1w0)?)?,
        ];
        Ok(Alpha2Terms {
            numerator_terms,
            denominator_terms,
        })
    }

    /// `alpha_2` from a computed `w_1`. Fails if the denominator is below
    /// `1e-6`, which only happens when assembly is broken.
    pub fn compute_alpha2(&self, w1: &GridFunction) -> Result<(f64, Alpha2Terms)> {
        let terms = self.alpha2_terms(w1)?;
        let den: f64 = terms.denominator_terms.iter().sum();
        if den.abs() < 1e-6 {
            return Err(Error::Numerical(format!("alpha_2 denominator {den:e} vanishes")));
        }
        Ok((terms.alpha2(), terms))
    }

    /// `[[<w_0,K_10 w_0>, <w_0,K_00 v>], [<v,(K_00+1) w_0>, <v,K_{-10} v>]]`
    pub fn assemble_a(&self) -> Result<[[f64; 2]; 2]> {
        let (v, w0, ops) = (&self.v, &self.w0, &self.ops);
        Ok([
            [
                inner(w0, &self.ap(&ops.k10, w0)?)?,
                inner(w0, &self.ap(&ops.k00, v)?)?,
            ],
            [
                inner(v, &ops.k00_plus_one(w0)?)?,
                inner(v, &self.ap(&ops.km10, v)?)?,
            ],
        ])
    }

    /// `g_2`, the right-hand side of the second-order complement equation.
    pub fn w2_rhs(&self, w1: &GridFunction, alpha2: f64) -> Result<GridFunction> {
        let (ops, w0) = (&self.ops, &self.w0);
        let k00 = |f: &GridFunction| self.ap(&ops.k00, f);
        let sum = k00(&self.ap(&ops.km11, w1)?)?
            .scaled(0.25)
            .add(&k00(&self.ap(&ops.km12, w0)?)?.scaled(0.25))?
            .add(&k00(&ops.k00_plus_one(w0)?)?.scaled(0.25 * alpha2))?
            .add(&self.ap(&ops.k01, w1)?)?
            .add(&self.ap(&ops.k02, w0)?)?
            .add(&self.ap(&ops.k10, w0)?.scaled(alpha2))?;
        Ok(self.pbar(&sum)?.scaled(-1.0))
    }

    /// `w_2 = Pw_2 + (Pbar (K_00+1) Pbar)^{-1} g_2`.
    pub fn solve_w2(&self, w1: &GridFunction, alpha2: f64) -> Result<GridFunction> {
        let (ops, w0) = (&self.ops, &self.w0);
        let pw2 = self
            .ap(&ops.km11, w1)?
            .add(&self.ap(&ops.km12, w0)?)?
            .add(&ops.k00_plus_one(w0)?.scaled(alpha2))?
            .scaled(0.25);
        let pbar_w2 = self.invert_on_complement(&self.w2_rhs(w1, alpha2)?)?;
        pw2.add(&pbar_w2)
    }

    /// Both routes to the combined inner product; fails if they disagree in
    /// the sixth significant figure.
    pub fn single_integral_crosscheck(&self) -> Result<CrossCheck> {
        let check = CrossCheck {
            c2: c2_coefficient(&self.grid),
            single_integral: combined_inner_product_single(&self.grid),
            double_integral: {
                let km12w0 = self.ap(&self.ops.km12, &self.w0)?;
                inner(&self.w0, &self.ap(&self.ops.k02, &self.w0)?)?
                    + 0.25 * inner(&self.w0, &self.ap(&self.ops.k00, &km12w0)?)?
            },
        };
        if !(check.relative_disagreement() <= 1e-6) {
            return Err(Error::Numerical(format!(
                "single-integral ({}) and operator ({}) routes disagree",
                check.single_integral, check.double_integral
            )));
        }
        Ok(check)
    }

    fn relative_residual(&self, pbar_part: &GridFunction, g: &GridFunction) -> Result<f64> {
        let forward = self.complement_operator(pbar_part)?;
        Ok(forward.sub(g)?.norm() / g.norm())
    }

    /// Run the whole expansion.
    pub fn run(&self) -> Result<(ExpansionResult, ExpansionDiagnostics)> {
        let g1 = self.w1_rhs()?;
        let pbar_w1 = self.invert_on_complement(&g1)?;
        let w1 = self.ap(&self.ops.km11, &self.w0)?.scaled(0.25).add(&pbar_w1)?;
        let (alpha2, terms) = self.compute_alpha2(&w1)?;
        let g2 = self.w2_rhs(&w1, alpha2)?;
        let w2_solvability = inner(&g2, &self.w0)?;
        let w2 = self.solve_w2(&w1, alpha2)?;
        let pbar_w2 = self.pbar(&w2)?;
        let crosscheck = self.single_integral_crosscheck()?;
        let diagnostics = ExpansionDiagnostics {
            basis_size: self.system.basis.len(),
            raw_basis_size: self.system.basis.raw_count,
            gram_condition: self.system.basis.gram_condition,
            galerkin_condition: self.system.condition,
            w1_relative_residual: self.relative_residual(&pbar_w1, &g1)?,
            w2_relative_residual: self.relative_residual(&pbar_w2, &g2)?,
            w2_solvability,
            crosscheck,
        };
        let result = ExpansionResult {
            w0: self.w0.clone(),
            w1,
            w2,
            alpha2,
            numerator_terms: terms.numerator_terms,
            denominator_terms: terms.denominator_terms,
            a: self.assemble_a()?,
            identity_residual: self.verify_first_order_identity()?,
            c2: crosscheck.c2,
        };
        Ok((result, diagnostics))
    }
}

/// Build everything on `grid` and run the expansion.
pub fn compute_expansion(
    grid: &Arc<Grid>,
    options: GalerkinOptions,
) -> Result<(ExpansionResult, ExpansionDiagnostics)> {
    ExpansionContext::new(grid, options)?.run()
}

/// `Q^2 q_1 - q_1 + 3 Q^2 q_2 - k q_2`
fn reduced_density(x: f64, k: f64) -> f64 {
    let (lead, first, second) = (q3_sq(x), q1(x), q2(x));
    lead * first - first + 3.0 * lead * second - k * second
}

/// `c_2 = (1/2) integral (Q^2 q_1 - q_1 + 3 Q^2 q_2 - 4 q_2)`.
pub fn c2_coefficient(grid: &Grid) -> f64 {
    0.5 * grid.integrate(|x| reduced_density(x, 4.0))
}

/// `<w_0, K_02 w_0> + (1/4) <w_0, K_00 K_{-12} w_0>` reduced to single integrals.
pub fn combined_inner_product_single(grid: &Grid) -> f64 {
    let c2 = c2_coefficient(grid);
    let first = grid.integrate(|x| q3_sq(x) * (reduced_density(x, 4.0) - 0.5 * c2 * q3_sq(x)));
    let second = grid.integrate(|x| q3_sq(x) * (reduced_density(x, 2.0) - 0.25 * c2 * q3_sq(x)));
    -first - second
}

/// `h(x) = -(1/2) integral |x - y| (4 Q^2 - 3 Q^4)(y) dy` at every node; equals `-Q^2`.
pub fn h_profile(grid: &Grid) -> Vec<f64> {
    let density: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&y| 4.0 * q3_sq(y) - 3.0 * q3_sq(y).powi(2))
        .collect();
    ScalarKernel::Abs(-0.5).integrate_against(grid, &density)
}

/// `(1/(2 sqrt2)) integral exp(-sqrt2 |x - y|) (2 Q^2 - 3 Q^4)(y) dy` at every
/// node; equals the second resonance component `-Q^2`.
pub fn second_component_profile(grid: &Grid) -> Vec<f64> {
    let density: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&y| 2.0 * q3_sq(y) - 3.0 * q3_sq(y).powi(2))
        .collect();
    ScalarKernel::Exp {
        scale: 1.0 / (2.0 * std::f64::consts::SQRT_2),
        rate: std::f64::consts::SQRT_2,
    }
    .integrate_against(grid, &density)
}

/// Truncation order of `w_0 + eps w_1 + eps^2 w_2` used in a residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExpansionOrder {
    Zeroth,
    First,
    Second,
}

/// Norm of `(K_{alpha,eps} + 1) w` and its split along `v` and `v^perp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub eps: f64,
    pub alpha: f64,
    pub total: f64,
    pub along_v: f64,
    pub complement: f64,
}

/// `(K_{alpha,eps} + 1)(w_0 + eps w_1 + ...)` with `alpha = eps^2 alpha_2`,
/// truncated at `order`.
pub fn residual(eps: f64, result: &ExpansionResult, order: ExpansionOrder) -> Result<Residual> {
    if eps == 0.0 || !eps.is_finite() || eps.abs() > 0.4 {
        return Err(Error::param("eps", eps, "residual needs 0 < |eps| <= 0.4"));
    }
    let alpha = eps * eps * result.alpha2;
    if !(alpha >= ALPHA_FLOOR) {
        return Err(Error::param(
            "eps",
            eps,
            "alpha = eps^2 alpha_2 falls below the full-resolvent floor",
        ));
    }
    let grid = result.w0.grid();
    let mut w = result.w0.clone();
    if order >= ExpansionOrder::First {
        w = w.add_scaled(eps, &result.w1)?;
    }
    if order >= ExpansionOrder::Second {
        w = w.add_scaled(eps * eps, &result.w2)?;
    }
    let op = assemble_full_k(alpha, 3.0 + eps, grid)?;
    let r = apply(&op, &w)?.add(&w)?;
    let p = Projector::onto(build_v(grid))?;
    Ok(Residual {
        eps,
        alpha,
        total: r.norm(),
        along_v: p.project(&r)?.norm(),
        complement: p.complement(&r)?.norm(),
    })
}

/// `|(K_{alpha,eps} + 1)(w_0 + eps w_1 + eps^2 w_2)|` with `alpha = eps^2 alpha_2`.
pub fn residual_norm(eps: f64, result: &ExpansionResult) -> Result<f64> {
    Ok(residual(eps, result, ExpansionOrder::Second)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, project_p, Rule};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn default_grid() -> Arc<Grid> {
        make_grid(40.0, 2001, Rule::Trapezoid).unwrap()
    }

    fn context() -> &'static ExpansionContext {
        static CTX: OnceLock<ExpansionContext> = OnceLock::new();
        CTX.get_or_init(|| ExpansionContext::new(&default_grid(), GalerkinOptions::default()).unwrap())
    }

    fn run() -> &'static (ExpansionResult, ExpansionDiagnostics) {
        static RUN: OnceLock<(ExpansionResult, ExpansionDiagnostics)> = OnceLock::new();
        RUN.get_or_init(|| context().run().unwrap())
    }

    #[test]
    fn w0_is_orthogonal_to_v_and_in_kernel() {
        let ctx = context();
        assert!(inner(ctx.w0(), ctx.v()).unwrap().abs() < 1e-12);
        let image = ctx.complement_operator(ctx.w0()).unwrap();
        assert!(image.norm() < 1e-8);
        // (K_00 + 1) w_0 = 2 v
        let lhs = ctx.operators().k00_plus_one(ctx.w0()).unwrap();
        assert!(lhs.sub(&ctx.v().scaled(2.0)).unwrap().norm() < 1e-8);
    }

    #[test]
    fn w0_decays_like_q() {
        let grid = default_grid();
        let w0 = build_w0(&grid);
        let last = grid.len() - 1;
        let q_edge = crate::soliton::q3(grid.nodes()[last]);
        // u_0 -> (2, 0) so w_0 -> |V_0|^{1/2} (2, 0) = Q (sqrt3 + 1, sqrt3 - 1)
        let [a, b] = w0.at(last);
        assert_abs_diff_eq!(a / q_edge, 3f64.sqrt() + 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b / q_edge, 3f64.sqrt() - 1.0, epsilon = 1e-9);
    }

    #[test]
    fn norm_of_w0() {
        // |w_0|^2 = <u_0, |V_0| u_0> = 96/5
        let w0 = build_w0(&default_grid());
        assert_abs_diff_eq!(w0.norm().powi(2), 19.2, epsilon = 1e-10);
    }

    #[test]
    fn basis_is_orthogonal_to_v_and_w0() {
        let ctx = context();
        let basis = ctx.system().basis();
        for phi in basis.functions() {
            assert!(inner(phi, ctx.v()).unwrap().abs() <= 1e-10 * phi.norm());
            assert!(inner(phi, ctx.w0()).unwrap().abs() <= 1e-10 * phi.norm());
        }
        assert!(basis.gram_condition <= 1e8);
        // pruning removes directions made redundant by the envelope
        assert!(basis.len() < basis.raw_count);
        assert_eq!(basis.raw_count, 2 * (2 * 96 + 1));
    }

    #[test]
    fn basis_rejects_too_few_modes() {
        let grid = make_grid(20.0, 401, Rule::Trapezoid).unwrap();
        let w0 = build_w0(&grid);
        assert!(build_galerkin_basis(&grid, &w0, GalerkinOptions::with_modes(4)).is_err());
    }

    #[test]
    fn complement_inverse_round_trip() {
        let ctx = context();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = ctx.system().basis().functions();
        for _ in 0..3 {
            // f in the span of the basis, hence orthogonal to v and w_0
            let mut f = GridFunction::zeros(ctx.grid());
            for phi in basis {
                f = f.add_scaled(rng.gen_range(-1.0..1.0), phi).unwrap();
            }
            let g = ctx.complement_operator(&f).unwrap();
            let x = ctx.invert_on_complement(&g).unwrap();
            let back = ctx.complement_operator(&x).unwrap();
            assert!(back.sub(&g).unwrap().norm() <= 1e-6 * g.norm());
        }
        let zero = GridFunction::zeros(ctx.grid());
        assert_eq!(ctx.invert_on_complement(&zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn complement_inverse_rejects_non_orthogonal_rhs() {
        let ctx = context();
        assert!(matches!(
            ctx.invert_on_complement(ctx.v()),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            ctx.invert_on_complement(ctx.w0()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn first_order_identity_cancels_between_summands() {
        let ctx = context();
        let (a, b) = ctx.first_order_summands().unwrap();
        assert!((a + b).abs() < 1e-6);
        assert!(a.abs() > 1.0 && b.abs() > 1.0);
    }

    #[test]
    fn a_matrix() {
        let a = context().assemble_a().unwrap();
        let expect = [[0.0, 16.0], [16.0, -32.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(a[i][j], expect[i][j], epsilon = 1e-6);
            }
        }
        assert!((a[0][1] - a[1][0]).abs() < 1e-8);
    }

    #[test]
    fn alpha2_and_its_terms() {
        let (result, _) = run();
        assert_abs_diff_eq!(result.denominator_terms[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(result.denominator_terms[1], 8.0, epsilon = 1e-6);
        assert!((result.alpha2 - 2.53 / 8.0).abs() <= 0.02 * 2.53 / 8.0);
        assert!(result.alpha2 > 0.25);
        let num: f64 = result.numerator_terms.iter().sum();
        let den: f64 = result.denominator_terms.iter().sum();
        assert_abs_diff_eq!(result.alpha2, num / den, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_schmidt_relations() {
        let ctx = context();
        let (result, diag) = run();
        let ops = ctx.operators();
        let (w0, w1, w2) = (&result.w0, &result.w1, &result.w2);
        let a2 = result.alpha2;
        let ap = |op: &KernelOperator, f: &GridFunction| apply(op, f).unwrap();
        let scale = w0.norm();

        // (Pw0) K_{-10} w_0 = 0
        assert!(ap(&ops.km10, w0).norm() < 1e-10 * scale);
        // (Pw1) K_{-11} w_0 + K_{-10} w_1 = 0
        let pw1 = ap(&ops.km11, w0).add(&ap(&ops.km10, w1)).unwrap();
        assert!(pw1.norm() < 1e-8 * scale, "{}", pw1.norm());
        // (Pw2)
        let pw2 = ap(&ops.km10, w2)
            .add(&ap(&ops.km11, w1))
            .unwrap()
            .add(&ap(&ops.km12, w0))
            .unwrap()
            .add(&ops.k00_plus_one(w0).unwrap().scaled(a2))
            .unwrap();
        assert!(pw2.norm() < 1e-8 * scale, "{}", pw2.norm());

        // (O1) and (O2), within the Galerkin residual
        let p = Projector::onto(build_v(ctx.grid())).unwrap();
        let o1 = p
            .complement(&ops.k00_plus_one(w1).unwrap().add(&ap(&ops.k01, w0)).unwrap())
            .unwrap();
        let g1 = ctx.w1_rhs().unwrap();
        assert!(o1.norm() <= 1e-3 * g1.norm(), "O1 {}", o1.norm() / g1.norm());
        let o2 = p
            .complement(
                &ops.k00_plus_one(w2)
                    .unwrap()
                    .add(&ap(&ops.k01, w1))
                    .unwrap()
                    .add(&ap(&ops.k02, w0))
                    .unwrap()
                    .add(&ap(&ops.k10, w0).scaled(a2))
                    .unwrap(),
            )
            .unwrap();
        let g2 = ctx.w2_rhs(w1, a2).unwrap();
        assert!(o2.norm() <= 1e-2 * g2.norm(), "O2 {}", o2.norm() / g2.norm());

        // complement parts are orthogonal to v and w_0
        let pbar_w1 = p.complement(w1).unwrap();
        assert!(inner(&pbar_w1, w0).unwrap().abs() < 1e-8);
        assert!(inner(&pbar_w1, ctx.v()).unwrap().abs() < 1e-10);
        assert!(diag.w2_solvability.abs() < 1e-6);
        let pv = project_p(w1).unwrap();
        assert!(pv.sub(&ap(&ops.km11, w0).scaled(0.25)).unwrap().norm() < 1e-10);
    }

    #[test]
    fn single_integral_route() {
        let ctx = context();
        let check = ctx.single_integral_crosscheck().unwrap();
        assert!((check.single_integral + 2.9369).abs() <= 1e-3 * 2.9369);
        assert!(check.relative_disagreement() < 1e-6);
        let grid = ctx.grid();
        let h = h_profile(grid);
        let mid = grid.len() / 2;
        assert_abs_diff_eq!(h[mid], -2.0, epsilon = 1e-8);
        let second = second_component_profile(grid);
        for i in (0..grid.len()).step_by(97) {
            let x = grid.nodes()[i];
            assert_abs_diff_eq!(h[i], -q3_sq(x), epsilon = 1e-8);
            assert_abs_diff_eq!(second[i], -q3_sq(x), epsilon = 1e-8);
        }
    }

    #[test]
    fn residual_rejects_degenerate_eps() {
        let (result, _) = run();
        assert!(residual_norm(0.0, result).is_err());
        assert!(residual_norm(0.5, result).is_err());
        // alpha = 0.316 * 1e-4 is below the floor
        assert!(residual_norm(0.01, result).is_err());
    }

    #[test]
    fn residual_improves_with_each_order() {
        let (result, _) = run();
        let r0 = residual(0.3, result, ExpansionOrder::Zeroth).unwrap();
        let r1 = residual(0.3, result, ExpansionOrder::First).unwrap();
        let r2 = residual(0.3, result, ExpansionOrder::Second).unwrap();
        assert!(r2.total < r1.total && r1.total < r0.total);
    }

    #[test]
    fn residual_scaling_by_direction() {
        // Along v the truncated expansion leaves eps^3/alpha = O(eps); in the
        // complement it leaves O(eps^3).
        let (result, _) = run();
        let eps = [0.4, 0.3, 0.2, 0.14, 0.1];
        let rows: Vec<Residual> = eps
            .iter()
            .map(|&e| residual(e, result, ExpansionOrder::Second).unwrap())
            .collect();
        let comp: Vec<f64> = rows.iter().map(|r| r.complement).collect();
        let along: Vec<f64> = rows.iter().map(|r| r.along_v).collect();
        let comp_fit = crate::fit::fit_power_law(&eps, &comp).unwrap();
        let along_fit = crate::fit::fit_power_law(&eps, &along).unwrap();
        assert!(comp_fit.slope > 2.8, "complement slope {}", comp_fit.slope);
        assert!((along_fit.slope - 1.0).abs() < 0.2, "along-v slope {}", along_fit.slope);
        assert!(rows.windows(2).all(|w| w[1].total < w[0].total));
    }

    #[test]
    fn relation_between_k00_forms() {
        // <w_0, K_00 v> = <2v - w_0, v> = 16 uses self-adjointness
        let ctx = context();
        let lhs = inner(ctx.w0(), &apply(&ctx.operators().k00, ctx.v()).unwrap()).unwrap();
        let rhs = inner(&apply(&ctx.operators().k00, ctx.w0()).unwrap(), ctx.v()).unwrap();
        assert!((lhs - rhs).abs() < 1e-8);
    }
}
