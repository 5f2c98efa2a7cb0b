//! Truncated-domain grids, quadrature, and two-component grid functions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::soliton::eval_weight_half;

/// Quadrature rule used to build a [`Grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Uniform nodes, trapezoid weights. Operator assembly adds endpoint
    /// corrections at the kernel kinks on this rule, which makes it the
    /// most accurate choice for the operators in this crate.
    Trapezoid,
    /// Composite five-point Gauss-Legendre on equal panels.
    GaussLegendreComposite,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Trapezoid => f.write_str("trapezoid"),
            Rule::GaussLegendreComposite => f.write_str("gauss_legendre_composite"),
        }
    }
}

/// Five-point Gauss-Legendre rule on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

pub const MIN_POINTS: usize = 16;

/// Nodes and weights on `[-L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_length: f64,
    rule: Rule,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node spacing when the nodes are equispaced.
    pub fn spacing(&self) -> Option<f64> {
        match self.rule {
            Rule::Trapezoid => Some(2.0 * self.half_length / (self.len() - 1) as f64),
            Rule::GaussLegendreComposite => None,
        }
    }

    /// `sum_i w_i f(x_i)`
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Quadrature of already-sampled values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let pos = self.nodes.partition_point(|&n| n < x);
        if pos == 0 {
            0
        } else if pos == self.len() {
            self.len() - 1
        } else if (self.nodes[pos] - x).abs() < (x - self.nodes[pos - 1]).abs() {
            pos
        } else {
            pos - 1
        }
    }
}

/// Build a grid on `[-L, L]`.
///
/// The trapezoid rule uses exactly `n_points` nodes. The composite
/// Gauss-Legendre rule uses five-point panels; the panel count is
/// `n_points / 5` rounded to the nearest odd integer so that `x = 0` is a
/// node, and the realized node count is five times that.
pub fn make_grid(half_length: f64, n_points: usize, rule: Rule) -> Result<Arc<Grid>> {
    if !(half_length.is_finite() && half_length > 0.0) {
        return Err(Error::param(
            "half_length",
            half_length,
            "domain half-length must be positive",
        ));
    }
    if n_points < MIN_POINTS {
        return Err(Error::param(
            "n_points",
            n_points as f64,
            "at least 16 grid points are required",
        ));
    }
    let (nodes, weights) = match rule {
        Rule::Trapezoid => {
            let h = 2.0 * half_length / (n_points - 1) as f64;
            let mid = (n_points - 1) as f64 / 2.0;
            let nodes: Vec<f64> = (0..n_points).map(|i| (i as f64 - mid) * h).collect();
            let mut weights = vec![h; n_points];
            weights[0] = 0.5 * h;
            weights[n_points - 1] = 0.5 * h;
            (nodes, weights)
        }
        Rule::GaussLegendreComposite => {
            let mut panels = ((n_points as f64) / 5.0).round().max(1.0) as usize;
            if panels % 2 == 0 {
                panels += 1;
            }
            let width = 2.0 * half_length / panels as f64;
            let mut nodes = Vec::with_capacity(5 * panels);
            let mut weights = Vec::with_capacity(5 * panels);
            for k in 0..panels {
                let centre = -half_length + (k as f64 + 0.5) * width;
                for (t, w) in GL5_NODES.iter().zip(&GL5_WEIGHTS) {
                    nodes.push(centre + 0.5 * width * t);
                    weights.push(0.5 * width * w);
                }
            }
            // The middle node of the middle panel should be exactly zero.
            let mid = nodes.len() / 2;
            nodes[mid] = 0.0;
            (nodes, weights)
        }
    };
    Ok(Arc::new(Grid {
        half_length,
        rule,
        nodes,
        weights,
    }))
}

/// A two-component real function sampled on a grid.
///
/// Values are stored component-major: all of component 1, then all of
/// component 2.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridFunction {
            grid: Arc::clone(grid),
            values: vec![0.0; 2 * grid.len()],
        }
    }

    /// Wrap a component-major vector of length `2 * grid.len()`.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * grid.len() {
            return Err(Error::Precondition(format!(
                "expected {} values, got {}",
                2 * grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("grid function has non-finite values".into()));
        }
        Ok(GridFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn from_components(grid: &Arc<Grid>, first: &[f64], second: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(2 * grid.len());
        values.extend_from_slice(first);
        values.extend_from_slice(second);
        Self::from_values(grid, values)
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> [f64; 2]) -> Self {
        let n = grid.len();
        let mut values = vec![0.0; 2 * n];
        for (i, &x) in grid.nodes().iter().enumerate() {
            let [a, b] = f(x);
            values[i] = a;
            values[n + i] = b;
        }
        GridFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Component `0` or `1`.
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn at(&self, i: usize) -> [f64; 2] {
        let n = self.grid.len();
        [self.values[i], self.values[n + i]]
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        same_grid(&self.grid, &other.grid)
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &GridFunction) -> Result<GridFunction> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(GridFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.add_scaled(-1.0, other)
    }

    /// Quadrature `L^2` norm.
    pub fn norm(&self) -> f64 {
        inner_unchecked(self, self).max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Serialize for GridFunction {
    /// `{"nodes": [...], "values": [[component 1], [component 2]]}`
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("GridFunction", 2)?;
        st.serialize_field("nodes", self.grid.nodes())?;
        st.serialize_field("values", &[self.component(0), self.component(1)])?;
        st.end()
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn inner_unchecked(f: &GridFunction, g: &GridFunction) -> f64 {
    let n = f.grid.len();
    let w = f.grid.weights();
    let (f1, f2) = f.values.split_at(n);
    let (g1, g2) = g.values.split_at(n);
    (0..n).map(|i| w[i] * (f1[i] * g1[i] + f2[i] * g2[i])).sum()
}

/// `<f, g> = sum_i w_i (f_1 g_1 + f_2 g_2)(x_i)`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    Ok(inner_unchecked(f, g))
}

/// `v = |V_0|^{1/2} (1, 0)^T`, the direction of the projection `P`.
pub fn build_v(grid: &Arc<Grid>) -> GridFunction {
    GridFunction::from_fn(grid, |x| {
        let w = eval_weight_half(x);
        [w.get(0, 0), w.get(1, 0)]
    })
}

/// Orthogonal rank-one projection `f -> <d, f> d / |d|^2`.
#[derive(Debug, Clone)]
pub struct Projector {
    direction: GridFunction,
    norm_sq: f64,
}

impl Projector {
    pub fn onto(direction: GridFunction) -> Result<Self> {
        let norm_sq = inner_unchecked(&direction, &direction);
        if !(norm_sq > 0.0) {
            return Err(Error::Precondition("projection direction is zero".into()));
        }
        Ok(Projector { direction, norm_sq })
    }

    pub fn direction(&self) -> &GridFunction {
        &self.direction
    }

    pub fn coefficient(&self, f: &GridFunction) -> Result<f64> {
        Ok(inner(&self.direction, f)? / self.norm_sq)
    }

    pub fn project(&self, f: &GridFunction) -> Result<GridFunction> {
        Ok(self.direction.scaled(self.coefficient(f)?))
    }

    /// `(1 - Pi) f`
    pub fn complement(&self, f: &GridFunction) -> Result<GridFunction> {
        f.add_scaled(-self.coefficient(f)?, &self.direction)
    }
}

/// `P f = <v, f> v / |v|^2`.
pub fn project_p(f: &GridFunction) -> Result<GridFunction> {
    Projector::onto(build_v(f.grid()))?.project(f)
}

/// `(1 - P) f`.
pub fn project_pbar(f: &GridFunction) -> Result<GridFunction> {
    Projector::onto(build_v(f.grid()))?.complement(f)
}

/// `P_0 f = <w_0, f> w_0 / |w_0|^2`.
pub fn project_p0(f: &GridFunction, w0: &GridFunction) -> Result<GridFunction> {
    Projector::onto(w0.clone())?.project(f)
}

/// `(1 - P_0) f`.
pub fn project_p0bar(f: &GridFunction, w0: &GridFunction) -> Result<GridFunction> {
    Projector::onto(w0.clone())?.complement(f)
}
