//! Mean water-level trend: one clamped cubic B-spline basis per river over
//! chainage, independent between rivers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkLocation, RiverNetwork};

pub const SPLINE_DEGREE: usize = 3;
pub const DEFAULT_KNOT_SPACING_KM: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum TrendError {
    #[error("knot spacing must be positive, got {0}")]
    Spacing(f64),
}

/// Basis block of one river.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiverBasis {
    pub river_id: String,
    /// Clamped knot vector in chainage (km). Empty for the constant fallback.
    pub knots: Vec<f64>,
    pub count: usize,
    /// Index of the block's first function in the global ordering.
    #[serde(skip)]
    pub first: usize,
}

impl RiverBasis {
    fn is_constant(&self) -> bool {
        self.knots.is_empty()
    }

    /// Index of the first non-zero function and the `degree + 1` values.
    fn eval_local(&self, chainage: f64) -> (usize, [f64; SPLINE_DEGREE + 1]) {
        let mut out = [0.0; SPLINE_DEGREE + 1];
        if self.is_constant() {
            out[0] = 1.0;
            return (0, out);
        }
        let p = SPLINE_DEGREE;
        let u = &self.knots;
        let last_span = u.len() - p - 2;
        let x = chainage.clamp(u[p], u[last_span + 1]);
        // span i with u[i] <= x < u[i+1]; the right end belongs to the last span
        let span = (u.partition_point(|&k| k <= x) - 1).clamp(p, last_span);

        let mut left = [0.0; SPLINE_DEGREE + 1];
        let mut right = [0.0; SPLINE_DEGREE + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        (span - p, out)
    }
}

/// Known trend functions evaluated at network locations.
pub trait TrendFunctions: Sync {
    /// Number of functions.
    fn width(&self) -> usize;
    /// Non-zero functions at a location as `(index, value)` pairs.
    fn eval_sparse(&self, net: &RiverNetwork, s: NetworkLocation) -> Vec<(usize, f64)>;
    /// Known coefficient used when a neighbourhood cannot identify function `j`.
    fn fixed_coefficient(&self, _j: usize) -> Option<f64> {
        None
    }
}

/// Trend functions with global coefficients for the functions a local
/// neighbourhood cannot identify. Identifiable functions stay unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchored<'a, T: ?Sized> {
    pub inner: &'a T,
    pub beta: DVector<f64>,
}

impl<T: TrendFunctions + ?Sized> TrendFunctions for Anchored<'_, T> {
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn eval_sparse(&self, net: &RiverNetwork, s: NetworkLocation) -> Vec<(usize, f64)> {
        self.inner.eval_sparse(net, s)
    }

    fn fixed_coefficient(&self, j: usize) -> Option<f64> {
        self.beta.get(j).copied()
    }
}

/// A single unknown constant mean (ordinary kriging).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantMean;

impl TrendFunctions for ConstantMean {
    fn width(&self) -> usize {
        1
    }

    fn eval_sparse(&self, _net: &RiverNetwork, _s: NetworkLocation) -> Vec<(usize, f64)> {
        vec![(0, 1.0)]
    }
}

/// Global trend basis over all rivers, ordered by river id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendBasis {
    rivers: Vec<RiverBasis>,
    total: usize,
}

/// Exportable summary of one river's block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub river_id: String,
    pub knots: Vec<f64>,
    pub count: usize,
}

/// Builds a clamped uniform cubic basis over each river's chainage range.
/// Rivers shorter than one knot spacing get a single constant function.
pub fn build_basis(net: &RiverNetwork, knot_spacing_km: f64) -> Result<TrendBasis, TrendError> {
    if !(knot_spacing_km.is_finite() && knot_spacing_km > 0.0) {
        return Err(TrendError::Spacing(knot_spacing_km));
    }
    let mut rivers = Vec::new();
    let mut first = 0;
    for river_id in net.rivers().keys() {
        let (lo, hi) = net.river_chainage_range(river_id).expect("river has edges");
        let length = hi - lo;
        let basis = if length < knot_spacing_km {
            RiverBasis {
                river_id: river_id.to_string(),
                knots: Vec::new(),
                count: 1,
                first,
            }
        } else {
            let spans = ((length / knot_spacing_km) - 1e-9).ceil().max(1.0) as usize;
            let mut knots = vec![lo; SPLINE_DEGREE];
            knots.extend((0..=spans).map(|k| {
                if k == spans {
                    hi
                } else {
                    lo + length * k as f64 / spans as f64
                }
            }));
            knots.extend(std::iter::repeat_n(hi, SPLINE_DEGREE));
            RiverBasis {
                river_id: river_id.to_string(),
                count: spans + SPLINE_DEGREE,
                knots,
                first,
            }
        };
        first += basis.count;
        rivers.push(basis);
    }
    Ok(TrendBasis { rivers, total: first })
}

impl TrendBasis {
    /// Total number of basis functions.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn rivers(&self) -> &[RiverBasis] {
        &self.rivers
    }

    fn block(&self, river_id: &str) -> &RiverBasis {
        let i = self
            .rivers
            .binary_search_by(|r| r.river_id.as_str().cmp(river_id))
            .expect("basis built from this network");
        &self.rivers[i]
    }

    /// Non-zero functions at a location as `(global index, value)` pairs.
    pub fn eval_sparse(&self, net: &RiverNetwork, s: NetworkLocation) -> Vec<(usize, f64)> {
        let block = self.block(net.river_id(s));
        let (start, vals) = block.eval_local(net.chainage(s));
        let width = if block.is_constant() { 1 } else { SPLINE_DEGREE + 1 };
        (0..width).map(|k| (block.first + start + k, vals[k])).collect()
    }

    /// All basis values at a location; non-zero only within the location's river.
    pub fn eval(&self, net: &RiverNetwork, s: NetworkLocation) -> Vec<f64> {
        let mut out = vec![0.0; self.total];
        for (j, v) in self.eval_sparse(net, s) {
            out[j] = v;
        }
        out
    }

    pub fn summary(&self) -> Vec<BasisSummary> {
        self.rivers
            .iter()
            .map(|r| BasisSummary {
                river_id: r.river_id.clone(),
                knots: r.knots.clone(),
                count: r.count,
            })
            .collect()
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("plain data serializes")
    }
}

impl TrendFunctions for TrendBasis {
    fn width(&self) -> usize {
        self.total
    }

    fn eval_sparse(&self, net: &RiverNetwork, s: NetworkLocation) -> Vec<(usize, f64)> {
        TrendBasis::eval_sparse(self, net, s)
    }
}

/// Design matrix `F` (one row per observation location, `F[i][j] = f_j(s_i)`)
/// and target vector `f` (`f[j] = f_j(s_0)`).
pub fn design_matrices<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    basis: &T,
    locations: &[NetworkLocation],
    target: NetworkLocation,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut f_obs = DMatrix::zeros(locations.len(), basis.width());
    for (i, &s) in locations.iter().enumerate() {
        for (j, v) in basis.eval_sparse(net, s) {
            f_obs[(i, j)] = v;
        }
    }
    let mut f = DVector::zeros(basis.width());
    for (j, v) in basis.eval_sparse(net, target) {
        f[j] = v;
    }
    (f_obs, f)
}
