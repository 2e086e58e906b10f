//! Universal kriging at a target point and epoch, and regular time series
//! built from it.
//!
//! Every prediction uses a local space-time neighbourhood of observations.
//! Trend columns without support in the neighbourhood are dropped, linearly
//! dependent columns are reduced to an independent set, and the solved
//! weights are checked against the full unbiasedness constraint before a
//! value is returned.

mod baseline;
mod series;
mod solve;

use std::collections::HashMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::{observation_error, process_cov, CovarianceParams};
use crate::ingest::Observation;
use crate::network::{NetworkLocation, RiverNetwork};
use crate::trend::{Anchored, TrendFunctions};

pub use baseline::{ok_baseline_series, virtual_stations, vs_series, VirtualStation};
pub use series::{
    epochs, interpolate_series, read_series_csv, write_series_csv, SeriesFlag, SeriesPoint, SERIES_HEADER,
};
pub use solve::{gls_solve, solve_weights, Factorization, GlsTrend, WeightSolution};

/// Largest tolerated violation of `F' lambda = f`.
pub const UNBIASEDNESS_TOL: f64 = 1e-8;
/// Relative pivot threshold for independent trend columns.
pub const PIVOT_TOL: f64 = 1e-10;
/// Smallest pivot, relative to the best available, at which a column that is
/// non-zero at the target is still preferred.
const PREFERRED_PIVOT_RATIO: f64 = 1e-3;
/// Pivot threshold when columns can be held at fixed coefficients.
pub const ANCHORED_PIVOT_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KrigingError {
    #[error("matrix dimensions do not agree")]
    Dimension,
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("trend design matrix is rank deficient")]
    RankDeficient,
    #[error("normal matrix is singular (dropped columns {dropped:?})")]
    SingularNormal { dropped: Vec<usize> },
    #[error("no observations in the neighbourhood")]
    EmptyNeighborhood,
    #[error("trend at the target is not estimable from the neighbourhood")]
    TrendNotEstimable,
    #[error("prediction variance {0} is negative")]
    NegativeVariance(f64),
}

impl KrigingError {
    /// Errors that mean "no data" for a target rather than a broken input.
    pub fn is_nodata(&self) -> bool {
        !matches!(self, KrigingError::Dimension)
    }
}

/// Local neighbourhood used for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub max_river_km: f64,
    pub max_basin_km: f64,
    pub max_lag_days: f64,
    /// Observations kept, highest process covariance with the target first.
    pub max_count: usize,
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self {
            max_river_km: 200.0,
            max_basin_km: 200.0,
            max_lag_days: 45.0,
            max_count: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionFlag {
    Ok,
    ClippedVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigingPrediction {
    pub height_m: f64,
    pub variance_m2: f64,
    /// One weight per used observation.
    pub weights: Vec<f64>,
    /// Indices of the used observations in the input slice, ascending.
    pub used: Vec<usize>,
    pub condition: f64,
    pub unbiasedness_residual: f64,
    /// Trend columns without support that were left out of the system.
    pub dropped_columns: Vec<usize>,
    /// Columns held at their fixed coefficient.
    pub fixed_columns: Vec<usize>,
    pub flag: PredictionFlag,
}

impl KrigingPrediction {
    pub fn n(&self) -> usize {
        self.used.len()
    }

    pub fn sigma_m(&self) -> f64 {
        self.variance_m2.sqrt()
    }
}

/// Observation indices sorted by epoch, for window queries.
#[derive(Debug, Clone)]
pub struct TimeIndex {
    order: Vec<usize>,
    t: Vec<f64>,
}

impl TimeIndex {
    pub fn new(observations: &[Observation]) -> Self {
        let mut order: Vec<usize> = (0..observations.len()).collect();
        order.sort_by(|&a, &b| observations[a].date.cmp(&observations[b].date).then(a.cmp(&b)));
        let t = order.iter().map(|&i| observations[i].t_days()).collect();
        Self { order, t }
    }

    /// Indices with `|t - t0| <= lag`, in time order.
    pub fn window(&self, t0: f64, lag: f64) -> &[usize] {
        let lo = self.t.partition_point(|&t| t < t0 - lag);
        let hi = self.t.partition_point(|&t| t <= t0 + lag);
        &self.order[lo..hi]
    }
}

/// Neighbourhood of `(s0, t0)` as ascending observation indices.
pub fn select_neighborhood(
    net: &RiverNetwork,
    params: &CovarianceParams,
    observations: &[Observation],
    index: &TimeIndex,
    s0: NetworkLocation,
    t0: f64,
    nbhd: &NeighborhoodSpec,
) -> Vec<usize> {
    let mut cand: Vec<(usize, f64)> = index
        .window(t0, nbhd.max_lag_days)
        .iter()
        .filter_map(|&i| {
            let s = observations[i].location;
            let near = match net.river_distance(s0, s).km() {
                Some(d) if d <= nbhd.max_river_km => true,
                _ => net.basin_distance(s0, s) <= nbhd.max_basin_km,
            };
            near.then(|| (i, process_cov(net, (s0, t0), (s, observations[i].t_days()), params)))
        })
        .collect();
    if cand.len() > nbhd.max_count {
        cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        cand.truncate(nbhd.max_count);
    }
    let mut used: Vec<usize> = cand.into_iter().map(|c| c.0).collect();
    used.sort_unstable();
    used
}

/// Greedy pivoted Cholesky on `F'F`: indices of a maximal set of linearly
/// independent columns, ascending. Columns in `first` are pivoted first
/// while their pivot is within `PREFERRED_PIVOT_RATIO` of the best one.
/// Pivots below `rel_tol` times the largest diagonal stop the selection.
fn independent_columns(f_obs: &DMatrix<f64>, first: &[usize], rel_tol: f64) -> Vec<usize> {
    let g = f_obs.tr_mul(f_obs);
    let p = g.ncols();
    let mut d: Vec<f64> = (0..p).map(|j| g[(j, j)]).collect();
    let tol = rel_tol * d.iter().cloned().fold(0.0, f64::max);
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut chosen: Vec<usize> = Vec::new();
    let mut done = vec![false; p];
    for k in 0..p.min(f_obs.nrows()) {
        let best = |pool: &mut dyn Iterator<Item = usize>, d: &[f64], tol: f64| {
            pool.filter(|&j| d[j] > tol)
                .max_by(|&a, &b| d[a].total_cmp(&d[b]).then(b.cmp(&a)))
        };
        let Some(top) = best(&mut (0..p).filter(|&j| !done[j]), &d, tol) else {
            break;
        };
        let j = best(
            &mut first.iter().copied().filter(|&j| !done[j]),
            &d,
            tol.max(PREFERRED_PIVOT_RATIO * d[top]),
        )
        .unwrap_or(top);
        let pivot = d[j].sqrt();
        l[(j, k)] = pivot;
        done[j] = true;
        for i in (0..p).filter(|&i| !done[i]) {
            let mut v = g[(i, j)];
            for m in 0..k {
                v -= l[(i, m)] * l[(j, m)];
            }
            l[(i, k)] = v / pivot;
            d[i] -= l[(i, k)] * l[(i, k)];
        }
        chosen.push(j);
    }
    chosen.sort_unstable();
    chosen
}

/// Groups positions of `used` that share one space-time point, each with
/// its share of the group. Only noise-free observations are grouped; the
/// share is the limit of inverse-error weighting as the nugget goes to 0.
fn coincident_groups(
    net: &RiverNetwork,
    params: &CovarianceParams,
    observations: &[Observation],
    used: &[usize],
) -> Vec<Vec<(usize, f64)>> {
    if params.nugget > 0.0 {
        return (0..used.len()).map(|k| vec![(k, 1.0)]).collect();
    }
    let unit = CovarianceParams { nugget: 1.0, ..*params };
    let mut index: HashMap<(usize, u64, u64), usize> = HashMap::new();
    let mut groups: Vec<Vec<(usize, f64)>> = Vec::new();
    for (k, &i) in used.iter().enumerate() {
        let o = &observations[i];
        let key = (o.location.edge, o.location.offset_km.to_bits(), o.t_days().to_bits());
        let g = *index.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push((k, 1.0 / observation_error(net, o, &unit)));
    }
    for g in &mut groups {
        let total: f64 = g.iter().map(|e| e.1).sum();
        g.iter_mut().for_each(|e| e.1 /= total);
    }
    groups
}

fn spread_weights(groups: &[Vec<(usize, f64)>], lambda: &DVector<f64>, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for (g, &l) in groups.iter().zip(lambda.iter()) {
        for &(k, share) in g {
            w[k] = l * share;
        }
    }
    w
}

/// Kriging on an explicit observation subset.
///
/// Trend columns without support in the neighbourhood are dropped, and a
/// maximal independent subset of the rest is kept, preferring columns that
/// are non-zero at the target. Columns left out are either held at the
/// trend's fixed coefficient (see [`Anchored`](crate::trend::Anchored)) or,
/// without one, must not affect the target, else `TrendNotEstimable`.
pub fn predict_with<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &T,
    params: &CovarianceParams,
    observations: &[Observation],
    used: Vec<usize>,
    s0: NetworkLocation,
    t0: f64,
) -> Result<KrigingPrediction, KrigingError> {
    if used.is_empty() {
        return Err(KrigingError::EmptyNeighborhood);
    }
    let groups = coincident_groups(net, params, observations, &used);
    let n = groups.len();
    let pts: Vec<(NetworkLocation, f64)> = groups
        .iter()
        .map(|g| {
            let o = &observations[used[g[0].0]];
            (o.location, o.t_days())
        })
        .collect();

    // trend columns supported by the neighbourhood, in global order
    let rows: Vec<Vec<(usize, f64)>> = pts.iter().map(|&(s, _)| trend.eval_sparse(net, s)).collect();
    let target: Vec<(usize, f64)> = trend.eval_sparse(net, s0);
    let mut support: Vec<usize> = rows.iter().flatten().filter(|e| e.1 != 0.0).map(|e| e.0).collect();
    support.sort_unstable();
    support.dedup();
    // known part of the trend at the target
    let mut known_target = 0.0;
    for &(j, v) in &target {
        if v != 0.0 && support.binary_search(&j).is_err() {
            known_target += v * trend.fixed_coefficient(j).ok_or(KrigingError::TrendNotEstimable)?;
        }
    }
    let mut f_full = DMatrix::zeros(n, support.len());
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            if let Ok(k) = support.binary_search(&j) {
                f_full[(i, k)] = v;
            }
        }
    }
    let mut f0_full = DVector::zeros(support.len());
    for &(j, v) in &target {
        if let Ok(k) = support.binary_search(&j) {
            f0_full[k] = v;
        }
    }
    let dropped_columns: Vec<usize> = (0..trend.width())
        .filter(|j| support.binary_search(j).is_err())
        .collect();

    let at_target: Vec<usize> = (0..support.len()).filter(|&k| f0_full[k] != 0.0).collect();
    // with fixed coefficients available, weakly supported columns are
    // better held fixed than estimated
    let anchored = (0..trend.width())
        .next()
        .is_some_and(|j| trend.fixed_coefficient(j).is_some());
    let keep = independent_columns(
        &f_full,
        &at_target,
        if anchored { ANCHORED_PIVOT_TOL } else { PIVOT_TOL },
    );
    let left_out: Vec<usize> = (0..support.len()).filter(|k| keep.binary_search(k).is_err()).collect();
    let fixed: Option<Vec<f64>> = left_out.iter().map(|&k| trend.fixed_coefficient(support[k])).collect();
    let f_obs = f_full.select_columns(&keep);
    let f0 = DVector::from_iterator(keep.len(), keep.iter().map(|&k| f0_full[k]));

    let mut sigma_u = DMatrix::zeros(n, n);
    let sill = params.sill();
    for a in 0..n {
        sigma_u[(a, a)] = sill;
        for b in 0..a {
            let c = process_cov(net, pts[a], pts[b], params);
            sigma_u[(a, b)] = c;
            sigma_u[(b, a)] = c;
        }
    }
    let sigma_alti = DVector::from_iterator(
        n,
        groups
            .iter()
            .map(|g| observation_error(net, &observations[used[g[0].0]], params)),
    );
    let c_u = DVector::from_iterator(n, pts.iter().map(|&x| process_cov(net, (s0, t0), x, params)));

    let sol = solve_weights(&sigma_u, &sigma_alti, &f_obs, &c_u, &f0)?;
    let mut z = DVector::from_iterator(
        n,
        groups
            .iter()
            .map(|g| g.iter().map(|&(k, w)| w * observations[used[k]].height_m).sum()),
    );
    let (residual, fixed_columns) = match fixed {
        Some(beta) if !left_out.is_empty() => {
            for (&k, b) in left_out.iter().zip(&beta) {
                z.axpy(-b, &f_full.column(k), 1.0);
                known_target += b * f0_full[k];
            }
            (
                sol.unbiasedness_residual(&f_obs, &f0),
                left_out.iter().map(|&k| support[k]).collect(),
            )
        }
        _ => (sol.unbiasedness_residual(&f_full, &f0_full), Vec::new()),
    };
    if !(residual <= UNBIASEDNESS_TOL) {
        return Err(KrigingError::TrendNotEstimable);
    }
    let height_m = sol.lambda.dot(&z) + known_target;
    let mut variance = sol.variance(sill, &c_u, &f0);
    let mut flag = PredictionFlag::Ok;
    if variance < 0.0 {
        if variance < -1e-9 * sill.max(1.0) {
            return Err(KrigingError::NegativeVariance(variance));
        }
        variance = 0.0;
        flag = PredictionFlag::ClippedVariance;
    }
    Ok(KrigingPrediction {
        height_m,
        variance_m2: variance,
        weights: spread_weights(&groups, &sol.lambda, used.len()),
        used,
        condition: sol.condition,
        unbiasedness_residual: residual,
        dropped_columns,
        fixed_columns,
        flag,
    })
}

/// Universal-kriging prediction at `(s0, t0)` from the local neighbourhood.
pub fn predict<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &T,
    params: &CovarianceParams,
    observations: &[Observation],
    s0: NetworkLocation,
    t0: NaiveDate,
    nbhd: &NeighborhoodSpec,
) -> Result<KrigingPrediction, KrigingError> {
    let index = TimeIndex::new(observations);
    predict_indexed(
        net,
        trend,
        params,
        observations,
        &index,
        s0,
        crate::day_number(t0),
        nbhd,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn predict_indexed<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &T,
    params: &CovarianceParams,
    observations: &[Observation],
    index: &TimeIndex,
    s0: NetworkLocation,
    t0: f64,
    nbhd: &NeighborhoodSpec,
) -> Result<KrigingPrediction, KrigingError> {
    let used = select_neighborhood(net, params, observations, index, s0, t0, nbhd);
    predict_with(net, trend, params, observations, used, s0, t0)
}

/// Trend coefficients by generalized least squares over all `observations`
/// with `Sigma = Sigma_U + Sigma_alti`.
pub fn gls_trend<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &T,
    observations: &[Observation],
    params: &CovarianceParams,
) -> Result<GlsTrend, KrigingError> {
    let m = crate::covariance::build_matrices(net, observations, params);
    let locs: Vec<NetworkLocation> = observations.iter().map(|o| o.location).collect();
    let (f_obs, _) = crate::trend::design_matrices(
        net,
        trend,
        &locs,
        locs.first().copied().unwrap_or(NetworkLocation {
            edge: 0,
            offset_km: 0.0,
        }),
    );
    let z = DVector::from_iterator(observations.len(), observations.iter().map(|o| o.height_m));
    gls_solve(&f_obs, &z, &m.total())
}

/// Trend coefficients by ordinary least squares, assembled sparsely so it
/// scales to full observation sets.
pub fn ols_trend<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &T,
    observations: &[Observation],
) -> Result<GlsTrend, KrigingError> {
    let p = trend.width();
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    for o in observations {
        let row = trend.eval_sparse(net, o.location);
        for &(i, vi) in &row {
            b[i] += vi * o.height_m;
            for &(j, vj) in &row {
                a[(i, j)] += vi * vj;
            }
        }
    }
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..p).partition(|&j| a[(j, j)] > 0.0);
    let a_kept = a.select_rows(&kept).select_columns(&kept);
    let b_kept = DVector::from_iterator(kept.len(), kept.iter().map(|&j| b[j]));
    let singular = || KrigingError::SingularNormal {
        dropped: dropped.clone(),
    };
    let chol = a_kept.cholesky().ok_or_else(singular)?;
    let d = chol.l_dirty().diagonal();
    let ratio = d.max() / d.min();
    if !(ratio * ratio <= 1e14) {
        return Err(singular());
    }
    let beta_kept = chol.solve(&b_kept);
    let mut beta = DVector::zeros(p);
    for (k, &j) in kept.iter().enumerate() {
        beta[j] = beta_kept[k];
    }
    Ok(GlsTrend { beta, dropped })
}

/// `trend` anchored at its OLS coefficients over all `observations`.
pub fn anchored_trend<'a, T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &'a T,
    observations: &[Observation],
) -> Result<Anchored<'a, T>, KrigingError> {
    Ok(Anchored {
        inner: trend,
        beta: ols_trend(net, trend, observations)?.beta,
    })
}

/// Trend value at a location.
pub fn trend_value<T: TrendFunctions + ?Sized>(
    net: &RiverNetwork,
    trend: &T,
    beta: &DVector<f64>,
    s: NetworkLocation,
) -> f64 {
    trend.eval_sparse(net, s).into_iter().map(|(j, v)| beta[j] * v).sum()
}
