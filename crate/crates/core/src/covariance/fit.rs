//! Weighted least-squares fit of the covariance model to binned empirical
//! covariances.
//!
//! The two variances enter linearly, so for fixed ranges and `tau` they are
//! solved in closed form (clipped at zero); the three nonlinear parameters
//! are searched in log space with a bounded Nelder-Mead simplex.

use super::empirical::{EmpiricalCovariance, PairKind};
use super::{CovarianceError, CovarianceParams};

pub const MIN_BINS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Simplex diameter in log-parameter space at which the search stops.
    pub log_tolerance: f64,
    /// Ranges and `tau` are bounded to `[lower_factor, upper_factor]` times
    /// the largest lag edge of their axis.
    pub lower_factor: f64,
    pub upper_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            log_tolerance: 1e-10,
            lower_factor: 1e-3,
            upper_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFit {
    pub params: CovarianceParams,
    /// Pair-count weighted residual sum of squares.
    pub weighted_rss: f64,
    pub iterations: usize,
    pub bins_used: usize,
}

struct Problem<'a> {
    emp: &'a EmpiricalCovariance,
}

impl Problem<'_> {
    /// Best non-negative variances for fixed nonlinear parameters and the
    /// resulting weighted RSS.
    fn profile(&self, rho_river: f64, rho_basin: f64, tau: f64) -> ((f64, f64), f64) {
        let rows: Vec<(f64, f64, f64, f64)> = self
            .emp
            .non_empty()
            .map(|b| {
                let (g1, g2) = b.components(rho_river, rho_basin, tau);
                (b.pairs as f64, g1, g2, b.mean_product)
            })
            .collect();
        let rss = |s1: f64, s2: f64| {
            rows.iter()
                .map(|&(w, g1, g2, y)| w * (y - s1 * g1 - s2 * g2).powi(2))
                .sum::<f64>()
        };
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(w, g1, g2, y) in &rows {
            a11 += w * g1 * g1;
            a12 += w * g1 * g2;
            a22 += w * g2 * g2;
            b1 += w * g1 * y;
            b2 += w * g2 * y;
        }
        let det = a11 * a22 - a12 * a12;
        if det > 1e-12 * (a11 * a22).max(f64::MIN_POSITIVE) {
            let s1 = (b1 * a22 - b2 * a12) / det;
            let s2 = (a11 * b2 - a12 * b1) / det;
            if s1 >= 0.0 && s2 >= 0.0 {
                return ((s1, s2), rss(s1, s2));
            }
        }
        // clip one variance to zero and refit the other
        let only1 = if a11 > 0.0 { (b1 / a11).max(0.0) } else { 0.0 };
        let only2 = if a22 > 0.0 { (b2 / a22).max(0.0) } else { 0.0 };
        let r1 = rss(only1, 0.0);
        let r2 = rss(0.0, only2);
        if r1 <= r2 {
            ((only1, 0.0), r1)
        } else {
            ((0.0, only2), r2)
        }
    }
}

struct Simplex {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
}

/// Bounded Nelder-Mead: trial points are clamped into the box.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    step: f64,
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
    tol: f64,
) -> Simplex {
    let n = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    pts.push(x0.clone());
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += if x[i] + step <= hi[i] { step } else { -step };
        clamp(&mut x);
        pts.push(x);
    }
    let mut vals: Vec<f64> = pts.iter().map(|x| f(x)).collect();
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| pts[..n].iter().map(|p| p[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..n).map(|i| centroid[i] + t * (pts[n][i] - centroid[i])).collect();
            clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = f(&x);
            (x, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for k in 1..=n {
            let mut x: Vec<f64> = (0..n).map(|i| pts[0][i] + 0.5 * (pts[k][i] - pts[0][i])).collect();
            clamp(&mut x);
            vals[k] = f(&x);
            pts[k] = x;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex {
        x: pts[best].clone(),
        f: vals[best],
        iterations: it,
    }
}

/// Fits the model to the binned covariances. Ranges and `tau` start from
/// `initial`; the tributary factors are carried over unchanged. The nugget
/// is the zero-lag excess variance over the fitted sill, divided by the mean
/// noise factor.
///
/// A nonlinear parameter ending on its search bound while its variance is
/// non-zero is reported as non-convergence, as is running out of iterations.
pub fn fit_params(
    emp: &EmpiricalCovariance,
    initial: &CovarianceParams,
    opts: &FitOptions,
) -> Result<CovarianceFit, CovarianceError> {
    let used = emp.non_empty().count();
    let flow = emp.non_empty().filter(|b| b.kind == PairKind::FlowConnected).count();
    if used < MIN_BINS {
        return Err(CovarianceError::UnderDetermined(format!(
            "{used} non-empty bins, need at least {MIN_BINS}"
        )));
    }
    // flow-connected bins carry the basin curve too once their basin lags vary
    let (lo, hi) = emp
        .non_empty()
        .filter(|b| b.kind == PairKind::FlowConnected)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            (lo.min(b.mean_basin_km), hi.max(b.mean_basin_km))
        });
    if flow == 0 || (flow == used && hi - lo <= 0.0) {
        return Err(CovarianceError::UnderDetermined(
            "bins must support both the river and the basin curve".into(),
        ));
    }
    let axis_max = |edges: &[f64]| edges.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let scale = [
        axis_max(&emp.lags.river_km),
        axis_max(&emp.lags.basin_km),
        axis_max(&emp.lags.time_days),
    ];
    let lo: Vec<f64> = scale.iter().map(|s| (s * opts.lower_factor).ln()).collect();
    let hi: Vec<f64> = scale.iter().map(|s| (s * opts.upper_factor).ln()).collect();

    let problem = Problem { emp };
    let objective = |x: &[f64]| problem.profile(x[0].exp(), x[1].exp(), x[2].exp()).1;
    let start = [initial.rho_river.ln(), initial.rho_basin.ln(), initial.tau.ln()];

    let mut iterations = 0;
    let mut best = nelder_mead(
        objective,
        &start,
        0.5,
        &lo,
        &hi,
        opts.max_iterations,
        opts.log_tolerance,
    );
    iterations += best.iterations;
    // one restart guards against a prematurely collapsed simplex
    if iterations < opts.max_iterations {
        let again = nelder_mead(
            objective,
            &best.x,
            0.1,
            &lo,
            &hi,
            opts.max_iterations - iterations,
            opts.log_tolerance,
        );
        iterations += again.iterations;
        if again.f <= best.f {
            best = again;
        }
    }

    let (rho_river, rho_basin, tau) = (best.x[0].exp(), best.x[1].exp(), best.x[2].exp());
    let ((sigma2_river, sigma2_basin), rss) = problem.profile(rho_river, rho_basin, tau);
    let sill = sigma2_river + sigma2_basin;
    let nugget = if emp.mean_noise_factor > 0.0 {
        ((emp.mean_square - sill) / emp.mean_noise_factor).max(0.0)
    } else {
        0.0
    };
    let params = CovarianceParams {
        sigma2_river,
        rho_river,
        sigma2_basin,
        rho_basin,
        tau,
        nugget,
        trib_factor_major: initial.trib_factor_major,
        trib_factor_minor: initial.trib_factor_minor,
    };

    let on_bound = |i: usize| (best.x[i] - lo[i]).abs() < 1e-6 || (hi[i] - best.x[i]).abs() < 1e-6;
    let mut bounded = Vec::new();
    if sigma2_river > 0.0 && on_bound(0) {
        bounded.push("rho_river");
    }
    if sigma2_basin > 0.0 && on_bound(1) {
        bounded.push("rho_basin");
    }
    if sill > 0.0 && on_bound(2) {
        bounded.push("tau");
    }
    if !bounded.is_empty() {
        return Err(CovarianceError::NonConvergence {
            reason: format!("{} reached the search bound", bounded.join(", ")),
            best: Box::new(params),
        });
    }
    if iterations >= opts.max_iterations {
        return Err(CovarianceError::NonConvergence {
            reason: format!("no convergence after {iterations} iterations"),
            best: Box::new(params),
        });
    }
    params.validate()?;
    Ok(CovarianceFit {
        params,
        weighted_rss: rss,
        iterations,
        bins_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::empirical::{CovarianceBin, LagBins};

    /// Bins whose values are exactly the model at hand-placed lags.
    fn synthetic(p: &CovarianceParams) -> EmpiricalCovariance {
        let lags = LagBins::default();
        let mut bins = Vec::new();
        let times = [1.0, 4.0, 9.0, 16.0, 27.0, 47.0];
        for (s, &d) in [5.0, 17.0, 37.0, 75.0, 125.0, 175.0, 250.0].iter().enumerate() {
            for (t, &dt) in times.iter().enumerate() {
                let mut b = CovarianceBin {
                    kind: PairKind::FlowConnected,
                    space_bin: s,
                    time_bin: t,
                    pairs: 50 + 10 * s + t,
                    mean_product: 0.0,
                    mean_river_km: d,
                    mean_basin_km: 0.4 * d,
                    mean_time_days: dt,
                    mean_flow_weight: 1.0 - 0.001 * d,
                    support: Vec::new(),
                };
                b.mean_product = b.model(p);
                bins.push(b);
            }
        }
        for (s, &d) in [10.0, 50.0, 110.0, 200.0, 320.0, 500.0].iter().enumerate() {
            for (t, &dt) in times.iter().enumerate() {
                let mut b = CovarianceBin {
                    kind: PairKind::Unconnected,
                    space_bin: s,
                    time_bin: t,
                    pairs: 80,
                    mean_product: 0.0,
                    mean_river_km: 0.0,
                    mean_basin_km: d,
                    mean_time_days: dt,
                    mean_flow_weight: 0.0,
                    support: Vec::new(),
                };
                b.mean_product = b.model(p);
                bins.push(b);
            }
        }
        EmpiricalCovariance {
            bins,
            lags,
            mean_square: p.sill() + p.nugget,
            mean_noise_factor: 1.0,
            residuals: 1000,
        }
    }

    fn truth() -> CovarianceParams {
        CovarianceParams {
            sigma2_river: 2.0,
            rho_river: 80.0,
            sigma2_basin: 0.7,
            rho_basin: 150.0,
            tau: 12.0,
            nugget: 0.3,
            trib_factor_major: 2.0,
            trib_factor_minor: 4.0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exact_bins_round_trip() {
        let p = truth();
        let fit = fit_params(&synthetic(&p), &CovarianceParams::default(), &FitOptions::default()).unwrap();
        let q = fit.params;
        for (got, want) in [
            (q.sigma2_river, p.sigma2_river),
            (q.rho_river, p.rho_river),
            (q.sigma2_basin, p.sigma2_basin),
            (q.rho_basin, p.rho_basin),
            (q.tau, p.tau),
            (q.nugget, p.nugget),
        ] {
            assert!(rel(got, want) < 0.01, "got {got}, want {want}");
        }
    }

    #[test]
    fn scaling_values_scales_variances_only() {
        let p = truth();
        let emp = synthetic(&p);
        let init = CovarianceParams::default();
        let a = fit_params(&emp, &init, &FitOptions::default()).unwrap().params;
        let b = fit_params(&emp.scaled(4.0), &init, &FitOptions::default())
            .unwrap()
            .params;
        assert!(rel(b.sigma2_river, 4.0 * a.sigma2_river) < 1e-9);
        assert!(rel(b.sigma2_basin, 4.0 * a.sigma2_basin) < 1e-9);
        assert!(rel(b.nugget, 4.0 * a.nugget) < 1e-9);
        assert!(rel(b.rho_river, a.rho_river) < 1e-9);
        assert!(rel(b.rho_basin, a.rho_basin) < 1e-9);
        assert!(rel(b.tau, a.tau) < 1e-9);
    }

    #[test]
    fn flat_covariance_hits_bound() {
        let mut emp = synthetic(&truth());
        for b in &mut emp.bins {
            b.mean_product = 1.0;
        }
        match fit_params(&emp, &CovarianceParams::default(), &FitOptions::default()) {
            Err(CovarianceError::NonConvergence { reason, .. }) => assert!(reason.contains("bound"), "{reason}"),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn too_few_bins() {
        let mut emp = synthetic(&truth());
        emp.bins.truncate(5);
        assert!(matches!(
            fit_params(&emp, &CovarianceParams::default(), &FitOptions::default()),
            Err(CovarianceError::UnderDetermined(_))
        ));
        let mut only_unconnected = synthetic(&truth());
        only_unconnected.bins.retain(|b| b.kind == PairKind::Unconnected);
        assert!(matches!(
            fit_params(&only_unconnected, &CovarianceParams::default(), &FitOptions::default()),
            Err(CovarianceError::UnderDetermined(_))
        ));
        let mut flat_basin = synthetic(&truth());
        flat_basin.bins.retain(|b| b.kind == PairKind::FlowConnected);
        for b in &mut flat_basin.bins {
            b.mean_basin_km = 0.0;
        }
        assert!(matches!(
            fit_params(&flat_basin, &CovarianceParams::default(), &FitOptions::default()),
            Err(CovarianceError::UnderDetermined(_))
        ));
    }

    #[test]
    fn flow_connected_bins_alone_identify_both_curves() {
        let p = truth();
        let mut emp = synthetic(&p);
        emp.bins.retain(|b| b.kind == PairKind::FlowConnected);
        let fit = fit_params(&emp, &CovarianceParams::default(), &FitOptions::default())
            .unwrap()
            .params;
        for (a, b) in [
            (fit.sigma2_river, p.sigma2_river),
            (fit.rho_river, p.rho_river),
            (fit.sigma2_basin, p.sigma2_basin),
            (fit.rho_basin, p.rho_basin),
            (fit.tau, p.tau),
        ] {
            assert!(((a - b) / b).abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn negative_variance_is_clipped() {
        let p = CovarianceParams {
            sigma2_basin: 0.0,
            ..truth()
        };
        let mut emp = synthetic(&p);
        // unconnected pairs slightly anti-correlated
        for b in emp.bins.iter_mut().filter(|b| b.kind == PairKind::Unconnected) {
            b.mean_product = -0.01;
        }
        let q = match fit_params(&emp, &CovarianceParams::default(), &FitOptions::default()) {
            Ok(f) => f.params,
            Err(CovarianceError::NonConvergence { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(q.sigma2_basin, 0.0);
        assert!(q.validate().is_ok());
    }
}
