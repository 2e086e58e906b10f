//! Separable, non-stationary space-time covariance on a river network.
//!
//! The spatial part is a sum of two elements:
//!
//! ```text
//! C_flow(a, b)  = sigma2_river * sqrt(W_up / W_down) * exp(-d_river / rho_river)   (flow-connected only)
//! C_basin(a, b) = sigma2_basin * exp(-d_basin / rho_basin)
//! ```
//!
//! where `W_up`, `W_down` are the catchment weights at the upstream and
//! downstream member of the pair and `d_basin` is the distance between
//! sub-basin centroids. With confluence-additive weights the flow element is
//! a tail-up model and positive semidefinite. The temporal part is
//! `exp(-|dt| / tau)` and multiplies the spatial part.
//!
//! Observation error lives in a separate diagonal: `nugget` times a
//! tributary-class factor times the observation's quality factor.

mod empirical;
mod fit;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Observation;
use crate::network::{NetworkLocation, RiverNetwork, TribClass};

pub use empirical::{empirical_covariance, CovarianceBin, EmpiricalCovariance, LagBins, PairKind, Residual};
pub use fit::{fit_params, CovarianceFit, FitOptions};

#[derive(Debug, Error)]
pub enum CovarianceError {
    #[error("invalid covariance parameter: {0}")]
    InvalidParams(String),
    #[error("no residuals to bin")]
    EmptyInput,
    #[error("fit under-determined: {0}")]
    UnderDetermined(String),
    #[error("fit did not converge: {reason}")]
    NonConvergence {
        reason: String,
        best: Box<CovarianceParams>,
    },
    #[error("parameter file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Parameters of the space-time covariance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceParams {
    /// Variance of the flow-connected element (m²).
    pub sigma2_river: f64,
    /// River-distance range (km).
    pub rho_river: f64,
    /// Variance of the sub-basin element (m²).
    pub sigma2_basin: f64,
    /// Basin-distance range (km).
    pub rho_basin: f64,
    /// Temporal e-folding time (days).
    pub tau: f64,
    /// Observation-error variance (m²).
    pub nugget: f64,
    pub trib_factor_major: f64,
    pub trib_factor_minor: f64,
}

impl Default for CovarianceParams {
    fn default() -> Self {
        Self {
            sigma2_river: 4.0,
            rho_river: 300.0,
            sigma2_basin: 1.0,
            rho_basin: 300.0,
            tau: 30.0,
            nugget: 0.25,
            trib_factor_major: 2.0,
            trib_factor_minor: 4.0,
        }
    }
}

impl CovarianceParams {
    pub fn validate(&self) -> Result<(), CovarianceError> {
        let bad = |name: &str, v: f64| Err(CovarianceError::InvalidParams(format!("{name} = {v}")));
        for (name, v) in [
            ("sigma2_river", self.sigma2_river),
            ("sigma2_basin", self.sigma2_basin),
            ("nugget", self.nugget),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(name, v);
            }
        }
        for (name, v) in [
            ("rho_river", self.rho_river),
            ("rho_basin", self.rho_basin),
            ("tau", self.tau),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(name, v);
            }
        }
        for (name, v) in [
            ("trib_factor_major", self.trib_factor_major),
            ("trib_factor_minor", self.trib_factor_minor),
        ] {
            if !(v.is_finite() && v >= 1.0) {
                return bad(name, v);
            }
        }
        Ok(())
    }

    /// Process variance at zero lag.
    pub fn sill(&self) -> f64 {
        self.sigma2_river + self.sigma2_basin
    }

    pub fn class_factor(&self, class: TribClass) -> f64 {
        match class {
            TribClass::MainStem => 1.0,
            TribClass::MajorTributary => self.trib_factor_major,
            TribClass::MinorTributary => self.trib_factor_minor,
        }
    }

    /// Parses and validates a JSON parameter document. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, CovarianceError> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

pub fn temporal_cov(dt_days: f64, p: &CovarianceParams) -> f64 {
    (-dt_days.abs() / p.tau).exp()
}

/// Flow-connected element of the spatial covariance; zero when unconnected.
pub fn flow_cov(net: &RiverNetwork, a: NetworkLocation, b: NetworkLocation, p: &CovarianceParams) -> f64 {
    match (net.flow_weight(a, b), net.river_distance(a, b).km()) {
        (Some(w), Some(d)) => p.sigma2_river * w * (-d / p.rho_river).exp(),
        _ => 0.0,
    }
}

pub fn basin_cov(net: &RiverNetwork, a: NetworkLocation, b: NetworkLocation, p: &CovarianceParams) -> f64 {
    p.sigma2_basin * (-net.basin_distance(a, b) / p.rho_basin).exp()
}

pub fn spatial_cov(net: &RiverNetwork, a: NetworkLocation, b: NetworkLocation, p: &CovarianceParams) -> f64 {
    flow_cov(net, a, b, p) + basin_cov(net, a, b, p)
}

/// Process covariance between two space-time points, without the nugget.
pub fn process_cov(
    net: &RiverNetwork,
    (a, ta): (NetworkLocation, f64),
    (b, tb): (NetworkLocation, f64),
    p: &CovarianceParams,
) -> f64 {
    let s = spatial_cov(net, a, b, p);
    if s == 0.0 {
        return 0.0;
    }
    s * temporal_cov(ta - tb, p)
}

/// Full space-time covariance; the nugget is added for coincident points.
pub fn st_cov(net: &RiverNetwork, x: (NetworkLocation, f64), y: (NetworkLocation, f64), p: &CovarianceParams) -> f64 {
    let c = process_cov(net, x, y, p);
    if x == y {
        c + p.nugget
    } else {
        c
    }
}

/// Observation-error variance of one observation.
pub fn observation_error(net: &RiverNetwork, obs: &Observation, p: &CovarianceParams) -> f64 {
    p.nugget * p.class_factor(net.trib_class(obs.location)) * obs.quality_factor
}

/// Process covariance matrix and observation-error diagonal for a set of
/// observations.
#[derive(Debug, Clone)]
pub struct CovarianceMatrices {
    pub sigma_u: DMatrix<f64>,
    pub sigma_alti: DVector<f64>,
}

impl CovarianceMatrices {
    pub fn sigma_alti_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.sigma_alti)
    }

    pub fn total(&self) -> DMatrix<f64> {
        let mut s = self.sigma_u.clone();
        s.set_diagonal(&(s.diagonal() + &self.sigma_alti));
        s
    }
}

pub fn build_matrices<'a, I>(net: &RiverNetwork, observations: I, p: &CovarianceParams) -> CovarianceMatrices
where
    I: IntoIterator<Item = &'a Observation>,
{
    let obs: Vec<&Observation> = observations.into_iter().collect();
    let pts: Vec<(NetworkLocation, f64)> = obs.iter().map(|o| (o.location, o.t_days())).collect();
    let n = obs.len();
    let mut sigma_u = DMatrix::zeros(n, n);
    for i in 0..n {
        sigma_u[(i, i)] = p.sill();
        for j in 0..i {
            let c = process_cov(net, pts[i], pts[j], p);
            sigma_u[(i, j)] = c;
            sigma_u[(j, i)] = c;
        }
    }
    let sigma_alti = DVector::from_iterator(n, obs.iter().map(|o| observation_error(net, o, p)));
    CovarianceMatrices { sigma_u, sigma_alti }
}
