use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SimError;
use crate::covariance::{spatial_cov, CovarianceParams};
use crate::network::{NetworkLocation, RiverNetwork};

pub(crate) const FIELD_STREAM: u64 = 1;

/// Gaussian residual with covariance `C_s(a, b) exp(-|dt| / tau)`, simulated
/// daily on a grid of cell centres along every edge. Any location takes the
/// value of the cell that contains it.
#[derive(Debug, Clone)]
pub struct ResidualField {
    /// Per edge: cell length and index of the first site.
    cells: Vec<(f64, usize, usize)>,
    sites: Vec<NetworkLocation>,
    first_day: f64,
    /// Sites by days.
    values: DMatrix<f64>,
}

impl ResidualField {
    pub fn simulate(
        net: &RiverNetwork,
        params: &CovarianceParams,
        spacing_km: f64,
        (from, to): (NaiveDate, NaiveDate),
        seed: u64,
    ) -> Result<Self, SimError> {
        let mut cells = Vec::with_capacity(net.edges().len());
        let mut sites = Vec::new();
        for (i, e) in net.edges().iter().enumerate() {
            let k = ((e.length_km / spacing_km) - 1e-9).ceil().max(1.0) as usize;
            let cell = e.length_km / k as f64;
            cells.push((cell, sites.len(), k));
            sites.extend((0..k).map(|j| NetworkLocation {
                edge: i,
                offset_km: (j as f64 + 0.5) * cell,
            }));
        }
        let n = sites.len();
        let mut cs = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..=a {
                let c = spatial_cov(net, sites[a], sites[b], params);
                cs[(a, b)] = c;
                cs[(b, a)] = c;
            }
            cs[(a, a)] += 1e-9 * params.sill().max(1e-12);
        }
        let l = cs.cholesky().ok_or(SimError::Field)?.unpack();

        let days = ((to - from).num_days() + 1).max(0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(FIELD_STREAM);
        let draws: Vec<f64> = (0..n * days).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = l * DMatrix::from_vec(n, days, draws);
        let rho = (-1.0 / params.tau).exp();
        let innov = (1.0 - rho * rho).sqrt();
        for d in 1..days {
            for s in 0..n {
                values[(s, d)] = rho * values[(s, d - 1)] + innov * values[(s, d)];
            }
        }
        Ok(Self {
            cells,
            sites,
            first_day: crate::day_number(from),
            values,
        })
    }

    fn site_index(&self, s: NetworkLocation) -> usize {
        let (cell, first, k) = self.cells[s.edge];
        first + ((s.offset_km / cell).floor().max(0.0) as usize).min(k - 1)
    }

    /// Centre of the cell containing `s`.
    pub fn snap(&self, s: NetworkLocation) -> NetworkLocation {
        self.sites[self.site_index(s)]
    }

    pub fn sites(&self) -> &[NetworkLocation] {
        &self.sites
    }

    /// Field value; dates outside the simulated era are clamped to its ends.
    pub fn value(&self, s: NetworkLocation, date: NaiveDate) -> f64 {
        let d = (crate::day_number(date) - self.first_day).max(0.0) as usize;
        self.values[(self.site_index(s), d.min(self.values.ncols() - 1))]
    }
}
