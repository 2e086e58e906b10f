use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CovarianceError, CovarianceParams};
use crate::network::{NetworkLocation, RiverNetwork};

/// A detrended observation: value minus a preliminary trend fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub location: NetworkLocation,
    pub t_days: f64,
    pub value: f64,
    /// Class factor times quality factor of the source observation.
    pub noise_factor: f64,
}

/// Lag bin edges. Bin `k` of an axis covers `[edges[k], edges[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagBins {
    pub river_km: Vec<f64>,
    pub basin_km: Vec<f64>,
    pub time_days: Vec<f64>,
}

impl Default for LagBins {
    fn default() -> Self {
        Self {
            river_km: vec![0.0, 10.0, 25.0, 50.0, 100.0, 150.0, 200.0, 300.0],
            basin_km: vec![0.0, 25.0, 75.0, 150.0, 250.0, 400.0, 600.0],
            time_days: vec![0.0, 2.0, 6.0, 12.0, 20.0, 35.0, 60.0],
        }
    }
}

fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    if edges.len() < 2 || x < edges[0] || x >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    /// Binned by river distance.
    FlowConnected,
    /// Binned by basin distance.
    Unconnected,
}

/// Pairs of one bin sharing quantised lags, with their mean lags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagSample {
    pub pairs: usize,
    pub river_km: f64,
    pub basin_km: f64,
    pub time_days: f64,
    pub flow_weight: f64,
}

/// River lags are grouped to this resolution inside a bin.
pub const SUPPORT_RIVER_KM: f64 = 2.0;

/// Mean residual product over the pairs falling in one (space, time) bin,
/// with the pair-averaged lags and the lag support used to evaluate the
/// model in that bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceBin {
    pub kind: PairKind,
    pub space_bin: usize,
    pub time_bin: usize,
    pub pairs: usize,
    pub mean_product: f64,
    pub mean_river_km: f64,
    pub mean_basin_km: f64,
    pub mean_time_days: f64,
    pub mean_flow_weight: f64,
    /// Lag groups of the pairs in the bin. When empty the model is
    /// evaluated at the mean lags.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<LagSample>,
}

impl CovarianceBin {
    /// Model covariance averaged over the bin's pairs.
    pub fn model(&self, p: &CovarianceParams) -> f64 {
        let (g_river, g_basin) = self.components(p.rho_river, p.rho_basin, p.tau);
        p.sigma2_river * g_river + p.sigma2_basin * g_basin
    }

    /// Unit-variance flow and basin curves averaged over the bin's pairs.
    pub(crate) fn components(&self, rho_river: f64, rho_basin: f64, tau: f64) -> (f64, f64) {
        let at = |river_km: f64, basin_km: f64, time_days: f64, weight: f64| {
            let t = (-time_days / tau).exp();
            let basin = (-basin_km / rho_basin).exp() * t;
            let river = match self.kind {
                PairKind::FlowConnected => weight * (-river_km / rho_river).exp() * t,
                PairKind::Unconnected => 0.0,
            };
            (river, basin)
        };
        if self.support.is_empty() {
            return at(
                self.mean_river_km,
                self.mean_basin_km,
                self.mean_time_days,
                self.mean_flow_weight,
            );
        }
        let (mut river, mut basin, mut n) = (0.0, 0.0, 0.0);
        for s in &self.support {
            let (r, b) = at(s.river_km, s.basin_km, s.time_days, s.flow_weight);
            let w = s.pairs as f64;
            river += w * r;
            basin += w * b;
            n += w;
        }
        (river / n, basin / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCovariance {
    pub bins: Vec<CovarianceBin>,
    pub lags: LagBins,
    /// Mean squared residual (zero-lag variance including observation error).
    pub mean_square: f64,
    pub mean_noise_factor: f64,
    pub residuals: usize,
}

impl EmpiricalCovariance {
    pub fn non_empty(&self) -> impl Iterator<Item = &CovarianceBin> {
        self.bins.iter().filter(|b| b.pairs > 0)
    }

    /// Scales every covariance value by `factor` (used by the fitting tests).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bins {
            b.mean_product *= factor;
        }
        out.mean_square *= factor;
        out
    }
}

#[derive(Default, Clone, Copy)]
struct Sums {
    n: usize,
    river: f64,
    basin: f64,
    time: f64,
    weight: f64,
}

impl Sums {
    fn add(&mut self, river: f64, basin: f64, time: f64, weight: f64) {
        self.n += 1;
        self.river += river;
        self.basin += basin;
        self.time += time;
        self.weight += weight;
    }

    fn sample(&self) -> LagSample {
        let n = self.n.max(1) as f64;
        LagSample {
            pairs: self.n,
            river_km: self.river / n,
            basin_km: self.basin / n,
            time_days: self.time / n,
            flow_weight: self.weight / n,
        }
    }
}

#[derive(Default, Clone)]
struct Acc {
    product: f64,
    total: Sums,
    groups: HashMap<(i64, i64, i64), Sums>,
}

/// Bins residual products over all distinct pairs. Flow-connected pairs are
/// binned by river distance, unconnected pairs by sub-basin distance; both by
/// absolute time lag. Pairs beyond the last edge of an axis are ignored.
pub fn empirical_covariance(
    net: &RiverNetwork,
    residuals: &[Residual],
    lags: &LagBins,
) -> Result<EmpiricalCovariance, CovarianceError> {
    if residuals.is_empty() {
        return Err(CovarianceError::EmptyInput);
    }
    let nt = lags.time_days.len().saturating_sub(1);
    let nr = lags.river_km.len().saturating_sub(1);
    let nb = lags.basin_km.len().saturating_sub(1);
    let mut flow = vec![Acc::default(); nr * nt];
    let mut unconnected = vec![Acc::default(); nb * nt];
    let max_dt = lags.time_days.last().copied().unwrap_or(0.0);

    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| residuals[a].t_days.total_cmp(&residuals[b].t_days));

    for (pos, &i) in order.iter().enumerate() {
        let ri = &residuals[i];
        for &j in &order[pos + 1..] {
            let rj = &residuals[j];
            let dt = rj.t_days - ri.t_days;
            if dt >= max_dt {
                break;
            }
            let Some(tb) = bin_of(&lags.time_days, dt) else {
                continue;
            };
            let d_basin = net.basin_distance(ri.location, rj.location);
            let (acc, river, weight) = match net.river_distance(ri.location, rj.location).km() {
                Some(d) => {
                    let Some(sb) = bin_of(&lags.river_km, d) else { continue };
                    let w = net.flow_weight(ri.location, rj.location).unwrap_or(0.0);
                    (&mut flow[sb * nt + tb], d, w)
                }
                None => {
                    let Some(sb) = bin_of(&lags.basin_km, d_basin) else {
                        continue;
                    };
                    (&mut unconnected[sb * nt + tb], 0.0, 0.0)
                }
            };
            acc.product += ri.value * rj.value;
            acc.total.add(river, d_basin, dt, weight);
            let key = (
                (river / SUPPORT_RIVER_KM).floor() as i64,
                (d_basin * 1e3).round() as i64,
                dt.round() as i64,
            );
            acc.groups.entry(key).or_default().add(river, d_basin, dt, weight);
        }
    }

    let finish = |kind: PairKind, accs: Vec<Acc>| {
        accs.into_iter().enumerate().map(move |(k, a)| {
            let mean = a.total.sample();
            let mut groups: Vec<_> = a.groups.into_iter().collect();
            groups.sort_by_key(|(key, _)| *key);
            CovarianceBin {
                kind,
                space_bin: k / nt,
                time_bin: k % nt,
                pairs: a.total.n,
                mean_product: a.product / a.total.n.max(1) as f64,
                mean_river_km: mean.river_km,
                mean_basin_km: mean.basin_km,
                mean_time_days: mean.time_days,
                mean_flow_weight: mean.flow_weight,
                support: groups.into_iter().map(|(_, g)| g.sample()).collect(),
            }
        })
    };
    let bins = finish(PairKind::FlowConnected, flow)
        .chain(finish(PairKind::Unconnected, unconnected))
        .collect();

    let n = residuals.len() as f64;
    Ok(EmpiricalCovariance {
        bins,
        lags: lags.clone(),
        mean_square: residuals.iter().map(|r| r.value * r.value).sum::<f64>() / n,
        mean_noise_factor: residuals.iter().map(|r| r.noise_factor).sum::<f64>() / n,
        residuals: residuals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EdgeRecord, NodeKind, NodeRecord, TribClass};
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn net() -> RiverNetwork {
        let node = |id: &str, x: f64, y: f64, b: &str| NodeRecord {
            node_id: id.into(),
            x_km: x,
            y_km: y,
            kind: NodeKind::Source,
            sub_basin_id: b.into(),
        };
        let edge = |id: &str, u: &str, d: &str, len: f64, w: f64| EdgeRecord {
            edge_id: id.into(),
            up_node: u.into(),
            down_node: d.into(),
            length_km: len,
            river_id: id.into(),
            trib_class: TribClass::MainStem,
            catchment_weight: w,
        };
        RiverNetwork::build(
            vec![
                node("a", -100.0, 100.0, "left"),
                node("b", 100.0, 100.0, "right"),
                node("c", 0.0, 0.0, "low"),
                node("m", 0.0, -200.0, "low"),
            ],
            vec![
                edge("ea", "a", "c", 150.0, 1.0),
                edge("eb", "b", "c", 150.0, 1.0),
                edge("ec", "c", "m", 200.0, 2.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_pair_single_bin() {
        let net = net();
        let r = |off: f64, t: f64, v: f64| Residual {
            location: NetworkLocation {
                edge: 2,
                offset_km: off,
            },
            t_days: t,
            value: v,
            noise_factor: 1.0,
        };
        let emp = empirical_covariance(&net, &[r(10.0, 0.0, 1.5), r(40.0, 3.0, -2.0)], &LagBins::default()).unwrap();
        let filled: Vec<_> = emp.non_empty().collect();
        assert_eq!(filled.len(), 1);
        let b = filled[0];
        assert_eq!(b.kind, PairKind::FlowConnected);
        assert_eq!(b.mean_product, -3.0);
        assert_eq!(b.mean_river_km, 30.0);
        assert_eq!(b.mean_time_days, 3.0);
        assert_eq!((b.space_bin, b.time_bin), (2, 1));
        assert_eq!(emp.mean_square, (1.5f64 * 1.5 + 4.0) / 2.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            empirical_covariance(&net(), &[], &LagBins::default()),
            Err(CovarianceError::EmptyInput)
        ));
    }

    #[test]
    fn white_noise_bins_vanish() {
        let net = net();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let residuals: Vec<Residual> = (0..10_000)
            .map(|_| {
                let edge = rng.random_range(0..3);
                let len = net.edge(edge).length_km;
                Residual {
                    location: NetworkLocation {
                        edge,
                        offset_km: rng.random_range(0.0..len),
                    },
                    t_days: rng.random_range(0..3000) as f64,
                    value: rng.sample(StandardNormal),
                    noise_factor: 1.0,
                }
            })
            .collect();
        let emp = empirical_covariance(&net, &residuals, &LagBins::default()).unwrap();
        let mut checked = 0;
        for b in emp.non_empty().filter(|b| b.pairs >= 200) {
            let sd = 1.0 / (b.pairs as f64).sqrt();
            assert!(b.mean_product.abs() < 5.0 * sd, "{b:?}");
            checked += 1;
        }
        assert!(checked > 20);
        assert!((emp.mean_square - 1.0).abs() < 0.05);
    }
}
