use nalgebra::{DMatrix, DVector};

use super::KrigingError;

/// Which factorization solved the covariance system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    Cholesky,
    Lu,
}

/// Kriging weights and the quantities needed for the prediction variance.
#[derive(Debug, Clone)]
pub struct WeightSolution {
    pub lambda: DVector<f64>,
    /// Lagrange multipliers of the unbiasedness constraints.
    pub mu: DVector<f64>,
    /// Condition estimate of `Sigma_tot`.
    pub condition: f64,
    pub factorization: Factorization,
}

impl WeightSolution {
    /// Universal-kriging variance `c00 - c'lambda + f'mu`.
    pub fn variance(&self, c00: f64, c_u: &DVector<f64>, f: &DVector<f64>) -> f64 {
        c00 - c_u.dot(&self.lambda) + f.dot(&self.mu)
    }

    /// Largest absolute violation of `F' lambda = f`.
    pub fn unbiasedness_residual(&self, f_obs: &DMatrix<f64>, f: &DVector<f64>) -> f64 {
        (f_obs.tr_mul(&self.lambda) - f).amax()
    }
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Chol(c) => c.solve(b),
            Factor::Lu(lu) => lu.solve(b).expect("checked invertible"),
        }
    }
}

fn diagonal_ratio(d: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = d.fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
        (lo.min(x.abs()), hi.max(x.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn factor(m: DMatrix<f64>) -> Option<(Factor, f64, Factorization)> {
    if m.nrows() == 0 {
        return m.cholesky().map(|c| (Factor::Chol(c), 1.0, Factorization::Cholesky));
    }
    if let Some(c) = m.clone().cholesky() {
        let r = diagonal_ratio(c.l_dirty().diagonal().iter().copied());
        return Some((Factor::Chol(c), r * r, Factorization::Cholesky));
    }
    let lu = m.lu();
    if !lu.is_invertible() {
        return None;
    }
    let r = diagonal_ratio(lu.u().diagonal().iter().copied());
    if !r.is_finite() {
        return None;
    }
    Some((Factor::Lu(lu), r, Factorization::Lu))
}

/// Universal-kriging weights
/// `lambda' = (c_U + F (F' S^-1 F)^-1 (f - F' S^-1 c_U))' S^-1`
/// with `S = Sigma_U + diag(Sigma_alti)`.
pub fn solve_weights(
    sigma_u: &DMatrix<f64>,
    sigma_alti: &DVector<f64>,
    f_obs: &DMatrix<f64>,
    c_u: &DVector<f64>,
    f: &DVector<f64>,
) -> Result<WeightSolution, KrigingError> {
    let n = sigma_u.nrows();
    let p = f.len();
    if sigma_u.ncols() != n || sigma_alti.len() != n || c_u.len() != n || f_obs.shape() != (n, p) {
        return Err(KrigingError::Dimension);
    }
    let mut total = sigma_u.clone();
    total.set_diagonal(&(total.diagonal() + sigma_alti));
    let (fac, condition, factorization) = factor(total).ok_or(KrigingError::SingularCovariance)?;

    let mut rhs = DMatrix::zeros(n, p + 1);
    rhs.column_mut(0).copy_from(c_u);
    rhs.columns_mut(1, p).copy_from(f_obs);
    let solved = fac.solve(&rhs);
    let s_c = solved.column(0).into_owned();
    let s_f = solved.columns(1, p).into_owned();

    let mu = if p == 0 {
        DVector::zeros(0)
    } else {
        let a = f_obs.tr_mul(&s_f);
        let r = f - f_obs.tr_mul(&s_c);
        let (afac, acond, _) = factor(a).ok_or(KrigingError::RankDeficient)?;
        if acond > 1e14 {
            return Err(KrigingError::RankDeficient);
        }
        afac.solve(&DMatrix::from_column_slice(p, 1, r.as_slice()))
            .column(0)
            .into_owned()
    };
    let lambda = &s_c + &s_f * &mu;
    Ok(WeightSolution {
        lambda,
        mu,
        condition,
        factorization,
    })
}

/// Generalized least-squares trend coefficients for a dense design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsTrend {
    /// One coefficient per basis function; zero for dropped columns.
    pub beta: DVector<f64>,
    /// Columns without support in the data.
    pub dropped: Vec<usize>,
}

/// `beta = (F' S^-1 F)^-1 F' S^-1 z` after dropping all-zero columns of `F`.
pub fn gls_solve(f_obs: &DMatrix<f64>, z: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<GlsTrend, KrigingError> {
    let n = f_obs.nrows();
    if z.len() != n || sigma.shape() != (n, n) {
        return Err(KrigingError::Dimension);
    }
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..f_obs.ncols()).partition(|&j| f_obs.column(j).iter().any(|&v| v != 0.0));
    let f_kept = f_obs.select_columns(&kept);
    let (fac, _, _) = factor(sigma.clone()).ok_or(KrigingError::SingularCovariance)?;
    let mut rhs = DMatrix::zeros(n, kept.len() + 1);
    rhs.column_mut(0).copy_from(z);
    rhs.columns_mut(1, kept.len()).copy_from(&f_kept);
    let solved = fac.solve(&rhs);
    let a = f_kept.tr_mul(&solved.columns(1, kept.len()));
    let b = f_kept.tr_mul(&solved.column(0));
    let singular = || KrigingError::SingularNormal {
        dropped: dropped.clone(),
    };
    let (afac, acond, _) = factor(a).ok_or_else(singular)?;
    if acond > 1e14 {
        return Err(singular());
    }
    let beta_kept = afac.solve(&DMatrix::from_column_slice(kept.len(), 1, b.as_slice()));
    let mut beta = DVector::zeros(f_obs.ncols());
    for (k, &j) in kept.iter().enumerate() {
        beta[j] = beta_kept[(k, 0)];
    }
    Ok(GlsTrend { beta, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn single_observation_constant_basis() {
        let w = solve_weights(
            &DMatrix::from_element(1, 1, 3.0),
            &DVector::from_element(1, 0.5),
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::from_element(1, 0.7),
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((w.lambda[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_free_target_on_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let s = random_spd(&mut rng, n);
        let f_obs = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let k = 5;
        let w = solve_weights(
            &s,
            &DVector::zeros(n),
            &f_obs,
            &s.column(k).into_owned(),
            &f_obs.row(k).transpose(),
        )
        .unwrap();
        for i in 0..n {
            let e = if i == k { 1.0 } else { 0.0 };
            assert!((w.lambda[i] - e).abs() < 1e-9);
        }
        assert!(
            w.variance(s[(k, k)], &s.column(k).into_owned(), &f_obs.row(k).transpose())
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn rank_deficient_basis_is_an_error() {
        let n = 4;
        let f_obs = DMatrix::from_fn(n, 2, |_, _| 1.0);
        let r = solve_weights(
            &DMatrix::identity(n, n),
            &DVector::zeros(n),
            &f_obs,
            &DVector::zeros(n),
            &DVector::from_element(2, 1.0),
        );
        assert!(matches!(r, Err(KrigingError::RankDeficient)));
    }

    #[test]
    fn indefinite_falls_back_to_lu() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let w = solve_weights(
            &s,
            &DVector::zeros(2),
            &DMatrix::zeros(2, 0),
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::zeros(0),
        )
        .unwrap();
        assert_eq!(w.factorization, Factorization::Lu);
        assert!((&s * &w.lambda - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-12);
        assert!(matches!(
            solve_weights(
                &DMatrix::zeros(2, 2),
                &DVector::zeros(2),
                &DMatrix::zeros(2, 0),
                &DVector::zeros(2),
                &DVector::zeros(0)
            ),
            Err(KrigingError::SingularCovariance)
        ));
    }

    #[test]
    fn gls_recovers_exact_trend_and_drops_empty_columns() {
        let n = 10;
        let f_obs = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64 / 3.0,
            _ => 0.0,
        });
        let z = &f_obs * DVector::from_vec(vec![2.5, -0.75, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_spd(&mut rng, n);
        let g = gls_solve(&f_obs, &z, &s).unwrap();
        assert_eq!(g.dropped, vec![2]);
        assert!((g.beta[0] - 2.5).abs() < 1e-8);
        assert!((g.beta[1] + 0.75).abs() < 1e-8);
    }

    #[test]
    fn gls_singular_normal_reports_dropped() {
        let f_obs = DMatrix::from_fn(3, 3, |_, j| if j == 2 { 0.0 } else { 1.0 });
        let r = gls_solve(&f_obs, &DVector::zeros(3), &DMatrix::identity(3, 3));
        match r {
            Err(KrigingError::SingularNormal { dropped }) => assert_eq!(dropped, vec![2]),
            other => panic!("{other:?}"),
        }
    }
}
