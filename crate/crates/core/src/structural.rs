//! Recursive structural identification: fit a VAR by least squares, factor
//! the residual covariance with a lower-triangular Cholesky, and read off the
//! unit-variance structural shock of the first-ordered variable.

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, solve_lower, solve_spd_multi};

/// VAR specification. The first entry of `variable_order` is the instrument
/// variable whose structural innovation defines the shock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    /// Lag order.
    pub lags: usize,
    pub variable_order: Vec<String>,
    pub include_intercept: bool,
}

impl VarSpec {
    pub fn new(lags: usize, variable_order: Vec<String>) -> Result<Self> {
        let spec = VarSpec {
            lags,
            variable_order,
            include_intercept: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::config("VAR lag order must be at least 1"));
        }
        if self.variable_order.is_empty() {
            return Err(Error::config("VAR variable order must be nonempty"));
        }
        Ok(())
    }

    /// Name of the design column `j`, for error reporting.
    fn design_column_name(&self, j: usize) -> String {
        let mut idx = j;
        if self.include_intercept {
            if idx == 0 {
                return "intercept".to_string();
            }
            idx -= 1;
        }
        let n = self.variable_order.len();
        let lag = idx / n + 1;
        let var = &self.variable_order[idx % n];
        format!("{var} (lag {lag})")
    }
}

/// Fitted VAR: stacked coefficients, residuals, and residual covariance.
#[derive(Debug, Clone)]
pub struct VarFit {
    /// `(intercept? + N*p) x N`; column `j` holds the equation for variable `j`.
    pub coefficients: Array2<f64>,
    /// Residual matrix, `(T - p) x N`.
    pub residuals: Array2<f64>,
    /// Residual covariance with denominator `T - p`.
    pub sigma: Array2<f64>,
}

/// Structural shock series of the first-ordered variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSeries {
    /// Unit-variance structural shocks, length `T - p`.
    pub zeta: Array1<f64>,
    /// Row indices into the original panel (the first `p` periods are lost
    /// to lags).
    pub time_index: Vec<usize>,
}

/// Equation-by-equation least squares on `data` (rows are periods, columns
/// follow `spec.variable_order`).
pub fn fit_var_ols(data: ArrayView2<f64>, spec: &VarSpec) -> Result<VarFit> {
    spec.validate()?;
    let t_total = data.nrows();
    let n_vars = data.ncols();
    if n_vars != spec.variable_order.len() {
        return Err(Error::invalid_input(format!(
            "VAR: data has {n_vars} columns but the spec orders {} variables",
            spec.variable_order.len()
        )));
    }
    let p = spec.lags;
    let n_coef = n_vars * p + usize::from(spec.include_intercept);
    if t_total <= p || t_total - p <= n_coef + 1 {
        return Err(Error::invalid_input(format!(
            "VAR: {t_total} observations are too few for {n_vars} variables with {p} lags"
        )));
    }
    let rows = t_total - p;

    // Design: [1?, y_{t-1}, ..., y_{t-p}].
    let mut design = Array2::<f64>::zeros((rows, n_coef));
    for t in 0..rows {
        let mut c = 0;
        if spec.include_intercept {
            design[[t, 0]] = 1.0;
            c = 1;
        }
        for lag in 1..=p {
            for v in 0..n_vars {
                design[[t, c]] = data[[t + p - lag, v]];
                c += 1;
            }
        }
    }
    let targets = data.slice(s![p.., ..]);

    let gram = design.t().dot(&design);
    let xty = design.t().dot(&targets);
    let coefficients = solve_spd_multi(gram.view(), xty.view()).map_err(|e| match e {
        Error::Numeric(msg) => Error::invalid_input(format!(
            "VAR design is rank deficient ({})",
            rank_hint(&msg, spec)
        )),
        other => other,
    })?;

    let fitted = design.dot(&coefficients);
    let residuals = &targets - &fitted;
    let sigma = residuals.t().dot(&residuals) / rows as f64;

    Ok(VarFit {
        coefficients,
        residuals,
        sigma,
    })
}

fn rank_hint(chol_msg: &str, spec: &VarSpec) -> String {
    // Cholesky reports the failing pivot column; translate it to a design
    // column name.
    if let Some(col) = chol_msg
        .rsplit("column ")
        .next()
        .and_then(|s| s.trim().parse::<usize>().ok())
    {
        format!("offending column: {}", spec.design_column_name(col))
    } else {
        chol_msg.to_string()
    }
}

/// Orthogonalize the residuals with the lower Cholesky factor `P` of `sigma`
/// (`P P' = sigma`) and return the first structural shock column.
pub fn extract_shock(fit: &VarFit, first_period: usize) -> Result<ShockSeries> {
    let chol = cholesky_lower(fit.sigma.view()).map_err(|_| {
        Error::numeric(
            "residual covariance is not positive definite; consider a small ridge on sigma",
        )
    })?;
    let rows = fit.residuals.nrows();
    let mut zeta = Array1::<f64>::zeros(rows);
    for t in 0..rows {
        // Solve P e_t = u_t; only the first entry is kept.
        let e = solve_lower(chol.view(), fit.residuals.row(t));
        zeta[t] = e[0];
    }
    Ok(ShockSeries {
        zeta,
        time_index: (first_period..first_period + rows).collect(),
    })
}

/// Full structural shock matrix `E` with `U = E P'`; used by tests to check
/// orthonormality.
pub fn structural_shocks(fit: &VarFit) -> Result<Array2<f64>> {
    let chol = cholesky_lower(fit.sigma.view()).map_err(|_| {
        Error::numeric(
            "residual covariance is not positive definite; consider a small ridge on sigma",
        )
    })?;
    let rows = fit.residuals.nrows();
    let n = fit.sigma.nrows();
    let mut shocks = Array2::<f64>::zeros((rows, n));
    for t in 0..rows {
        let e = solve_lower(chol.view(), fit.residuals.row(t));
        shocks.row_mut(t).assign(&e);
    }
    Ok(shocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn spec(n: usize, lags: usize) -> VarSpec {
        VarSpec::new(lags, (0..n).map(|i| format!("v{i}")).collect()).unwrap()
    }

    /// Simulate a VAR(1) with impact matrix `p0` (u_t = p0 e_t).
    fn simulate_var1(
        a: &Array2<f64>,
        p0: &Array2<f64>,
        t_len: usize,
        seed: u64,
    ) -> (Array2<f64>, Array2<f64>) {
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 100;
        let mut data = Array2::<f64>::zeros((t_len + burn, n));
        let mut shocks = Array2::<f64>::zeros((t_len + burn, n));
        let mut prev = Array1::<f64>::zeros(n);
        for t in 0..t_len + burn {
            let e = Array1::from_shape_fn(n, |_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            });
            let u = p0.dot(&e);
            let next = a.dot(&prev) + u;
            data.row_mut(t).assign(&next);
            shocks.row_mut(t).assign(&e);
            prev = next;
        }
        (
            data.slice(s![burn.., ..]).to_owned(),
            shocks.slice(s![burn.., ..]).to_owned(),
        )
    }

    #[test]
    fn var1_coefficients_recovered() {
        let a = array![[0.5, 0.1, 0.0], [0.0, 0.3, 0.2], [0.1, 0.0, 0.4]];
        let p0 = array![[1.0, 0.0, 0.0], [0.4, 0.8, 0.0], [-0.2, 0.3, 0.6]];
        let (data, _) = simulate_var1(&a, &p0, 5000, 10);
        let fit = fit_var_ols(data.view(), &spec(3, 1)).unwrap();
        // Coefficient layout: row 0 intercept, rows 1..4 the lag-1 block,
        // column j = equation j. The lag block transposed equals A.
        for i in 0..3 {
            for j in 0..3 {
                let est = fit.coefficients[[1 + j, i]];
                assert!(
                    (est - a[[i, j]]).abs() < 0.05,
                    "A[{i},{j}] estimated {est}, truth {}",
                    a[[i, j]]
                );
            }
        }
    }

    #[test]
    fn white_noise_has_null_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t_len = 2000;
        let data = Array2::from_shape_fn((t_len, 2), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let fit = fit_var_ols(data.view(), &spec(2, 1)).unwrap();
        // Standard error of a VAR coefficient on standardized white noise is
        // roughly 1/sqrt(T).
        let se = 1.0 / (t_len as f64).sqrt();
        for j in 0..2 {
            for i in 1..3 {
                assert!(
                    fit.coefficients[[i, j]].abs() < 3.0 * se,
                    "coefficient ({i},{j}) = {} exceeds 3 SE",
                    fit.coefficients[[i, j]]
                );
            }
        }
    }

    #[test]
    fn univariate_reduces_to_ar1_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t_len = 300;
        let mut data = Array2::<f64>::zeros((t_len, 1));
        let mut prev = 0.0;
        for t in 0..t_len {
            let e: f64 = StandardNormal.sample(&mut rng);
            prev = 0.6 * prev + e;
            data[[t, 0]] = prev;
        }
        let mut sp = spec(1, 1);
        sp.include_intercept = false;
        let fit = fit_var_ols(data.view(), &sp).unwrap();
        let num: f64 = (1..t_len).map(|t| data[[t, 0]] * data[[t - 1, 0]]).sum();
        let den: f64 = (1..t_len)
            .map(|t| data[[t - 1, 0]] * data[[t - 1, 0]])
            .sum();
        assert!((fit.coefficients[[0, 0]] - num / den).abs() < 1e-10);
    }

    #[test]
    fn diagonal_sigma_standardizes_first_residual() {
        let residuals = array![[2.0, 1.0], [-4.0, 0.5], [6.0, -1.5]];
        let sigma = array![[4.0, 0.0], [0.0, 2.25]];
        let fit = VarFit {
            coefficients: Array2::zeros((1, 2)),
            residuals: residuals.clone(),
            sigma,
        };
        let shocks = extract_shock(&fit, 1).unwrap();
        for t in 0..3 {
            assert!((shocks.zeta[t] - residuals[[t, 0]] / 2.0).abs() < 1e-12);
        }
        assert_eq!(shocks.time_index, vec![1, 2, 3]);
    }

    #[test]
    fn recursive_system_recovered() {
        let a = array![[0.4, 0.0, 0.1], [0.2, 0.3, 0.0], [0.0, 0.1, 0.5]];
        let p0 = array![[0.9, 0.0, 0.0], [0.5, 0.7, 0.0], [-0.3, 0.2, 0.8]];
        let (data, true_shocks) = simulate_var1(&a, &p0, 5000, 77);
        let fit = fit_var_ols(data.view(), &spec(3, 1)).unwrap();
        let shocks = extract_shock(&fit, 1).unwrap();

        // Correlation with the true first shock.
        let est = &shocks.zeta;
        let truth = true_shocks.slice(s![1.., 0]);
        let n = est.len() as f64;
        let (me, mt) = (est.sum() / n, truth.sum() / n);
        let mut cov = 0.0;
        let mut ve = 0.0;
        let mut vt = 0.0;
        for t in 0..est.len() {
            cov += (est[t] - me) * (truth[t] - mt);
            ve += (est[t] - me) * (est[t] - me);
            vt += (truth[t] - mt) * (truth[t] - mt);
        }
        let corr = cov / (ve.sqrt() * vt.sqrt());
        assert!(corr > 0.95, "correlation {corr} too low");

        // Sample statistics of the standardized shock.
        assert!(me.abs() < 0.1);
        assert!((ve / n - 1.0).abs() < 0.15);

        // E'E / rows should be the identity.
        let e = structural_shocks(&fit).unwrap();
        let gram = e.t().dot(&e) / e.nrows() as f64;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[[i, j]] - want).abs() < 0.05,
                    "E'E/rows [{i},{j}] = {}",
                    gram[[i, j]]
                );
            }
        }

        // P P' reconstructs sigma.
        let chol = cholesky_lower(fit.sigma.view()).unwrap();
        let rec = chol.dot(&chol.t());
        for (u, v) in rec.iter().zip(fit.sigma.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn reordering_after_first_position_leaves_shock_unchanged() {
        let a = array![[0.4, 0.0, 0.1], [0.2, 0.3, 0.0], [0.0, 0.1, 0.5]];
        let p0 = array![[0.9, 0.0, 0.0], [0.5, 0.7, 0.0], [-0.3, 0.2, 0.8]];
        let (data, _) = simulate_var1(&a, &p0, 800, 21);

        let fit = fit_var_ols(data.view(), &spec(3, 1)).unwrap();
        let base = extract_shock(&fit, 1).unwrap();

        // Swap columns 1 and 2 (keeping the instrument first).
        let mut swapped = data.clone();
        let col1 = data.column(1).to_owned();
        let col2 = data.column(2).to_owned();
        swapped.column_mut(1).assign(&col2);
        swapped.column_mut(2).assign(&col1);
        let fit2 = fit_var_ols(swapped.view(), &spec(3, 1)).unwrap();
        let alt = extract_shock(&fit2, 1).unwrap();

        for t in 0..base.zeta.len() {
            assert!(
                (base.zeta[t] - alt.zeta[t]).abs() < 1e-10,
                "shock at {t} changed under reordering"
            );
        }
    }

    #[test]
    fn rank_deficiency_names_column() {
        // Duplicate a column so the design is singular.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut data = Array2::<f64>::zeros((60, 2));
        for t in 0..60 {
            let v: f64 = StandardNormal.sample(&mut rng);
            data[[t, 0]] = v;
            data[[t, 1]] = 2.0 * v;
        }
        let err = fit_var_ols(data.view(), &spec(2, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rank deficient"), "message: {msg}");
        assert!(msg.contains("lag 1"), "message: {msg}");
    }

    #[test]
    fn too_short_sample_rejected() {
        let data = Array2::<f64>::zeros((5, 3));
        assert!(fit_var_ols(data.view(), &spec(3, 2)).is_err());
    }
}
