//! One-factor extraction by iterated principal factoring.

use nalgebra::{DMatrix, SymmetricEigen};

use super::PsychometricsError;

const MAX_ITERATIONS: usize = 500;
const CONVERGENCE_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-8;
/// A uniqueness within this distance of zero marks a Heywood boundary.
const HEYWOOD_TOL: f64 = 1e-10;

/// A fitted one-factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorFit {
    pub loadings: Vec<f64>,
    pub uniquenesses: Vec<f64>,
    /// Root mean square residual over the off-diagonal entries.
    pub rmsr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A uniqueness was driven to the zero boundary during fitting.
    pub heywood: bool,
}

/// Fits a single factor to a covariance (or correlation) matrix by
/// least squares on the off-diagonal entries, via iterated principal
/// factoring: replace the diagonal with communalities, take the leading
/// eigenpair, update, repeat until the largest loading change falls below
/// `1e-8` or 500 iterations pass.
///
/// Heywood cases (a uniqueness driven to zero) are reported as an error
/// carrying the boundary solution; use [`fit_one_factor_lenient`] to accept
/// them flagged.
pub fn fit_one_factor(cov: &DMatrix<f64>) -> Result<FactorFit, PsychometricsError> {
    let fit = fit_one_factor_lenient(cov)?;
    if fit.heywood {
        return Err(PsychometricsError::HeywoodCase(Box::new(fit)));
    }
    Ok(fit)
}

/// [`fit_one_factor`] but Heywood solutions come back as `Ok` with the
/// `heywood` flag set (uniquenesses clipped at exactly zero).
pub fn fit_one_factor_lenient(cov: &DMatrix<f64>) -> Result<FactorFit, PsychometricsError> {
    let p = cov.nrows();
    if cov.ncols() != p || p < 3 {
        return Err(PsychometricsError::DimensionTooSmall {
            dim: p.min(cov.ncols()),
        });
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..p {
        for j in (i + 1)..p {
            if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(PsychometricsError::NonPsdInput);
            }
        }
    }
    let eigen_check = SymmetricEigen::new(cov.clone());
    if eigen_check.eigenvalues.iter().any(|&e| e < -PSD_TOL * scale) {
        return Err(PsychometricsError::NonPsdInput);
    }

    // Initial communalities: largest absolute off-diagonal per row.
    let mut communalities: Vec<f64> = (0..p)
        .map(|i| {
            (0..p)
                .filter(|&j| j != i)
                .map(|j| cov[(i, j)].abs())
                .fold(0.0f64, f64::max)
                .min(cov[(i, i)])
        })
        .collect();

    let mut loadings = vec![0.0f64; p];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut reduced = cov.clone();
        for i in 0..p {
            reduced[(i, i)] = communalities[i];
        }
        let eigen = SymmetricEigen::new(reduced);
        let (mut top, mut top_val) = (0usize, f64::NEG_INFINITY);
        for (i, &e) in eigen.eigenvalues.iter().enumerate() {
            if e > top_val {
                top_val = e;
                top = i;
            }
        }
        let mut new_loadings = vec![0.0f64; p];
        if top_val > 0.0 {
            let root = top_val.sqrt();
            for i in 0..p {
                new_loadings[i] = eigen.eigenvectors[(i, top)] * root;
            }
            if new_loadings.iter().sum::<f64>() < 0.0 {
                for l in &mut new_loadings {
                    *l = -*l;
                }
            }
        }
        let delta = loadings
            .iter()
            .zip(&new_loadings)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        loadings = new_loadings;
        for i in 0..p {
            communalities[i] = (loadings[i] * loadings[i]).min(cov[(i, i)]);
        }
        if delta < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }

    let mut heywood = false;
    let uniquenesses: Vec<f64> = (0..p)
        .map(|i| {
            let psi = cov[(i, i)] - loadings[i] * loadings[i];
            if psi <= HEYWOOD_TOL {
                heywood = true;
                psi.max(0.0)
            } else {
                psi
            }
        })
        .collect();

    let mut ss = 0.0;
    let mut pairs = 0usize;
    for i in 0..p {
        for j in (i + 1)..p {
            let resid = cov[(i, j)] - loadings[i] * loadings[j];
            ss += resid * resid;
            pairs += 1;
        }
    }
    let rmsr = (ss / pairs as f64).sqrt();

    Ok(FactorFit {
        loadings,
        uniquenesses,
        rmsr,
        iterations,
        converged,
        heywood,
    })
}

/// `loadings loadingsᵀ + diag(uniquenesses)`.
pub fn implied_covariance(
    loadings: &[f64],
    uniquenesses: &[f64],
) -> Result<DMatrix<f64>, PsychometricsError> {
    if loadings.len() != uniquenesses.len() {
        return Err(PsychometricsError::WeightLengthMismatch {
            expected: loadings.len(),
            got: uniquenesses.len(),
        });
    }
    if let Some(index) = uniquenesses.iter().position(|&u| u < 0.0) {
        return Err(PsychometricsError::NegativeUniqueness { index });
    }
    let p = loadings.len();
    let mut out = DMatrix::from_fn(p, p, |i, j| loadings[i] * loadings[j]);
    for i in 0..p {
        out[(i, i)] += uniquenesses[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOADINGS: [f64; 4] = [0.9, 0.8, 0.7, 0.6];

    fn population_matrix() -> DMatrix<f64> {
        let psi: Vec<f64> = LOADINGS.iter().map(|l| 1.0 - l * l).collect();
        implied_covariance(&LOADINGS, &psi).unwrap()
    }

    #[test]
    fn recovers_population_loadings() {
        let fit = fit_one_factor(&population_matrix()).unwrap();
        for (got, want) in fit.loadings.iter().zip(LOADINGS) {
            assert!((got - want).abs() < 1e-6, "loading {got} vs {want}");
        }
        assert!(fit.converged);
        assert!(fit.rmsr < 1e-8);
    }

    #[test]
    fn identity_covariance_has_no_common_factor() {
        let fit = fit_one_factor(&DMatrix::identity(4, 4)).unwrap();
        assert!(fit.loadings.iter().all(|&l| l.abs() < 1e-12));
        assert!(fit.uniquenesses.iter().all(|&u| (u - 1.0).abs() < 1e-12));
        assert!(fit.rmsr < 1e-12);
    }

    #[test]
    fn roundtrip_through_implied_covariance() {
        let psi = [0.19, 0.36, 0.51, 0.64];
        let sigma = implied_covariance(&LOADINGS, &psi).unwrap();
        assert!((sigma[(0, 1)] - 0.72).abs() < 1e-12);
        assert!((sigma[(0, 0)] - 1.0).abs() < 1e-12);
        let fit = fit_one_factor(&sigma).unwrap();
        for (got, want) in fit.loadings.iter().zip(LOADINGS) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_loadings_round_trip() {
        let sigma = implied_covariance(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(sigma, DMatrix::identity(3, 3));
    }

    #[test]
    fn sign_invariance_of_rmsr() {
        let m = population_matrix();
        let mut flipped = m.clone();
        // Negate the first indicator: flip its row and column off-diagonals.
        for j in 1..4 {
            flipped[(0, j)] = -flipped[(0, j)];
            flipped[(j, 0)] = -flipped[(j, 0)];
        }
        let a = fit_one_factor(&m).unwrap();
        let b = fit_one_factor(&flipped).unwrap();
        assert!((a.rmsr - b.rmsr).abs() < 1e-10);
    }

    #[test]
    fn dimension_guard() {
        let m = DMatrix::identity(2, 2);
        assert!(matches!(
            fit_one_factor(&m),
            Err(PsychometricsError::DimensionTooSmall { dim: 2 })
        ));
    }

    #[test]
    fn non_psd_rejected() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 2.0;
        m[(1, 0)] = 2.0;
        assert!(matches!(
            fit_one_factor(&m),
            Err(PsychometricsError::NonPsdInput)
        ));
    }

    #[test]
    fn heywood_is_reported_not_swallowed() {
        // Rank-one correlation matrix: every uniqueness sits at zero.
        let ones = DMatrix::from_element(3, 3, 1.0);
        match fit_one_factor(&ones) {
            Err(PsychometricsError::HeywoodCase(fit)) => {
                assert!(fit.heywood);
                assert!(fit.uniquenesses.iter().all(|&u| u == 0.0));
            }
            other => panic!("expected a Heywood report, got {other:?}"),
        }
        let lenient = fit_one_factor_lenient(&ones).unwrap();
        assert!(lenient.heywood);
    }

    #[test]
    fn negative_uniqueness_rejected() {
        assert!(matches!(
            implied_covariance(&[0.5, 0.5, 0.5], &[0.1, -0.2, 0.3]),
            Err(PsychometricsError::NegativeUniqueness { index: 1 })
        ));
    }
}
