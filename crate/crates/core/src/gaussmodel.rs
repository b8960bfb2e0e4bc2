//! Dataset moments and Gaussian cross-entropy.
//!
//! For a finite dataset `Y` the cross-entropy against a density `f` is the
//! mean negative log-density `(1/n) Σ -ln f(yᵢ)`. For a Gaussian `f` it only
//! depends on the sample mean and the MLE covariance (divisor `n`):
//!
//! ```text
//! H×(Y‖N(m,Σ)) = N/2·ln(2π) + ½‖m - m_Y‖²_Σ + ½·tr(Σ⁻¹Σ_Y) + ½·ln det Σ
//! H×(Y‖N_Y)    = N/2·ln(2πe) + ½·ln det Σ_Y
//! ```
//!
//! The match score `M(Y‖f)` is the gap between the two; it is zero exactly
//! at the data's own Gaussian.

use crate::error::{Error, Result};
use crate::linalg::{self, check_spd, sym_eigen, EigenDecomposition, Matrix, SymMatrix};
use std::f64::consts::{E, PI};

/// The dataset `Y`: `n ≥ 2` finite points in `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Matrix,
}

impl PointSet {
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() < 2 {
            return Err(Error::InsufficientData { n: points.rows() });
        }
        if points.cols() == 0 {
            return Err(Error::InvalidInput("points must have at least one coordinate".into()));
        }
        if !points.is_finite() {
            return Err(Error::InvalidInput("points contain non-finite values".into()));
        }
        Ok(Self { points })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.row_iter()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.points
    }
}

/// Sample mean `m_Y` and MLE covariance `Σ_Y` of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

impl Moments {
    /// Moments given directly, e.g. population parameters.
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::InvalidInput(format!(
                "mean has length {}, covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) || !cov.is_finite() {
            return Err(Error::InvalidInput("moments contain non-finite values".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Mean and covariance (divisor `n`) of `y`.
pub fn estimate_moments(y: &PointSet) -> Result<Moments> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData { n });
    }
    let dim = y.dim();
    let mut mean = vec![0.0; dim];
    for p in y.iter() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    let inv_n = 1.0 / n as f64;
    mean.iter_mut().for_each(|m| *m *= inv_n);

    let mut cov = Matrix::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for p in y.iter() {
        for ((c, x), m) in centered.iter_mut().zip(p).zip(&mean) {
            *c = x - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            for j in i..dim {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] * inv_n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Moments::new(mean, SymMatrix::from_matrix(cov)?)
}

/// Gaussian density `N(m, Σ)` with SPD covariance; identifies a coordinate
/// system with origin `m` and basis given by the columns of `Σ^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: Vec<f64>,
    cov: SymMatrix,
}

impl GaussianModel {
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::InvalidInput(format!(
                "mean has length {}, covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("mean has non-finite entries".into()));
        }
        let eig = sym_eigen(&cov)?;
        check_spd(&eig, cov.trace())?;
        Ok(Self { mean, cov })
    }

    /// Skips validation; `cov` must already have passed the SPD check.
    pub(crate) fn from_checked_parts(mean: Vec<f64>, cov: SymMatrix) -> Self {
        Self { mean, cov }
    }

    /// The data's own Gaussian `N(m_Y, Σ_Y)`.
    pub fn from_moments(mom: &Moments) -> Result<Self> {
        Self::new(mom.mean.clone(), mom.cov.clone())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Squared Mahalanobis norm `vᵀ S⁻¹ v`.
pub fn mahalanobis_sq(v: &[f64], s: &SymMatrix) -> Result<f64> {
    if v.len() != s.dim() {
        return Err(Error::InvalidInput(format!(
            "vector of length {} does not match dimension {}",
            v.len(),
            s.dim()
        )));
    }
    let inv = linalg::spd_power(s, -1.0)?;
    Ok(inv.quad_form(v)?.max(0.0))
}

/// Spectral data of a model covariance shared by the evaluations below:
/// `Σ⁻¹` and `ln det Σ` from one eigendecomposition.
struct ModelSpectrum {
    inv: SymMatrix,
    log_det: f64,
}

impl ModelSpectrum {
    fn of(cov: &SymMatrix) -> Result<Self> {
        let eig = spd_eigen(cov)?;
        Ok(Self {
            inv: eig.power(-1.0),
            log_det: eig.log_det(),
        })
    }
}

fn spd_eigen(cov: &SymMatrix) -> Result<EigenDecomposition> {
    let eig = sym_eigen(cov)?;
    check_spd(&eig, cov.trace())?;
    Ok(eig)
}

fn check_dims(mom: &Moments, g: &GaussianModel) -> Result<()> {
    if mom.dim() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "moments have dimension {}, model has dimension {}",
            mom.dim(),
            g.dim()
        )));
    }
    Ok(())
}

/// `tr(A·B)` for symmetric `A`, `B`.
fn trace_of_product(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Closed-form `H×(Y‖N(m,Σ))` from the moments of `Y`.
pub fn cross_entropy(mom: &Moments, g: &GaussianModel) -> Result<f64> {
    check_dims(mom, g)?;
    let n = mom.dim() as f64;
    let spec = ModelSpectrum::of(g.cov())?;
    let d = linalg::sub(g.mean(), &mom.mean);
    let maha = spec.inv.quad_form(&d)?;
    let tr = trace_of_product(&spec.inv, &mom.cov);
    Ok(0.5 * n * (2.0 * PI).ln() + 0.5 * maha + 0.5 * tr + 0.5 * spec.log_det)
}

/// `ln det Σ_Y`, failing if `Σ_Y` is singular.
pub fn log_det_cov(mom: &Moments) -> Result<f64> {
    Ok(spd_eigen(&mom.cov)?.log_det())
}

/// `H×(Y‖N_Y) = N/2·ln(2πe) + ½·ln det Σ_Y`.
pub fn self_cross_entropy(mom: &Moments) -> Result<f64> {
    let n = mom.dim() as f64;
    Ok(0.5 * n * (2.0 * PI * E).ln() + 0.5 * log_det_cov(mom)?)
}

/// Match score `M(Y‖N(m,Σ)) = ½(‖m-m_Y‖²_Σ + tr(Σ⁻¹Σ_Y) - ln det(Σ⁻¹Σ_Y) - N)`.
pub fn match_score(mom: &Moments, g: &GaussianModel) -> Result<f64> {
    check_dims(mom, g)?;
    let n = mom.dim() as f64;
    let spec = ModelSpectrum::of(g.cov())?;
    let data_log_det = log_det_cov(mom)?;
    let d = linalg::sub(g.mean(), &mom.mean);
    let maha = spec.inv.quad_form(&d)?;
    let tr = trace_of_product(&spec.inv, &mom.cov);
    let log_det_ratio = data_log_det - spec.log_det;
    Ok(0.5 * (maha + tr - log_det_ratio - n))
}
