//! Optimal Gaussians inside constrained families.
//!
//! Each family restricts the mean (free or fixed at `m`) and the covariance
//! (full, diagonal or isotropic). For every family the optimum has a closed
//! form in terms of `m_Y`, `Σ_Y` and `d = m - m_Y`:
//!
//! | family                 | covariance                 | match `M(Y‖F)`                                  |
//! |------------------------|----------------------------|-------------------------------------------------|
//! | full                   | `Σ_Y`                      | `0`                                             |
//! | fixed mean             | `Σ_Y + d·dᵀ`               | `½·ln(1 + ‖d‖²_{Σ_Y})`                          |
//! | isotropic              | `tr(Σ_Y)/N · I`            | `N/2·ln(tr Σ_Y / N) - ½·ln det Σ_Y`             |
//! | fixed mean, isotropic  | `(tr Σ_Y + ‖d‖²)/N · I`    | `N/2·ln((tr Σ_Y + ‖d‖²)/N) - ½·ln det Σ_Y`      |
//! | diagonal               | `diag(Σ_Y)`                | `½·Σ ln (Σ_Y)ᵢᵢ - ½·ln det Σ_Y`                 |
//! | fixed mean, diagonal   | `diag((Σ_Y)ᵢᵢ + dᵢ²)`      | `½·Σ ln((Σ_Y)ᵢᵢ + dᵢ²) - ½·ln det Σ_Y`          |
//!
//! The fitted covariance for a fixed mean is the second moment of the data
//! about `m`. It coincides with `Σ_Y (Σ_Y - d·dᵀ/(1 + ‖d‖²_{Σ_Y}))⁻¹ Σ_Y` by
//! Sherman–Morrison; [`fixed_mean_covariance_by_inversion`] evaluates that
//! second form for cross-checking.

use crate::error::{Error, Result};
use crate::gaussmodel::{GaussianModel, Moments, PointSet};
use crate::linalg::{self, check_spd, spd_power, sym_eigen, SymMatrix};
use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyKind {
    Full,
    FixedMean,
    Isotropic,
    FixedMeanIsotropic,
    Diagonal,
    FixedMeanDiagonal,
}

impl FamilyKind {
    /// Report order.
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::Full,
        FamilyKind::FixedMean,
        FamilyKind::Isotropic,
        FamilyKind::FixedMeanIsotropic,
        FamilyKind::Diagonal,
        FamilyKind::FixedMeanDiagonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Full => "full",
            FamilyKind::FixedMean => "fixed-mean",
            FamilyKind::Isotropic => "isotropic",
            FamilyKind::FixedMeanIsotropic => "fixed-mean-isotropic",
            FamilyKind::Diagonal => "diagonal",
            FamilyKind::FixedMeanDiagonal => "fixed-mean-diagonal",
        }
    }

    pub fn has_fixed_mean(self) -> bool {
        matches!(
            self,
            FamilyKind::FixedMean | FamilyKind::FixedMeanIsotropic | FamilyKind::FixedMeanDiagonal
        )
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown family '{s}'")))
    }
}

/// A Gaussian family, carrying the fixed mean for the `FixedMean*` kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    Full,
    FixedMean(Vec<f64>),
    Isotropic,
    FixedMeanIsotropic(Vec<f64>),
    Diagonal,
    FixedMeanDiagonal(Vec<f64>),
}

impl FamilySpec {
    /// Pairs a kind with a mean; the mean must be present exactly for the
    /// fixed-mean kinds.
    pub fn new(kind: FamilyKind, fixed_mean: Option<Vec<f64>>) -> Result<Self> {
        match (kind, fixed_mean) {
            (FamilyKind::Full, None) => Ok(FamilySpec::Full),
            (FamilyKind::Isotropic, None) => Ok(FamilySpec::Isotropic),
            (FamilyKind::Diagonal, None) => Ok(FamilySpec::Diagonal),
            (FamilyKind::FixedMean, Some(m)) => Ok(FamilySpec::FixedMean(m)),
            (FamilyKind::FixedMeanIsotropic, Some(m)) => Ok(FamilySpec::FixedMeanIsotropic(m)),
            (FamilyKind::FixedMeanDiagonal, Some(m)) => Ok(FamilySpec::FixedMeanDiagonal(m)),
            (kind, Some(_)) => Err(Error::InvalidInput(format!(
                "family '{kind}' does not take a fixed mean"
            ))),
            (kind, None) => Err(Error::InvalidInput(format!(
                "family '{kind}' requires a fixed mean"
            ))),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            FamilySpec::Full => FamilyKind::Full,
            FamilySpec::FixedMean(_) => FamilyKind::FixedMean,
            FamilySpec::Isotropic => FamilyKind::Isotropic,
            FamilySpec::FixedMeanIsotropic(_) => FamilyKind::FixedMeanIsotropic,
            FamilySpec::Diagonal => FamilyKind::Diagonal,
            FamilySpec::FixedMeanDiagonal(_) => FamilyKind::FixedMeanDiagonal,
        }
    }

    pub fn fixed_mean(&self) -> Option<&[f64]> {
        match self {
            FamilySpec::FixedMean(m)
            | FamilySpec::FixedMeanIsotropic(m)
            | FamilySpec::FixedMeanDiagonal(m) => Some(m),
            _ => None,
        }
    }
}

/// Optimal model within a family together with its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: GaussianModel,
    /// `M(Y‖F)`.
    pub match_score: f64,
    /// `H×(Y‖F)`.
    pub cross_entropy: f64,
    pub family: FamilySpec,
}

/// The affine map `y ↦ Σ^{-1/2}(y - m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescalingTransform {
    pub shift: Vec<f64>,
    pub root_inv_cov: SymMatrix,
}

impl RescalingTransform {
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.shift.len() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, transform expects {}",
                y.len(),
                self.shift.len()
            )));
        }
        self.root_inv_cov.as_matrix().matvec(&linalg::sub(y, &self.shift))
    }

    pub fn apply_all(&self, y: &PointSet) -> Result<PointSet> {
        let rows = y.iter().map(|p| self.apply(p)).collect::<Result<Vec<_>>>()?;
        PointSet::from_rows(&rows)
    }
}

/// `Σ^{-1/2}` and shift `m` for the model's coordinate system.
pub fn whitening_transform(g: &GaussianModel) -> Result<RescalingTransform> {
    Ok(RescalingTransform {
        shift: g.mean().to_vec(),
        root_inv_cov: spd_power(g.cov(), -0.5)?,
    })
}

/// Quantities of `Σ_Y` reused across the fits of one dataset.
struct DataSpectrum<'a> {
    mom: &'a Moments,
    inv: SymMatrix,
    log_det: f64,
    /// `H×(Y‖N_Y)`
    self_entropy: f64,
}

impl<'a> DataSpectrum<'a> {
    fn of(mom: &'a Moments) -> Result<Self> {
        let eig = sym_eigen(&mom.cov)?;
        check_spd(&eig, mom.cov.trace())?;
        let log_det = eig.log_det();
        let n = mom.dim() as f64;
        Ok(Self {
            mom,
            inv: eig.power(-1.0),
            log_det,
            self_entropy: 0.5 * n * (2.0 * PI * E).ln() + 0.5 * log_det,
        })
    }

    fn offset(&self, m: &[f64]) -> Result<Vec<f64>> {
        if m.len() != self.mom.dim() {
            return Err(Error::InvalidInput(format!(
                "fixed mean has length {}, data has dimension {}",
                m.len(),
                self.mom.dim()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("fixed mean has non-finite entries".into()));
        }
        Ok(linalg::sub(m, &self.mom.mean))
    }

    fn result(&self, model: GaussianModel, match_score: f64, family: FamilySpec) -> FitResult {
        FitResult {
            model,
            match_score,
            cross_entropy: self.self_entropy + match_score,
            family,
        }
    }

    fn full(&self) -> Result<FitResult> {
        let model = GaussianModel::from_checked_parts(self.mom.mean.clone(), self.mom.cov.clone());
        Ok(self.result(model, 0.0, FamilySpec::Full))
    }

    fn fixed_mean(&self, m: &[f64]) -> Result<FitResult> {
        let d = self.offset(m)?;
        let maha = self.inv.quad_form(&d)?.max(0.0);
        let cov = self.mom.cov.rank_one_update(&d, 1.0)?;
        let model = GaussianModel::new(m.to_vec(), cov)?;
        Ok(self.result(model, 0.5 * maha.ln_1p(), FamilySpec::FixedMean(m.to_vec())))
    }

    fn isotropic_with(&self, m: Vec<f64>, d: &[f64], family: FamilySpec) -> Result<FitResult> {
        let n = self.mom.dim();
        let s = (self.mom.cov.trace() + linalg::norm_sq(d)) / n as f64;
        let score = 0.5 * n as f64 * s.ln() - 0.5 * self.log_det;
        let model = GaussianModel::new(m, SymMatrix::scaled_identity(n, s))?;
        Ok(self.result(model, score, family))
    }

    fn diagonal_with(&self, m: Vec<f64>, d: &[f64], family: FamilySpec) -> Result<FitResult> {
        let s: Vec<f64> = self
            .mom
            .cov
            .diag()
            .iter()
            .zip(d)
            .map(|(v, di)| v + di * di)
            .collect();
        let score = 0.5 * s.iter().map(|x| x.ln()).sum::<f64>() - 0.5 * self.log_det;
        let model = GaussianModel::new(m, SymMatrix::diagonal(&s))?;
        Ok(self.result(model, score, family))
    }

    fn fit(&self, spec: &FamilySpec) -> Result<FitResult> {
        let zeros = vec![0.0; self.mom.dim()];
        match spec {
            FamilySpec::Full => self.full(),
            FamilySpec::FixedMean(m) => self.fixed_mean(m),
            FamilySpec::Isotropic => {
                self.isotropic_with(self.mom.mean.clone(), &zeros, spec.clone())
            }
            FamilySpec::FixedMeanIsotropic(m) => {
                let d = self.offset(m)?;
                self.isotropic_with(m.clone(), &d, spec.clone())
            }
            FamilySpec::Diagonal => self.diagonal_with(self.mom.mean.clone(), &zeros, spec.clone()),
            FamilySpec::FixedMeanDiagonal(m) => {
                let d = self.offset(m)?;
                self.diagonal_with(m.clone(), &d, spec.clone())
            }
        }
    }
}

/// Unconstrained optimum: the data's own Gaussian, with `M = 0`.
pub fn fit_full(mom: &Moments) -> Result<FitResult> {
    DataSpectrum::of(mom)?.full()
}

/// Optimum with mean fixed at `m`: covariance `Σ_Y + d·dᵀ`,
/// `M = ½·ln(1 + ‖m - m_Y‖²_{Σ_Y})`.
pub fn fit_fixed_mean(mom: &Moments, m: &[f64]) -> Result<FitResult> {
    DataSpectrum::of(mom)?.fixed_mean(m)
}

/// Optimum over `N(μ, s·I)`: `μ = m_Y`, `s = tr(Σ_Y)/N`.
pub fn fit_isotropic(mom: &Moments) -> Result<FitResult> {
    DataSpectrum::of(mom)?.fit(&FamilySpec::Isotropic)
}

/// Optimum over `N(m, s·I)`: `s = (tr(Σ_Y) + ‖m - m_Y‖²)/N`.
pub fn fit_fixed_mean_isotropic(mom: &Moments, m: &[f64]) -> Result<FitResult> {
    DataSpectrum::of(mom)?.fit(&FamilySpec::FixedMeanIsotropic(m.to_vec()))
}

/// Optimum over diagonal covariances with free mean: `diag(Σ_Y)` at `m_Y`.
pub fn fit_diagonal(mom: &Moments) -> Result<FitResult> {
    DataSpectrum::of(mom)?.fit(&FamilySpec::Diagonal)
}

/// Optimum over `N(m, diag(s))`: `sᵢ = (Σ_Y)ᵢᵢ + (mᵢ - (m_Y)ᵢ)²`.
pub fn fit_fixed_mean_diagonal(mom: &Moments, m: &[f64]) -> Result<FitResult> {
    DataSpectrum::of(mom)?.fit(&FamilySpec::FixedMeanDiagonal(m.to_vec()))
}

pub fn fit(mom: &Moments, spec: &FamilySpec) -> Result<FitResult> {
    DataSpectrum::of(mom)?.fit(spec)
}

/// `Σ_Y (Σ_Y - d·dᵀ/(1 + ‖d‖²_{Σ_Y}))⁻¹ Σ_Y` with `d = m - m_Y`.
///
/// Equal to the covariance chosen by [`fit_fixed_mean`]; computed through
/// the explicit inverse, so it loses accuracy as `‖d‖` grows.
pub fn fixed_mean_covariance_by_inversion(mom: &Moments, m: &[f64]) -> Result<SymMatrix> {
    let spectrum = DataSpectrum::of(mom)?;
    let d = spectrum.offset(m)?;
    let maha = spectrum.inv.quad_form(&d)?.max(0.0);
    let inner = mom.cov.rank_one_update(&d, -1.0 / (1.0 + maha))?;
    let inner_inv = spd_power(&inner, -1.0)?;
    let cov = mom.cov.as_matrix();
    let product = cov.matmul(inner_inv.as_matrix())?.matmul(cov)?;
    SymMatrix::from_matrix(product)
}

/// One line of a family report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub family: FamilyKind,
    /// Index into the requested means, for fixed-mean families.
    pub mean_index: Option<usize>,
    pub match_score: f64,
    pub cross_entropy: f64,
}

/// Scores for all six families; fixed-mean families get one row per entry
/// of `means`. Rows follow [`FamilyKind::ALL`], then the order of `means`.
pub fn family_report(mom: &Moments, means: &[Vec<f64>]) -> Result<Vec<ReportRow>> {
    let spectrum = DataSpectrum::of(mom)?;
    let mut rows = Vec::new();
    for kind in FamilyKind::ALL {
        let specs: Vec<(Option<usize>, FamilySpec)> = if kind.has_fixed_mean() {
            means
                .iter()
                .enumerate()
                .map(|(i, m)| Ok((Some(i), FamilySpec::new(kind, Some(m.clone()))?)))
                .collect::<Result<_>>()?
        } else {
            vec![(None, FamilySpec::new(kind, None)?)]
        };
        for (mean_index, spec) in specs {
            let fit = spectrum.fit(&spec)?;
            rows.push(ReportRow {
                family: kind,
                mean_index,
                match_score: fit.match_score,
                cross_entropy: fit.cross_entropy,
            });
        }
    }
    Ok(rows)
}
