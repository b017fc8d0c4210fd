//! The truncated model family and conversions between its parameterizations.
//!
//! A model is the density `f(y) = exp(-alpha*y - psi*y^2) / Z` on a finite
//! support `[y_min, y_max]`. For psi > 0 this is a truncated normal with
//! `mu = -(beta - 1) / (2 psi)` and `sigma = 1 / sqrt(2 psi)` where
//! `beta = alpha + 1`; for psi = 0 it collapses to a truncated exponential
//! in y, which is a truncated power law with exponent beta in x = e^y.
//! Negative psi is a legal density on a finite support even though no
//! untruncated counterpart exists.

use thiserror::Error;

use crate::estimator::SampleMoments;
use crate::quadrature::{self, Interval, QuadratureConfig, QuadratureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite parameter: alpha = {alpha}, psi = {psi}")]
    NonFiniteParameter { alpha: f64, psi: f64 },
    #[error("y = {y} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { y: f64, lo: f64, hi: f64 },
    #[error(
        "psi = {psi} is not strictly positive, so mu and sigma are undefined; \
         the distribution is a pure power law with exponent beta = {beta}"
    )]
    PowerLawLimit { psi: f64, beta: f64 },
    #[error("sigma must be strictly positive and finite, got {sigma}")]
    InvalidSigma { sigma: f64 },
    #[error("support bound y = {bound} does not exponentiate to a finite x")]
    OverflowBounds { bound: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Truncated density `exp(-alpha*y - psi*y^2) / Z` on a finite support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedModel {
    alpha: f64,
    psi: f64,
    support: Interval,
}

/// Location-scale view of a model with psi > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardParams {
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
}

/// First four moments of y under the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMoments {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

/// The same model read as a distribution of x = e^y: a truncated lognormal,
/// or a truncated power law `x^{-beta}` when psi = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalView {
    pub beta: f64,
    pub psi: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl TruncatedModel {
    pub fn new(alpha: f64, psi: f64, support: Interval) -> Result<Self, ModelError> {
        if !alpha.is_finite() || !psi.is_finite() {
            return Err(ModelError::NonFiniteParameter { alpha, psi });
        }
        Ok(Self {
            alpha,
            psi,
            support,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Power-law exponent of the x = e^y view.
    pub fn beta(&self) -> f64 {
        self.alpha + 1.0
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    /// `log Z` for this model, computed through the shifted quadrature so
    /// it stays finite far outside the range where `exp` is representable.
    pub fn log_normalizer(&self, cfg: &QuadratureConfig) -> Result<f64, ModelError> {
        let (log_z, _) =
            quadrature::shifted_log_normalizer(self.alpha, self.psi, self.support, cfg)?;
        Ok(log_z)
    }

    /// Log density at a point inside the support.
    pub fn log_density(&self, y: f64, cfg: &QuadratureConfig) -> Result<f64, ModelError> {
        if !self.support.contains(y) {
            return Err(ModelError::OutOfSupport {
                y,
                lo: self.support.lo(),
                hi: self.support.hi(),
            });
        }
        let log_z = self.log_normalizer(cfg)?;
        Ok(-self.alpha * y - self.psi * y * y - log_z)
    }

    /// Total sample log likelihood. The density is log-linear in the
    /// parameters, so the sum collapses onto the first two sample moments:
    /// `L = n * (-alpha*m1 - psi*m2 - log Z)`.
    pub fn log_likelihood(
        &self,
        moments: &SampleMoments,
        cfg: &QuadratureConfig,
    ) -> Result<f64, ModelError> {
        let log_z = self.log_normalizer(cfg)?;
        let n = moments.len() as f64;
        Ok(n * (-self.alpha * moments.m1() - self.psi * moments.m2() - log_z))
    }

    /// First four moments of y under the model, as ratios of the shifted
    /// power integrals. The shift cancels in every ratio.
    pub fn moments(&self, cfg: &QuadratureConfig) -> Result<ModelMoments, ModelError> {
        let (ints, _) = quadrature::exp_poly_integrals(self.alpha, self.psi, self.support, cfg)?;
        Ok(ModelMoments {
            e1: ints[1] / ints[0],
            e2: ints[2] / ints[0],
            e3: ints[3] / ints[0],
            e4: ints[4] / ints[0],
        })
    }

    /// Location-scale parameters of the underlying normal. Defined only
    /// for psi > 0; otherwise reports the power-law limit, carrying beta
    /// so callers can describe the degenerate case.
    pub fn to_standard(&self) -> Result<StandardParams, ModelError> {
        let beta = self.beta();
        if self.psi <= 0.0 {
            return Err(ModelError::PowerLawLimit {
                psi: self.psi,
                beta,
            });
        }
        Ok(StandardParams {
            mu: -(beta - 1.0) / (2.0 * self.psi),
            sigma: 1.0 / (2.0 * self.psi).sqrt(),
            beta,
        })
    }

    /// The model as a distribution of x = e^y on exponentiated bounds.
    pub fn lognormal_view(&self) -> Result<LognormalView, ModelError> {
        let x_min = self.support.lo().exp();
        let x_max = self.support.hi().exp();
        if !x_max.is_finite() {
            return Err(ModelError::OverflowBounds {
                bound: self.support.hi(),
            });
        }
        Ok(LognormalView {
            beta: self.beta(),
            psi: self.psi,
            x_min,
            x_max,
        })
    }
}

/// Model with a given normal location and scale on the given support.
/// Inverts the identities `sigma = 1/sqrt(2 psi)` and `mu = -alpha/(2 psi)`.
pub fn from_standard(mu: f64, sigma: f64, support: Interval) -> Result<TruncatedModel, ModelError> {
    if sigma <= 0.0 || !sigma.is_finite() || !mu.is_finite() {
        return Err(ModelError::InvalidSigma { sigma });
    }
    let psi = 1.0 / (2.0 * sigma * sigma);
    let alpha = -2.0 * psi * mu;
    TruncatedModel::new(alpha, psi, support)
}
