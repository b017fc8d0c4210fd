//! Iterative maximum-likelihood fitting by moment matching.
//!
//! The log likelihood of the truncated family depends on the data only
//! through the first two sample moments, and its stationarity conditions
//! are `E(y) = m1`, `E(y^2) = m2`. The fixed-point iteration moves
//! `(alpha, psi)` by a damped Newton step whose Jacobian inverse has a
//! closed form in the first four sample moments, so the per-iteration cost
//! is one quadrature evaluation of the current model moments.
//!
//! Divergence is handled the blunt way: when an iterate stops being
//! finite, or the quadrature cannot resolve the integrand any more, the
//! step size is cut and the whole iteration restarts from initialization.

use thiserror::Error;

use crate::model::{StandardParams, TruncatedModel};
use crate::quadrature::{self, Interval, QuadratureConfig};

/// Below this working step size the backoff gives up.
const ETA_FLOOR: f64 = 1e-6;

/// Relative threshold on the coefficient denominator `h`.
const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Absolute threshold on the sample variance used by initialization.
const VARIANCE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample value at index {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("moments are not those of a finite sample: {reason}")]
    InvalidMoments { reason: String },
    #[error(
        "sample is degenerate: fewer than 3 distinct values, or (y, y^2) \
         numerically collinear"
    )]
    DegenerateSample,
    #[error(
        "sample moments m1 = {m1}, m2 = {m2} are inconsistent with the \
         support [{lo}, {hi}]"
    )]
    MomentsOutsideSupport { m1: f64, m2: f64, lo: f64, hi: f64 },
    #[error("iteration produced values the quadrature cannot evaluate")]
    StepOverflow,
    #[error("step size fell below {ETA_FLOOR} without a stable iteration")]
    EtaExhausted,
    #[error("invalid fit config: {reason}")]
    InvalidConfig { reason: String },
}

/// Power means of a sample: `mk` is the mean of `y^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    n: usize,
    m1: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl SampleMoments {
    /// Moments supplied directly rather than from data. Checked against
    /// the power-mean inequalities every real sample satisfies.
    pub fn new(n: usize, m1: f64, m2: f64, m3: f64, m4: f64) -> Result<Self, FitError> {
        if n == 0 {
            return Err(FitError::EmptySample);
        }
        for (name, v) in [("m1", m1), ("m2", m2), ("m3", m3), ("m4", m4)] {
            if !v.is_finite() {
                return Err(FitError::InvalidMoments {
                    reason: format!("{name} = {v} is not finite"),
                });
            }
        }
        let slack = 1e-12 * (1.0 + m2.abs()).powi(2);
        if m2 < m1 * m1 - slack || m4 < m2 * m2 - slack || m2 < 0.0 || m4 < 0.0 {
            return Err(FitError::InvalidMoments {
                reason: format!(
                    "power-mean inequalities violated (m1 = {m1}, m2 = {m2}, m4 = {m4})"
                ),
            });
        }
        Ok(Self { n, m1, m2, m3, m4 })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn m3(&self) -> f64 {
        self.m3
    }

    pub fn m4(&self) -> f64 {
        self.m4
    }

    /// Sample variance `m2 - m1^2`.
    pub fn variance(&self) -> f64 {
        self.m2 - self.m1 * self.m1
    }
}

/// Entries of the closed-form step matrix, all divided by `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub h: f64,
}

/// Iteration knobs. `tol_*` bound the step components at convergence;
/// `eta` is cut by `eta_backoff_factor` whenever the iteration leaves the
/// evaluable region, and the fit restarts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub eta: f64,
    pub tol_alpha: f64,
    pub tol_psi: f64,
    pub max_iterations: usize,
    pub eta_backoff_factor: f64,
    pub init_override: Option<(f64, f64)>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            eta: 0.33,
            tol_alpha: 1e-8,
            tol_psi: 1e-8,
            max_iterations: 10_000,
            eta_backoff_factor: 0.5,
            init_override: None,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<(), FitError> {
        let bad = |reason: String| Err(FitError::InvalidConfig { reason });
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.tol_alpha > 0.0 && self.tol_psi > 0.0) {
            return bad("tolerances must be positive".to_string());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".to_string());
        }
        if !(self.eta_backoff_factor > 0.0 && self.eta_backoff_factor < 1.0) {
            return bad(format!(
                "eta_backoff_factor must lie in (0, 1), got {}",
                self.eta_backoff_factor
            ));
        }
        Ok(())
    }
}

/// Everything a fit run produces. `converged = false` means the iteration
/// hit `max_iterations` while still moving; the fields then describe the
/// last iterate, not a solution.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: TruncatedModel,
    pub standard: Option<StandardParams>,
    pub converged: bool,
    pub iterations: usize,
    pub final_step: (f64, f64),
    pub log_likelihood: f64,
    pub moment_residuals: (f64, f64),
    pub eta_used: f64,
}

/// One proposed update: the damped deltas and the moment residuals they
/// were computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub delta_alpha: f64,
    pub delta_psi: f64,
    pub residuals: (f64, f64),
}

/// Power means of the sample for powers 1 through 4.
pub fn compute_moments(sample: &[f64]) -> Result<SampleMoments, FitError> {
    if sample.is_empty() {
        return Err(FitError::EmptySample);
    }
    let mut sums = [0.0f64; 4];
    for (index, &y) in sample.iter().enumerate() {
        if !y.is_finite() {
            return Err(FitError::NonFiniteValue { index });
        }
        let mut p = y;
        for s in &mut sums {
            *s += p;
            p *= y;
        }
    }
    let n = sample.len() as f64;
    Ok(SampleMoments {
        n: sample.len(),
        m1: sums[0] / n,
        m2: sums[1] / n,
        m3: sums[2] / n,
        m4: sums[3] / n,
    })
}

/// The step matrix `[[a, b], [b, c]]`, the negated inverse of the sample
/// covariance of `(y, y^2)`. Computed once per fit; `h` is its negated
/// determinant and is strictly negative for any sample with three or more
/// distinct values.
pub fn update_coefficients(s: &SampleMoments) -> Result<UpdateCoefficients, FitError> {
    let h = s.m4 * (s.m1 * s.m1 - s.m2) + s.m3 * (s.m3 - 2.0 * s.m1 * s.m2) + s.m2.powi(3);
    if h.abs() <= DEGENERACY_THRESHOLD * s.m2.powi(3).max(1.0) {
        return Err(FitError::DegenerateSample);
    }
    Ok(UpdateCoefficients {
        a: (s.m4 - s.m2 * s.m2) / h,
        b: (s.m1 * s.m2 - s.m3) / h,
        c: (s.m2 - s.m1 * s.m1) / h,
        h,
    })
}

/// Starting point: the untruncated-normal MLE for the sample, mapped into
/// `(alpha, psi)`. Exact when the support is wide enough to make
/// truncation irrelevant, and a serviceable warm start otherwise.
pub fn initialize(s: &SampleMoments) -> Result<(f64, f64), FitError> {
    let v = s.variance();
    if v <= VARIANCE_FLOOR {
        return Err(FitError::DegenerateSample);
    }
    Ok((-s.m1 / v, 1.0 / (2.0 * v)))
}

/// One damped update from `(alpha_j, psi_j)`: evaluates the model moments
/// there, forms the residuals against the sample moments, and applies the
/// closed-form step matrix scaled by `eta`.
pub fn step(
    alpha_j: f64,
    psi_j: f64,
    s: &SampleMoments,
    coef: &UpdateCoefficients,
    eta: f64,
    support: Interval,
    cfg: &QuadratureConfig,
) -> Result<StepResult, FitError> {
    assert!(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1), got {eta}");
    let (ints, _) = quadrature::exp_poly_integrals(alpha_j, psi_j, support, cfg)
        .map_err(|_| FitError::StepOverflow)?;
    let e1 = ints[1] / ints[0];
    let e2 = ints[2] / ints[0];
    let r1 = s.m1 - e1;
    let r2 = s.m2 - e2;
    Ok(StepResult {
        delta_alpha: eta * (coef.a * r1 + coef.b * r2),
        delta_psi: eta * (coef.b * r1 + coef.c * r2),
        residuals: (r1, r2),
    })
}

fn check_support_consistency(s: &SampleMoments, support: Interval) -> Result<(), FitError> {
    let (lo, hi) = (support.lo(), support.hi());
    let bound_sq = lo * lo + hi * hi;
    let slack = 1e-9 * (1.0 + bound_sq);
    let max_sq = (lo * lo).max(hi * hi);
    let min_sq = if support.contains(0.0) {
        0.0
    } else {
        (lo * lo).min(hi * hi)
    };
    let consistent = s.m1 >= lo - slack
        && s.m1 <= hi + slack
        && s.m2 <= max_sq + slack
        && s.m2 >= min_sq - slack;
    if consistent {
        Ok(())
    } else {
        Err(FitError::MomentsOutsideSupport {
            m1: s.m1,
            m2: s.m2,
            lo,
            hi,
        })
    }
}

enum Pass {
    Done(FitReport),
    Unstable,
}

/// Full fit of `(alpha, psi)`.
///
/// Iterates [`step`] from the initialization until both step components
/// fall below their tolerances or `max_iterations` is reached; the report
/// records which happened via `converged`. A step the quadrature cannot
/// evaluate, or one that leaves the finite floats, triggers the overflow
/// rule: `eta` is multiplied by `eta_backoff_factor` and the iteration
/// restarts, until `eta` falls below `1e-6` ([`FitError::EtaExhausted`]).
pub fn fit(
    s: &SampleMoments,
    support: Interval,
    fit_cfg: &FitConfig,
    quad_cfg: &QuadratureConfig,
) -> Result<FitReport, FitError> {
    fit_cfg.validate()?;
    if s.n < 3 {
        return Err(FitError::DegenerateSample);
    }
    check_support_consistency(s, support)?;
    let coef = update_coefficients(s)?;
    let init = match fit_cfg.init_override {
        Some(pair) => pair,
        None => initialize(s)?,
    };
    let full = |alpha: f64, psi: f64, eta: f64, cfg: &QuadratureConfig| {
        step(alpha, psi, s, &coef, eta, support, cfg)
    };
    run_damped(s, support, fit_cfg, quad_cfg, init, &full)
}

/// Constrained fit with `psi` pinned at zero: the exponential (in y) or
/// power-law (in x) member of the family. The update is the exact
/// one-dimensional analogue of the full step: the lone moment condition
/// is `E(y) = m1` and the Jacobian entry is `-(m2 - m1^2)`.
pub fn fit_exponential(
    s: &SampleMoments,
    support: Interval,
    fit_cfg: &FitConfig,
    quad_cfg: &QuadratureConfig,
) -> Result<FitReport, FitError> {
    fit_cfg.validate()?;
    if s.n < 3 {
        return Err(FitError::DegenerateSample);
    }
    check_support_consistency(s, support)?;
    let v = s.variance();
    if v <= DEGENERACY_THRESHOLD * s.m2.abs().max(1.0) {
        return Err(FitError::DegenerateSample);
    }
    let init = match fit_cfg.init_override {
        Some((alpha0, _)) => (alpha0, 0.0),
        None => (initialize(s)?.0, 0.0),
    };
    let constrained = |alpha: f64, _psi: f64, eta: f64, cfg: &QuadratureConfig| {
        let (ints, _) = quadrature::exp_poly_integrals(alpha, 0.0, support, cfg)
            .map_err(|_| FitError::StepOverflow)?;
        let e1 = ints[1] / ints[0];
        let e2 = ints[2] / ints[0];
        let r1 = s.m1 - e1;
        Ok(StepResult {
            delta_alpha: eta * r1 / (-v),
            delta_psi: 0.0,
            residuals: (r1, s.m2 - e2),
        })
    };
    run_damped(s, support, fit_cfg, quad_cfg, init, &constrained)
}

type StepFn<'a> = dyn Fn(f64, f64, f64, &QuadratureConfig) -> Result<StepResult, FitError> + 'a;

fn run_damped(
    s: &SampleMoments,
    support: Interval,
    fit_cfg: &FitConfig,
    quad_cfg: &QuadratureConfig,
    init: (f64, f64),
    propose: &StepFn,
) -> Result<FitReport, FitError> {
    let mut eta = fit_cfg.eta;
    loop {
        match one_pass(s, support, fit_cfg, quad_cfg, init, eta, propose)? {
            Pass::Done(report) => return Ok(report),
            Pass::Unstable => {
                eta *= fit_cfg.eta_backoff_factor;
                if eta < ETA_FLOOR {
                    return Err(FitError::EtaExhausted);
                }
            }
        }
    }
}

fn one_pass(
    s: &SampleMoments,
    support: Interval,
    fit_cfg: &FitConfig,
    quad_cfg: &QuadratureConfig,
    init: (f64, f64),
    eta: f64,
    propose: &StepFn,
) -> Result<Pass, FitError> {
    let (mut alpha, mut psi) = init;
    let mut iterations = 0;
    let mut last_step = (0.0, 0.0);
    let converged = loop {
        if iterations >= fit_cfg.max_iterations {
            break false;
        }
        let st = match propose(alpha, psi, eta, quad_cfg) {
            Ok(st) => st,
            Err(FitError::StepOverflow) => return Ok(Pass::Unstable),
            Err(other) => return Err(other),
        };
        alpha += st.delta_alpha;
        psi += st.delta_psi;
        iterations += 1;
        last_step = (st.delta_alpha, st.delta_psi);
        if !alpha.is_finite() || !psi.is_finite() {
            return Ok(Pass::Unstable);
        }
        if st.delta_alpha.abs() < fit_cfg.tol_alpha && st.delta_psi.abs() < fit_cfg.tol_psi {
            break true;
        }
    };
    match finish(
        s, support, alpha, psi, converged, iterations, last_step, eta, quad_cfg,
    ) {
        Some(report) => Ok(Pass::Done(report)),
        // The end state cannot even be evaluated; treat like overflow.
        None => Ok(Pass::Unstable),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    s: &SampleMoments,
    support: Interval,
    alpha: f64,
    psi: f64,
    converged: bool,
    iterations: usize,
    final_step: (f64, f64),
    eta_used: f64,
    quad_cfg: &QuadratureConfig,
) -> Option<FitReport> {
    let model = TruncatedModel::new(alpha, psi, support).ok()?;
    let moments = model.moments(quad_cfg).ok()?;
    let log_likelihood = model.log_likelihood(s, quad_cfg).ok()?;
    if !log_likelihood.is_finite() {
        return None;
    }
    Some(FitReport {
        standard: model.to_standard().ok(),
        model,
        converged,
        iterations,
        final_step,
        log_likelihood,
        moment_residuals: (s.m1 - moments.e1, s.m2 - moments.e2),
        eta_used,
    })
}
