//! Integrals of `u^k * exp(-alpha*u - psi*u^2)` over a finite interval.
//!
//! Every quantity the fitting machinery needs (normalization constants,
//! model moments) reduces to integrals of this one family for k = 0..4.
//! The exponent is always evaluated relative to its maximum over the
//! interval, so the integrand stays in [0, 1] and the normalizer can be
//! reported in log space for parameter values far outside the range where
//! `exp` would overflow.
//!
//! The rule is composite Gauss-Legendre over uniform panels. The panel
//! count is doubled until two successive estimates agree to the requested
//! relative tolerance; a hard cap on the panel count turns pathological
//! parameter combinations into [`QuadratureError::ToleranceNotReached`]
//! instead of a silent wrong answer.

use thiserror::Error;

/// Hard ceiling on the composite panel count. Doubling stops here.
const MAX_PANELS: usize = 1 << 17;

/// Maximum power of `u` supported by [`exp_poly_integral`].
pub const MAX_MOMENT_POWER: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("non-finite coefficient: alpha = {alpha}, psi = {psi}")]
    NonFiniteInput { alpha: f64, psi: f64 },
    #[error("invalid interval [{lo}, {hi}]: bounds must be finite with lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("invalid quadrature config: {reason}")]
    InvalidConfig { reason: String },
    #[error(
        "panel refinement stalled above relative tolerance {rel_tolerance} \
         (alpha = {alpha}, psi = {psi})"
    )]
    ToleranceNotReached {
        rel_tolerance: f64,
        alpha: f64,
        psi: f64,
    },
}

/// A finite interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, QuadratureError> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(QuadratureError::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Inclusive membership test.
    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// Knobs for the composite rule: nodes per panel, starting panel count,
/// and the relative tolerance the doubling refinement must reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    node_count: usize,
    panel_count: usize,
    rel_tolerance: f64,
}

impl QuadratureConfig {
    pub fn new(
        node_count: usize,
        panel_count: usize,
        rel_tolerance: f64,
    ) -> Result<Self, QuadratureError> {
        if node_count < 2 {
            return Err(QuadratureError::InvalidConfig {
                reason: format!("node_count must be at least 2, got {node_count}"),
            });
        }
        if panel_count < 1 {
            return Err(QuadratureError::InvalidConfig {
                reason: "panel_count must be at least 1".to_string(),
            });
        }
        if !(rel_tolerance > 0.0 && rel_tolerance < 1.0) {
            return Err(QuadratureError::InvalidConfig {
                reason: format!("rel_tolerance must lie in (0, 1), got {rel_tolerance}"),
            });
        }
        Ok(Self {
            node_count,
            panel_count,
            rel_tolerance,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn panel_count(&self) -> usize {
        self.panel_count
    }

    pub fn rel_tolerance(&self) -> f64 {
        self.rel_tolerance
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            node_count: 32,
            panel_count: 8,
            rel_tolerance: 1e-10,
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the n-point rule by Newton iteration on the Legendre
    /// recurrence, seeded with the Chebyshev root estimates.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Gauss-Legendre rule needs at least 2 nodes");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..64 {
                let mut p_cur = 1.0;
                let mut p_prev = 0.0;
                for j in 0..n {
                    let p_old = p_prev;
                    p_prev = p_cur;
                    let jf = j as f64;
                    p_cur = ((2.0 * jf + 1.0) * z * p_prev - jf * p_old) / (jf + 1.0);
                }
                deriv = nf * (z * p_cur - p_prev) / (z * z - 1.0);
                let z_prev = z;
                z -= p_cur / deriv;
                if (z - z_prev).abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * deriv * deriv);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Maximum of the exponent `-alpha*u - psi*u^2` over the interval.
///
/// The maximum of a quadratic on a closed interval sits at an endpoint or
/// at the interior stationary point `u = -alpha / (2 psi)`, so checking
/// those three candidates is exact.
pub fn exponent_shift(alpha: f64, psi: f64, iv: Interval) -> f64 {
    let g = |u: f64| -alpha * u - psi * u * u;
    let mut shift = g(iv.lo).max(g(iv.hi));
    if psi != 0.0 {
        let stationary = -alpha / (2.0 * psi);
        if iv.lo < stationary && stationary < iv.hi {
            shift = shift.max(g(stationary));
        }
    }
    shift
}

fn composite_pass(
    rule: &GaussLegendre,
    alpha: f64,
    psi: f64,
    iv: Interval,
    shift: f64,
    panels: usize,
) -> [f64; 5] {
    let h = iv.width() / panels as f64;
    let half = 0.5 * h;
    let mut acc = [0.0f64; 5];
    for p in 0..panels {
        let center = iv.lo + (p as f64 + 0.5) * h;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let u = center + half * x;
            let density = (-alpha * u - psi * u * u - shift).exp();
            let mut term = w * density;
            for slot in &mut acc {
                *slot += term;
                term *= u;
            }
        }
    }
    for slot in &mut acc {
        *slot *= half;
    }
    acc
}

fn refined(prev: &[f64; 5], cur: &[f64; 5], iv: Interval, tol: f64) -> bool {
    // Relative agreement per power, with an absolute floor tied to the
    // k = 0 mass so odd powers that cancel to ~0 on symmetric intervals
    // do not demand impossible relative accuracy.
    let bound = iv.lo.abs().max(iv.hi.abs());
    let mut floor = cur[0].abs();
    for k in 0..5 {
        let scale = cur[k].abs().max(floor).max(f64::MIN_POSITIVE);
        if (cur[k] - prev[k]).abs() > tol * scale {
            return false;
        }
        floor *= bound;
    }
    true
}

/// Shifted integrals of `u^k * exp(-alpha*u - psi*u^2 - S)` for k = 0..=4,
/// together with the shift `S` returned by [`exponent_shift`].
///
/// All five powers share one set of integrand evaluations and one shift, so
/// moment ratios taken from the result are mutually consistent.
pub fn exp_poly_integrals(
    alpha: f64,
    psi: f64,
    iv: Interval,
    cfg: &QuadratureConfig,
) -> Result<([f64; 5], f64), QuadratureError> {
    if !alpha.is_finite() || !psi.is_finite() {
        return Err(QuadratureError::NonFiniteInput { alpha, psi });
    }
    let shift = exponent_shift(alpha, psi, iv);
    let rule = GaussLegendre::new(cfg.node_count);
    let mut panels = cfg.panel_count;
    let mut prev = composite_pass(&rule, alpha, psi, iv, shift, panels);
    while panels <= MAX_PANELS / 2 {
        panels *= 2;
        let cur = composite_pass(&rule, alpha, psi, iv, shift, panels);
        if cur[0] > 0.0 && refined(&prev, &cur, iv, cfg.rel_tolerance) {
            return Ok((cur, shift));
        }
        prev = cur;
    }
    Err(QuadratureError::ToleranceNotReached {
        rel_tolerance: cfg.rel_tolerance,
        alpha,
        psi,
    })
}

/// The shifted integral `∫ u^k exp(-alpha*u - psi*u^2 - S) du` over the
/// interval, where `S` = [`exponent_shift`]. For k = 0 the result is
/// strictly positive. Panics if `k > 4`.
pub fn exp_poly_integral(
    k: usize,
    alpha: f64,
    psi: f64,
    iv: Interval,
    cfg: &QuadratureConfig,
) -> Result<f64, QuadratureError> {
    assert!(
        k <= MAX_MOMENT_POWER,
        "moment power {k} exceeds the supported maximum {MAX_MOMENT_POWER}"
    );
    Ok(exp_poly_integrals(alpha, psi, iv, cfg)?.0[k])
}

/// Log of the normalization integral `∫ exp(-alpha*u - psi*u^2) du`,
/// returned as `(log_Z, shift)` with `log_Z = shift + ln(shifted integral)`.
pub fn shifted_log_normalizer(
    alpha: f64,
    psi: f64,
    iv: Interval,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64), QuadratureError> {
    let (integrals, shift) = exp_poly_integrals(alpha, psi, iv, cfg)?;
    Ok((shift + integrals[0].ln(), shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // ∫_{-1}^{1} exp(-u^2/2) du = sqrt(2*pi) * erf(1/sqrt(2)),
    // frozen from a high-precision error-function evaluation.
    const GAUSSIAN_MASS_UNIT: f64 = 1.711_248_783_784_297_6;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn five_point_rule_matches_reference_values() {
        let rule = GaussLegendre::new(5);
        let nodes = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683_1,
            0.0,
            0.538_469_310_105_683_1,
            0.906_179_845_938_664,
        ];
        let weights = [
            0.236_926_885_056_189_08,
            0.478_628_670_499_366_47,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
        ];
        for (got, want) in rule.nodes().iter().zip(nodes) {
            assert!((got - want).abs() < 1e-14, "node {got} vs {want}");
        }
        for (got, want) in rule.weights().iter().zip(weights) {
            assert!((got - want).abs() < 1e-14, "weight {got} vs {want}");
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [2, 3, 7, 16, 32, 64] {
            let rule = GaussLegendre::new(n);
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n = {n}: sum {total}");
        }
    }

    #[test]
    fn constant_integrand_on_unit_interval() {
        let (value, shift) = exp_poly_integrals(0.0, 0.0, iv(0.0, 1.0), &cfg()).unwrap();
        assert_eq!(shift, 0.0);
        assert!((value[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_exactness_without_exponent() {
        for (lo, hi) in [(0.0, 1.0), (-1.0, 1.0), (2.0, 5.0), (-3.5, -0.25)] {
            let interval = iv(lo, hi);
            for k in 0..=MAX_MOMENT_POWER {
                let got = exp_poly_integral(k, 0.0, 0.0, interval, &cfg()).unwrap();
                let p = (k + 1) as f64;
                let want = (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / p;
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "k = {k} on [{lo}, {hi}]: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn odd_moment_vanishes_on_symmetric_interval() {
        let (values, _) = exp_poly_integrals(0.0, 0.5, iv(-2.0, 2.0), &cfg()).unwrap();
        assert!(values[1].abs() <= 1e-12 * values[0]);
        assert!(values[3].abs() <= 1e-12 * values[0]);
    }

    #[test]
    fn gaussian_mass_matches_error_function_oracle() {
        let (values, shift) = exp_poly_integrals(0.0, 0.5, iv(-1.0, 1.0), &cfg()).unwrap();
        assert_eq!(shift, 0.0);
        let rel = (values[0] - GAUSSIAN_MASS_UNIT).abs() / GAUSSIAN_MASS_UNIT;
        assert!(rel < 1e-10, "relative error {rel}");
        // ∫ u^2 exp(-u^2/2) over [-1, 1] = mass - 2 exp(-1/2), by parts.
        let second = GAUSSIAN_MASS_UNIT - 2.0 * (-0.5f64).exp();
        assert!((values[2] - second).abs() / second < 1e-10);
    }

    #[test]
    fn log_normalizer_trivial_cases() {
        let (log_z, _) = shifted_log_normalizer(0.0, 0.0, iv(0.0, 1.0), &cfg()).unwrap();
        assert!(log_z.abs() < 1e-13);
        let (log_z, _) =
            shifted_log_normalizer(0.0, 0.0, iv(0.0, std::f64::consts::E), &cfg()).unwrap();
        assert!((log_z - 1.0).abs() < 1e-13);
    }

    #[test]
    fn log_normalizer_truncated_exponential() {
        // ∫_0^10 e^{-u} du = 1 - e^{-10}; frozen log value.
        let want = -4.540_096_037_048_921e-5;
        let (log_z, shift) = shifted_log_normalizer(1.0, 0.0, iv(0.0, 10.0), &cfg()).unwrap();
        assert_eq!(shift, 0.0);
        assert!((log_z - want).abs() < 1e-14, "log_z = {log_z}");
    }

    #[test]
    fn extreme_slope_is_absorbed_by_the_shift() {
        // ∫_0^1 e^{1000 u} du = (e^1000 - 1)/1000, so
        // log Z = 1000 + ln(1 - e^{-1000}) - ln(1000).
        let (log_z, shift) = shifted_log_normalizer(-1000.0, 0.0, iv(0.0, 1.0), &cfg()).unwrap();
        assert!(log_z.is_finite());
        assert_eq!(shift, 1000.0);
        let want = 1000.0 - 1000.0f64.ln();
        assert!((log_z - want).abs() / want.abs() < 1e-10, "log_z = {log_z}");

        // Mirrored slope: ∫_0^1 e^{-1000 u} du = (1 - e^{-1000})/1000.
        let (log_z, shift) = shifted_log_normalizer(1000.0, 0.0, iv(0.0, 1.0), &cfg()).unwrap();
        assert_eq!(shift, 0.0);
        let want = -(1000.0f64.ln());
        assert!((log_z - want).abs() / want.abs() < 1e-10, "log_z = {log_z}");
    }

    #[test]
    fn interior_peak_shift_uses_the_stationary_point() {
        // Peak of -2u - u^2 at u = -1 with value 1.
        let shift = exponent_shift(2.0, 1.0, iv(-3.0, 3.0));
        assert!((shift - 1.0).abs() < 1e-15);
        // Convex exponent: maximum must come from an endpoint.
        let shift = exponent_shift(0.0, -1.0, iv(-2.0, 3.0));
        assert!((shift - 9.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_coefficients() {
        let err = exp_poly_integrals(f64::NAN, 0.0, iv(0.0, 1.0), &cfg()).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFiniteInput { .. }));
        let err = exp_poly_integrals(0.0, f64::INFINITY, iv(0.0, 1.0), &cfg()).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFiniteInput { .. }));
    }

    #[test]
    fn rejects_bad_intervals_and_configs() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, -1.0).is_err());
        assert!(Interval::new(f64::NEG_INFINITY, 0.0).is_err());
        assert!(QuadratureConfig::new(1, 4, 1e-8).is_err());
        assert!(QuadratureConfig::new(8, 0, 1e-8).is_err());
        assert!(QuadratureConfig::new(8, 4, 0.0).is_err());
        assert!(QuadratureConfig::new(8, 4, 1.0).is_err());
    }

    #[test]
    fn unresolvable_spike_reports_tolerance_failure() {
        let err = exp_poly_integrals(1e9, -1e9, iv(-3.0, 3.0), &cfg()).unwrap_err();
        assert!(matches!(err, QuadratureError::ToleranceNotReached { .. }));
    }

    #[test]
    fn refinement_is_stable_across_rule_sizes() {
        let reference = QuadratureConfig::new(48, 64, 1e-12).unwrap();
        let (want, _) = exp_poly_integrals(1.5, 0.8, iv(-2.0, 4.0), &reference).unwrap();
        let mut last_discrepancy = f64::INFINITY;
        for (nodes, panels) in [(8, 1), (12, 2), (16, 4), (32, 8)] {
            let run = QuadratureConfig::new(nodes, panels, 1e-10).unwrap();
            let (got, _) = exp_poly_integrals(1.5, 0.8, iv(-2.0, 4.0), &run).unwrap();
            let discrepancy = (got[0] - want[0]).abs() / want[0];
            assert!(
                discrepancy <= last_discrepancy + 1e-10,
                "nodes {nodes} panels {panels}: discrepancy grew to {discrepancy}"
            );
            last_discrepancy = discrepancy;
        }
    }

    proptest! {
        #[test]
        fn splitting_at_an_interior_point_preserves_the_integral(
            alpha in -3.0f64..3.0,
            psi in -2.0f64..3.0,
            lo in -5.0f64..4.0,
            width in 0.5f64..6.0,
            split_frac in 0.1f64..0.9,
        ) {
            let hi = lo + width;
            let whole = iv(lo, hi);
            let mid = lo + split_frac * width;
            let left = iv(lo, mid);
            let right = iv(mid, hi);
            let c = cfg();

            let (w, sw) = exp_poly_integrals(alpha, psi, whole, &c).unwrap();
            let (l, sl) = exp_poly_integrals(alpha, psi, left, &c).unwrap();
            let (r, sr) = exp_poly_integrals(alpha, psi, right, &c).unwrap();
            for k in 0..5 {
                let total = l[k] * (sl - sw).exp() + r[k] * (sr - sw).exp();
                let scale = w[0].max(total.abs()).max(w[k].abs());
                prop_assert!(
                    (total - w[k]).abs() <= 2.0 * c.rel_tolerance() * scale * 10.0,
                    "k = {}: split {} vs whole {}",
                    k, total, w[k]
                );
            }
        }

        #[test]
        fn mass_is_positive_and_finite(
            alpha in -50.0f64..50.0,
            psi in -10.0f64..10.0,
            lo in -4.0f64..3.0,
            width in 0.2f64..5.0,
        ) {
            let interval = iv(lo, lo + width);
            let (values, shift) = exp_poly_integrals(alpha, psi, interval, &cfg()).unwrap();
            prop_assert!(shift.is_finite());
            prop_assert!(values[0] > 0.0);
            for v in values {
                prop_assert!(v.is_finite());
            }
        }
    }
}
