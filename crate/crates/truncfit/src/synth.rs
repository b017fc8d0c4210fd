//! Seeded sampling from any model, and the brute-force grid maximizer
//! used as an independent cross-check on the fitting iteration.
//!
//! The random source is a self-contained splitmix-style 64-bit generator
//! written out in full, so sampled sequences are bit-reproducible from the
//! seed alone, with no dependence on an external RNG crate's stream
//! stability.

use thiserror::Error;

use crate::model::TruncatedModel;
use crate::quadrature::{self, GaussLegendre, Interval, QuadratureConfig, QuadratureError};

/// Nodes per table cell when integrating cell masses.
const TABLE_CELL_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("table_resolution must be at least 256, got {got}")]
    ResolutionTooLow { got: usize },
    #[error("grid_size must be at least 11, got {got}")]
    GridTooCoarse { got: usize },
    #[error("sample is empty")]
    EmptySample,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Splitmix-style generator: a Weyl sequence on the state, mixed through
/// two multiply-xorshift rounds. Passes through all 2^64 states with
/// period 2^64.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1) with the full 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    InverseCdfTable,
    Rejection,
}

/// Sampling knobs. The default method tabulates the CDF on a uniform
/// grid once and inverts it per draw; rejection sampling is retained as a
/// structurally independent cross-check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub method: SampleMethod,
    pub table_resolution: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            method: SampleMethod::InverseCdfTable,
            table_resolution: 4096,
        }
    }
}

/// Cumulative masses of the density on a uniform grid over the support.
/// `cdf` has `resolution + 1` entries running from exactly 0 to exactly 1.
struct CdfTable {
    lo: f64,
    cell_width: f64,
    cdf: Vec<f64>,
}

impl CdfTable {
    fn build(m: &TruncatedModel, resolution: usize) -> Result<Self, SynthError> {
        let support = m.support();
        let shift = quadrature::exponent_shift(m.alpha(), m.psi(), support);
        let rule = GaussLegendre::new(TABLE_CELL_NODES);
        let cell_width = support.width() / resolution as f64;
        let half = 0.5 * cell_width;
        let mut cdf = Vec::with_capacity(resolution + 1);
        cdf.push(0.0);
        let mut running = 0.0;
        for i in 0..resolution {
            let center = support.lo() + (i as f64 + 0.5) * cell_width;
            let mut mass = 0.0;
            for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
                let u = center + half * x;
                mass += w * (-m.alpha() * u - m.psi() * u * u - shift).exp();
            }
            running += mass * half;
            cdf.push(running);
        }
        if running <= 0.0 || !running.is_finite() {
            // The per-cell rule missed all the mass; the adaptive
            // integrator will produce the matching diagnostic.
            quadrature::exp_poly_integrals(
                m.alpha(),
                m.psi(),
                support,
                &QuadratureConfig::default(),
            )?;
            return Err(QuadratureError::ToleranceNotReached {
                rel_tolerance: 0.0,
                alpha: m.alpha(),
                psi: m.psi(),
            }
            .into());
        }
        for p in &mut cdf {
            *p /= running;
        }
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        Ok(Self {
            lo: support.lo(),
            cell_width,
            cdf,
        })
    }

    /// Inverse CDF by binary search plus linear interpolation inside the
    /// bracketing cell. `p` must lie in [0, 1).
    fn invert(&self, p: f64) -> f64 {
        // First index with cdf > p; cdf[0] = 0 <= p keeps j >= 1, and the
        // bracket guarantees cdf[j] - cdf[j-1] >= cdf[j] - p > 0.
        let j = self.cdf.partition_point(|&c| c <= p).max(1);
        let j = j.min(self.cdf.len() - 1);
        let frac = (p - self.cdf[j - 1]) / (self.cdf[j] - self.cdf[j - 1]);
        self.lo + ((j - 1) as f64 + frac) * self.cell_width
    }
}

/// `n` draws from the model, deterministic in `cfg.seed`. Every returned
/// value is asserted to lie inside the support.
pub fn sample(m: &TruncatedModel, n: usize, cfg: &SamplerConfig) -> Result<Vec<f64>, SynthError> {
    assert!(n >= 1, "sample size must be positive");
    let support = m.support();
    let mut rng = SplitMix64::new(cfg.seed);
    let mut out = Vec::with_capacity(n);
    match cfg.method {
        SampleMethod::InverseCdfTable => {
            if cfg.table_resolution < 256 {
                return Err(SynthError::ResolutionTooLow {
                    got: cfg.table_resolution,
                });
            }
            let table = CdfTable::build(m, cfg.table_resolution)?;
            for _ in 0..n {
                let y = table
                    .invert(rng.next_f64())
                    .clamp(support.lo(), support.hi());
                assert!(support.contains(y), "draw {y} escaped the support");
                out.push(y);
            }
        }
        SampleMethod::Rejection => {
            // With the exponent shifted to peak at zero, exp(g - S) <= 1
            // is itself the acceptance probability under a uniform
            // proposal.
            let shift = quadrature::exponent_shift(m.alpha(), m.psi(), support);
            while out.len() < n {
                let u = support.lo() + rng.next_f64() * support.width();
                let accept = (-m.alpha() * u - m.psi() * u * u - shift).exp();
                if rng.next_f64() < accept {
                    assert!(support.contains(u), "draw {u} escaped the support");
                    out.push(u);
                }
            }
        }
    }
    Ok(out)
}

/// Brute-force maximum likelihood over an `(alpha, psi)` grid.
///
/// Evaluates the log likelihood at `grid_size^2` points over the given
/// ranges, then zooms the ranges by 10x around the argmax twice and
/// repeats. The returned point is the best over every point evaluated in
/// all three passes, so it can never be beaten by a point the search saw.
pub fn grid_mle_oracle(
    sample: &[f64],
    support: Interval,
    alpha_range: Interval,
    psi_range: Interval,
    grid_size: usize,
) -> Result<(f64, f64, f64), SynthError> {
    if grid_size < 11 {
        return Err(SynthError::GridTooCoarse { got: grid_size });
    }
    if sample.is_empty() {
        return Err(SynthError::EmptySample);
    }
    let n = sample.len() as f64;
    let m1 = sample.iter().sum::<f64>() / n;
    let m2 = sample.iter().map(|y| y * y).sum::<f64>() / n;
    let quad_cfg = QuadratureConfig::default();
    let loglik = |alpha: f64, psi: f64| -> Result<f64, SynthError> {
        let (log_z, _) = quadrature::shifted_log_normalizer(alpha, psi, support, &quad_cfg)?;
        Ok(n * (-alpha * m1 - psi * m2 - log_z))
    };

    let mut best = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
    let mut a_center = 0.5 * (alpha_range.lo() + alpha_range.hi());
    let mut p_center = 0.5 * (psi_range.lo() + psi_range.hi());
    let mut a_width = alpha_range.width();
    let mut p_width = psi_range.width();
    let cells = (grid_size - 1) as f64;
    for _zoom in 0..3 {
        for i in 0..grid_size {
            let alpha = a_center - 0.5 * a_width + a_width * i as f64 / cells;
            for j in 0..grid_size {
                let psi = p_center - 0.5 * p_width + p_width * j as f64 / cells;
                let value = loglik(alpha, psi)?;
                if value > best.2 {
                    best = (alpha, psi, value);
                }
            }
        }
        a_center = best.0;
        p_center = best.1;
        a_width /= 10.0;
        p_width /= 10.0;
    }
    Ok(best)
}
