//! Command-line workflow: file ingestion, the lognormal log-transform,
//! bound selection, fit execution, and stable machine-readable reports.
//!
//! The json writer is deliberately hand-rolled: keys appear in a fixed
//! order and every float is printed with exactly 12 significant digits, so
//! identical inputs produce byte-identical output across runs and builds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::estimator::{self, FitConfig, FitError};
use crate::model::{ModelError, TruncatedModel};
use crate::quadrature::{Interval, QuadratureConfig};
use crate::synth::{self, SamplerConfig, SynthError};

/// Below this fitted |psi| the report carries a note that the result is
/// indistinguishable from a pure power law / exponential.
pub const PSI_NOTE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input file not found: {path}")]
    FileNotFound { path: PathBuf },
    #[error("line {line}: cannot parse {content:?} as a finite number")]
    ParseError { line: usize, content: String },
    #[error("input file contains no data values")]
    EmptyDataset,
    #[error("lognormal fitting requires strictly positive data, found {value}")]
    NonPositiveData { value: f64 },
    #[error(
        "explicit bounds [{lo}, {hi}] do not bracket the data \
         (observed range [{data_min}, {data_max}])"
    )]
    BoundsDoNotBracketData {
        lo: f64,
        hi: f64,
        data_min: f64,
        data_max: f64,
    },
    #[error("invalid bounds: {reason}")]
    InvalidBounds { reason: String },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    /// Fit y itself as a truncated normal.
    Normal,
    /// Transform y = ln x first; x is then truncated lognormal.
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Text,
}

/// One fit invocation. `bounds` are in data units: x units for lognormal
/// requests, y units otherwise.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub input_path: PathBuf,
    pub distribution: DistributionKind,
    pub bounds: Option<(f64, f64)>,
    pub constrain_psi_zero: bool,
    pub eta: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub output_format: OutputFormat,
}

impl RunRequest {
    /// Request with every knob at its default.
    pub fn for_file(path: impl Into<PathBuf>) -> Self {
        let defaults = FitConfig::default();
        Self {
            input_path: path.into(),
            distribution: DistributionKind::Normal,
            bounds: None,
            constrain_psi_zero: false,
            eta: defaults.eta,
            tol: defaults.tol_alpha,
            max_iterations: defaults.max_iterations,
            output_format: OutputFormat::Json,
        }
    }
}

/// Flat, serialization-ready view of a fit. `mu` and `sigma` are absent
/// exactly when the fitted psi is not strictly positive; `x_min`/`x_max`
/// are present only for lognormal requests.
#[derive(Debug, Clone)]
pub struct Report {
    pub alpha: f64,
    pub psi: f64,
    pub beta: f64,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub y_min: f64,
    pub y_max: f64,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub eta_used: f64,
    pub n: usize,
    pub power_law_note: String,
}

/// Parameters of the `synth` subcommand.
#[derive(Debug, Clone)]
pub struct SynthRequest {
    pub alpha: f64,
    pub psi: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub seed: u64,
    pub out_path: PathBuf,
}

/// Reads one value per line. Blank lines and lines whose first non-blank
/// character is '#' are skipped; line numbers in errors count every
/// physical line.
pub fn ingest(path: &Path) -> Result<Vec<f64>, CliError> {
    let content = match fs::read_to_string(path) {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::FileNotFound {
                path: path.to_path_buf(),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let mut values = Vec::new();
    for (index, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                return Err(CliError::ParseError {
                    line: index + 1,
                    content: line.to_string(),
                });
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::EmptyDataset);
    }
    Ok(values)
}

fn data_hull(data: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in data {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

fn resolve_bounds(
    data: &[f64],
    explicit: Option<(f64, f64)>,
    lognormal: bool,
) -> Result<Interval, CliError> {
    let (data_min, data_max) = data_hull(data);
    let (lo, hi) = match explicit {
        Some((lo, hi)) => {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(CliError::InvalidBounds {
                    reason: format!("need finite lo < hi, got [{lo}, {hi}]"),
                });
            }
            if lognormal && lo <= 0.0 {
                return Err(CliError::InvalidBounds {
                    reason: format!("lognormal bounds must be positive, got lo = {lo}"),
                });
            }
            if data_min < lo || data_max > hi {
                return Err(CliError::BoundsDoNotBracketData {
                    lo,
                    hi,
                    data_min,
                    data_max,
                });
            }
            (lo, hi)
        }
        None => (data_min, data_max),
    };
    // In y units from here on.
    let (lo, hi) = if lognormal {
        (lo.ln(), hi.ln())
    } else {
        (lo, hi)
    };
    Interval::new(lo, hi).map_err(|_| CliError::InvalidBounds {
        reason: format!("support [{lo}, {hi}] is degenerate; the data admit no spread"),
    })
}

/// Ingests, transforms, fits, and flattens the result into a [`Report`].
pub fn run(req: &RunRequest) -> Result<Report, CliError> {
    let data = ingest(&req.input_path)?;
    let lognormal = req.distribution == DistributionKind::Lognormal;
    if lognormal {
        if let Some(&bad) = data.iter().find(|&&x| x <= 0.0) {
            return Err(CliError::NonPositiveData { value: bad });
        }
    }
    let support = resolve_bounds(&data, req.bounds, lognormal)?;
    let y_data: Vec<f64> = if lognormal {
        data.iter().map(|x| x.ln()).collect()
    } else {
        data
    };
    let s = estimator::compute_moments(&y_data)?;
    let fit_cfg = FitConfig {
        eta: req.eta,
        tol_alpha: req.tol,
        tol_psi: req.tol,
        max_iterations: req.max_iterations,
        ..FitConfig::default()
    };
    let quad_cfg = QuadratureConfig::default();
    let fit_report = if req.constrain_psi_zero {
        estimator::fit_exponential(&s, support, &fit_cfg, &quad_cfg)?
    } else {
        estimator::fit(&s, support, &fit_cfg, &quad_cfg)?
    };

    let model = &fit_report.model;
    let (x_min, x_max) = if lognormal {
        let view = model.lognormal_view()?;
        (Some(view.x_min), Some(view.x_max))
    } else {
        (None, None)
    };
    let note = if req.constrain_psi_zero {
        "psi constrained to 0: fitted as a pure exponential in y, a power law \
         x^-beta in x = exp(y)"
            .to_string()
    } else if model.psi().abs() < PSI_NOTE_THRESHOLD {
        format!(
            "|psi| < {PSI_NOTE_THRESHOLD}: the fit is numerically indistinguishable \
             from a pure power law / exponential (reporting convenience, not a \
             statistical test)"
        )
    } else {
        String::new()
    };
    Ok(Report {
        alpha: model.alpha(),
        psi: model.psi(),
        beta: model.beta(),
        mu: fit_report.standard.map(|sp| sp.mu),
        sigma: fit_report.standard.map(|sp| sp.sigma),
        y_min: model.support().lo(),
        y_max: model.support().hi(),
        x_min,
        x_max,
        log_likelihood: fit_report.log_likelihood,
        iterations: fit_report.iterations,
        converged: fit_report.converged,
        eta_used: fit_report.eta_used,
        n: s.len(),
        power_law_note: note,
    })
}

/// Generates a seeded sample and writes it in the ingest format, one value
/// per line. Byte-identical for identical arguments.
pub fn synth_command(req: &SynthRequest) -> Result<(), CliError> {
    let support = Interval::new(req.lo, req.hi).map_err(|_| CliError::InvalidBounds {
        reason: format!("need finite lo < hi, got [{}, {}]", req.lo, req.hi),
    })?;
    let model = TruncatedModel::new(req.alpha, req.psi, support)?;
    let draws = synth::sample(&model, req.n, &SamplerConfig::new(req.seed))?;
    let mut out = String::with_capacity(draws.len() * 20);
    for y in draws {
        // Shortest round-tripping decimal form, so re-ingesting restores
        // the exact bits.
        writeln!(out, "{y}").expect("string write cannot fail");
    }
    fs::write(&req.out_path, out)?;
    Ok(())
}

/// Twelve significant digits, scientific notation. The fixed width keeps
/// serialized reports byte-stable.
fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_optional(v: Option<f64>) -> String {
    match v {
        Some(v) => fmt_float(v),
        None => "null".to_string(),
    }
}

fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

/// Flat json object with keys in fixed order.
pub fn render_json(report: &Report) -> String {
    let entries = [
        ("alpha", fmt_float(report.alpha)),
        ("psi", fmt_float(report.psi)),
        ("beta", fmt_float(report.beta)),
        ("mu", fmt_optional(report.mu)),
        ("sigma", fmt_optional(report.sigma)),
        ("y_min", fmt_float(report.y_min)),
        ("y_max", fmt_float(report.y_max)),
        ("x_min", fmt_optional(report.x_min)),
        ("x_max", fmt_optional(report.x_max)),
        ("log_likelihood", fmt_float(report.log_likelihood)),
        ("iterations", report.iterations.to_string()),
        ("converged", report.converged.to_string()),
        ("eta_used", fmt_float(report.eta_used)),
        ("n", report.n.to_string()),
        (
            "power_law_note",
            format!("\"{}\"", escape_json(&report.power_law_note)),
        ),
    ];
    let mut out = String::from("{\n");
    for (i, (key, value)) in entries.iter().enumerate() {
        let comma = if i + 1 == entries.len() { "" } else { "," };
        let _ = writeln!(out, "  \"{key}\": {value}{comma}");
    }
    out.push('}');
    out
}

/// Line-per-field human-readable rendering.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k:>15}  {v}");
    };
    line("alpha", fmt_float(report.alpha));
    line("psi", fmt_float(report.psi));
    line("beta", fmt_float(report.beta));
    line("mu", fmt_optional(report.mu));
    line("sigma", fmt_optional(report.sigma));
    line("y_min", fmt_float(report.y_min));
    line("y_max", fmt_float(report.y_max));
    if let (Some(x_min), Some(x_max)) = (report.x_min, report.x_max) {
        line("x_min", fmt_float(x_min));
        line("x_max", fmt_float(x_max));
    }
    line("log_likelihood", fmt_float(report.log_likelihood));
    line("iterations", report.iterations.to_string());
    line("converged", report.converged.to_string());
    line("eta_used", fmt_float(report.eta_used));
    line("n", report.n.to_string());
    if !report.power_law_note.is_empty() {
        let _ = writeln!(out, "{:>15}  {}", "note", report.power_law_note);
    }
    out
}
