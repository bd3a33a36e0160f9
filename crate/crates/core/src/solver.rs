//! Row-action multiplicative ART with binary coefficients.
//!
//! For every line the current field is projected, the ratio of measured to
//! computed projection `dP = P / P_bar` is formed, and each active grid is
//! scaled by `1 - beta (1 - dP)`. Views are visited in acquisition order and
//! lines in detector order; coefficients are traced on the fly.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec};
use crate::scan::ProjectionSet;
use crate::tracer::{precompute_first_view, FirstViewCache, Span, TraceScratch};

/// Treatment of lines whose measured projection is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ZeroLinePolicy {
    /// Update like any other line: the ratio is 0, so every active grid is
    /// scaled by `1 - beta` (clamped to the floor when `beta >= 1`).
    #[default]
    Apply,
    /// Leave the line out of the update and count it.
    Skip,
}

impl ZeroLinePolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "apply" => Ok(ZeroLinePolicy::Apply),
            "skip" => Ok(ZeroLinePolicy::Skip),
            other => Err(Error::config(format!("unknown zero-line policy '{other}' (apply | skip)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ZeroLinePolicy::Apply => "apply",
            ZeroLinePolicy::Skip => "skip",
        }
    }
}

/// Parameters of a single line update, resolved against the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateRule {
    pub beta: f64,
    pub floor: f64,
    pub zero_lines: ZeroLinePolicy,
}

/// Grid values in flat polar/cylindrical order.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    spec: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::input(format!(
                "field has {} values, grid needs {}",
                values.len(),
                spec.len()
            )));
        }
        Ok(Field { spec, values })
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Field { values: vec![value; spec.len()], spec }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, s: usize) -> &[f64] {
        let n = self.spec.grids_per_slice();
        &self.values[s * n..(s + 1) * n]
    }

    /// Each slice rearranged into a row-major `N x N` Cartesian image.
    pub fn to_cartesian(&self) -> Vec<Vec<f64>> {
        let map = grid::uspg_to_cg_map(self.spec.n()).expect("grid size is validated");
        (0..self.spec.slices()).map(|s| grid::to_cartesian(&map, self.slice(s))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relaxation, in (0, 2).
    pub beta: f64,
    /// Stop once the largest relative change over a sweep is at most this.
    /// Zero runs all `max_sweeps` sweeps unless the field stops changing.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub f_init: f64,
    /// Floor for computed projections; `None` uses `1e-12` times the mean
    /// nonzero measurement.
    pub p_floor: Option<f64>,
    pub zero_lines: ZeroLinePolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta: 0.4,
            tolerance: 1e-4,
            max_sweeps: 30,
            f_init: 1.0,
            p_floor: None,
            zero_lines: ZeroLinePolicy::Apply,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::config(format!("relaxation must lie in (0, 2), got {}", self.beta)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config(format!("tolerance must be non-negative, got {}", self.tolerance)));
        }
        if !(self.f_init > 0.0 && self.f_init.is_finite()) {
            return Err(Error::config(format!("initial value must be positive, got {}", self.f_init)));
        }
        if let Some(f) = self.p_floor {
            if !(f > 0.0) {
                return Err(Error::config(format!("projection floor must be positive, got {f}")));
            }
        }
        Ok(())
    }

    pub fn update_rule(&self, measurements: &[f64]) -> UpdateRule {
        UpdateRule { beta: self.beta, floor: self.resolve_floor(measurements), zero_lines: self.zero_lines }
    }

    /// Resolves the projection floor against the measured data.
    pub fn resolve_floor(&self, measurements: &[f64]) -> f64 {
        self.p_floor.unwrap_or_else(|| {
            let (sum, count) = measurements
                .iter()
                .filter(|&&p| p > 0.0)
                .fold((0.0, 0usize), |(s, c), &p| (s + p, c + 1));
            if count == 0 {
                1e-12
            } else {
                1e-12 * sum / count as f64
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Lines with zero measurement left untouched under [`ZeroLinePolicy::Skip`].
    pub skipped_lines: u64,
    /// Updates whose scale factor was non-positive and clamped to the floor.
    pub clamped_updates: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceReport {
    pub sweeps: usize,
    /// Largest relative change over touched grids, one entry per sweep.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub precompute: Duration,
    pub elapsed: Duration,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    Skipped,
    Clamped,
}

/// Sum of field values over the active grids (binary coefficients).
pub fn forward_project_line(values: &[f64], active: &[usize]) -> f64 {
    active.iter().map(|&v| values[v]).sum()
}

#[inline]
pub fn forward_project_spans(values: &[f64], spans: &[Span]) -> f64 {
    spans.iter().map(|s| values[s.start..s.end].iter().sum::<f64>()).sum()
}

/// Smallest value a grid can take. Repeated corrections on lines measured as
/// zero would otherwise underflow to 0, after which no update can recover it.
pub const VALUE_FLOOR: f64 = f64::MIN_POSITIVE;

#[inline]
pub(crate) fn scaled(value: f64, factor: f64) -> f64 {
    (value * factor).max(VALUE_FLOOR)
}

/// Multiplicative correction `1 - beta (1 - P / max(P_bar, floor))`, clamped
/// to `floor` when non-positive. The flag reports a clamp.
#[inline]
pub fn mart_factor(measured: f64, computed: f64, beta: f64, floor: f64) -> (f64, bool) {
    let ratio = measured / computed.max(floor);
    let factor = 1.0 - beta * (1.0 - ratio);
    if factor <= 0.0 {
        (floor, true)
    } else {
        (factor, false)
    }
}

/// Applies one MART correction for a single line in place. Inactive grids are
/// never touched.
pub fn mart_update_line(values: &mut [f64], active: &[usize], measured: f64, rule: &UpdateRule) -> UpdateOutcome {
    if measured == 0.0 && rule.zero_lines == ZeroLinePolicy::Skip {
        return UpdateOutcome::Skipped;
    }
    let computed = forward_project_line(values, active);
    let (factor, clamped) = mart_factor(measured, computed, rule.beta, rule.floor);
    for &v in active {
        values[v] = scaled(values[v], factor);
    }
    if clamped {
        UpdateOutcome::Clamped
    } else {
        UpdateOutcome::Applied
    }
}

fn check_measurements(data: &[f64]) -> Result<()> {
    if let Some((i, p)) = data.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(Error::input(format!("measurement {i} is {p}; expected a finite non-negative value")));
    }
    Ok(())
}

/// Reconstructs a field from projections, building the segment cache first.
pub fn reconstruct(proj: &ProjectionSet, spec: &GridSpec, cfg: &SolverConfig) -> Result<(Field, ConvergenceReport)> {
    let start = Instant::now();
    let quarter = proj.geometry.is_quarter_symmetric();
    let cache = precompute_first_view(&proj.geometry, spec, quarter)?;
    let precompute = start.elapsed();
    let (field, mut report) = reconstruct_with_cache(proj, &cache, cfg)?;
    report.precompute = precompute;
    Ok((field, report))
}

/// Reconstructs using an existing cache, starting from `f_init` everywhere.
pub fn reconstruct_with_cache(
    proj: &ProjectionSet,
    cache: &FirstViewCache,
    cfg: &SolverConfig,
) -> Result<(Field, ConvergenceReport)> {
    let field = Field::constant(*cache.spec(), cfg.f_init);
    reconstruct_from(proj, cache, cfg, field)
}

/// Reconstructs starting from `field`.
pub fn reconstruct_from(
    proj: &ProjectionSet,
    cache: &FirstViewCache,
    cfg: &SolverConfig,
    mut field: Field,
) -> Result<(Field, ConvergenceReport)> {
    cfg.validate()?;
    check_measurements(proj.data())?;
    if cache.num_lines() != proj.geometry.num_lines() {
        return Err(Error::input(format!(
            "cache has {} lines, projections have {}",
            cache.num_lines(),
            proj.geometry.num_lines()
        )));
    }
    if field.spec() != cache.spec() {
        return Err(Error::input("initial field and cache use different grids"));
    }
    let start = Instant::now();
    let mut report = ConvergenceReport::default();
    if proj.data().iter().all(|&p| p == 0.0) {
        report.warnings.push("all measurements are zero; returning the initial field".into());
        report.converged = true;
        report.elapsed = start.elapsed();
        return Ok((field, report));
    }

    let rule = cfg.update_rule(proj.data());
    let mut scratch = TraceScratch::new(cache.spec());
    let mut touched = vec![false; field.values.len()];
    let mut previous = field.values.clone();

    for sweep in 0..cfg.max_sweeps {
        previous.copy_from_slice(&field.values);
        let d = run_sweep(proj, cache, &rule, &mut field.values, &mut scratch, (sweep == 0).then_some(&mut touched));
        report.diagnostics.skipped_lines += d.skipped_lines;
        report.diagnostics.clamped_updates += d.clamped_updates;

        let residual = field
            .values
            .iter()
            .zip(&previous)
            .zip(&touched)
            .filter(|(_, &t)| t)
            .map(|((new, old), _)| ((new - old) / old).abs())
            .fold(0.0, f64::max);
        report.residuals.push(residual);
        report.sweeps = sweep + 1;
        if !residual.is_finite() {
            return Err(Error::Numerical(format!("non-finite update in sweep {}", sweep + 1)));
        }
        if residual <= cfg.tolerance {
            report.converged = true;
            break;
        }
    }
    report.elapsed = start.elapsed();
    Ok((field, report))
}

/// One pass over all views and lines.
pub fn run_sweep(
    proj: &ProjectionSet,
    cache: &FirstViewCache,
    rule: &UpdateRule,
    values: &mut [f64],
    scratch: &mut TraceScratch,
    mut coverage: Option<&mut Vec<bool>>,
) -> Diagnostics {
    let geom = &proj.geometry;
    let mut diag = Diagnostics::default();
    for view in 0..geom.views {
        let theta = geom.view_angle(view);
        let measured = proj.view(view);
        for (line, &p) in measured.iter().enumerate() {
            if p == 0.0 && rule.zero_lines == ZeroLinePolicy::Skip {
                diag.skipped_lines += 1;
                continue;
            }
            let spans = cache.trace_line_spans(line, theta, scratch);
            if spans.is_empty() {
                continue;
            }
            if let Some(cov) = coverage.as_deref_mut() {
                for s in spans {
                    cov[s.start..s.end].fill(true);
                }
            }
            let computed = forward_project_spans(values, spans);
            let (factor, clamped) = mart_factor(p, computed, rule.beta, rule.floor);
            diag.clamped_updates += clamped as u64;
            for s in spans {
                for v in &mut values[s.start..s.end] {
                    *v = scaled(*v, factor);
                }
            }
        }
    }
    diag
}
