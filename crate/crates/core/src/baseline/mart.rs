use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::siddon::{siddon_trace_into, CartesianSpec};
use crate::error::{Error, Result};
use crate::scan::{ProjectionSet, ScanGeometry};
use crate::solver::{scaled, Diagnostics, SolverConfig, UpdateRule, ZeroLinePolicy};

/// How the Cartesian pipeline obtains its coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientMode {
    /// Every (view, line) traced once up front and kept in memory.
    Stored,
    /// Traced again for every line of every sweep.
    OnTheFly,
}

/// Precomputed chord-length coefficients of every line of every view in
/// compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredSystem {
    offsets: Vec<u64>,
    indices: Vec<u32>,
    weights: Vec<f32>,
}

impl StoredSystem {
    pub fn build(geom: &ScanGeometry, spec: &CartesianSpec) -> Result<Self> {
        geom.validate()?;
        if spec.len() > u32::MAX as usize {
            return Err(Error::config("Cartesian grid too large for 32-bit voxel indices"));
        }
        let lines = geom.num_lines();
        let rows: Vec<Vec<(usize, f64)>> = (0..geom.views * lines)
            .into_par_iter()
            .map_init(Vec::new, |alphas, i| {
                let (s, d) = geom.line_endpoints(i / lines, i % lines);
                let mut row = Vec::new();
                siddon_trace_into(s, d, spec, alphas, &mut row);
                row
            })
            .collect();
        let total = rows.iter().map(Vec::len).sum();
        let mut sys = StoredSystem {
            offsets: Vec::with_capacity(rows.len() + 1),
            indices: Vec::with_capacity(total),
            weights: Vec::with_capacity(total),
        };
        sys.offsets.push(0);
        for row in rows {
            for (v, w) in row {
                sys.indices.push(v as u32);
                sys.weights.push(w as f32);
            }
            sys.offsets.push(sys.indices.len() as u64);
        }
        Ok(sys)
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f32]) {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        (&self.indices[a..b], &self.weights[a..b])
    }

    /// Bytes of stored tracing state.
    pub fn byte_size(&self) -> usize {
        self.offsets.len() * std::mem::size_of::<u64>()
            + self.indices.len() * std::mem::size_of::<u32>()
            + self.weights.len() * std::mem::size_of::<f32>()
    }
}

/// Chord-length-weighted projections of a Cartesian image, traced on the fly.
pub fn project_cartesian(values: &[f64], geom: &ScanGeometry, spec: &CartesianSpec) -> Result<ProjectionSet> {
    geom.validate()?;
    if values.len() != spec.len() {
        return Err(Error::input(format!("image has {} values, grid needs {}", values.len(), spec.len())));
    }
    let lines = geom.num_lines();
    let data = (0..geom.views * lines)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(alphas, row), i| {
                let (s, d) = geom.line_endpoints(i / lines, i % lines);
                siddon_trace_into(s, d, spec, alphas, row);
                row.iter().map(|&(v, w)| w * values[v]).sum()
            },
        )
        .collect();
    ProjectionSet::new(geom.clone(), data)
}

/// Weighted multiplicative correction `1 - beta (w / w_max) (1 - ratio)`,
/// clamped to `floor` when non-positive.
#[inline]
pub fn cartesian_mart_factor(ratio: f64, relative_weight: f64, beta: f64, floor: f64) -> (f64, bool) {
    let factor = 1.0 - beta * relative_weight * (1.0 - ratio);
    if factor <= 0.0 {
        (floor, true)
    } else {
        (factor, false)
    }
}

fn update_row(
    values: &mut [f64],
    row: impl Iterator<Item = (usize, f64)> + Clone,
    measured: f64,
    rule: &UpdateRule,
    diag: &mut Diagnostics,
) {
    let (computed, w_max) = row
        .clone()
        .fold((0.0, 0.0f64), |(sum, m), (v, w)| (sum + w * values[v], m.max(w)));
    if w_max <= 0.0 {
        return;
    }
    let ratio = measured / computed.max(rule.floor);
    for (v, w) in row {
        let (factor, clamped) = cartesian_mart_factor(ratio, w / w_max, rule.beta, rule.floor);
        diag.clamped_updates += clamped as u64;
        values[v] = scaled(values[v], factor);
    }
}

/// One sweep tracing each line with Siddon as it is visited.
pub fn sweep_on_the_fly(
    proj: &ProjectionSet,
    spec: &CartesianSpec,
    rule: &UpdateRule,
    values: &mut [f64],
) -> Diagnostics {
    let geom = &proj.geometry;
    let mut diag = Diagnostics::default();
    let mut alphas = Vec::new();
    let mut row = Vec::new();
    for view in 0..geom.views {
        for (line, &p) in proj.view(view).iter().enumerate() {
            if p == 0.0 && rule.zero_lines == ZeroLinePolicy::Skip {
                diag.skipped_lines += 1;
                continue;
            }
            let (s, d) = geom.line_endpoints(view, line);
            siddon_trace_into(s, d, spec, &mut alphas, &mut row);
            update_row(values, row.iter().copied(), p, rule, &mut diag);
        }
    }
    diag
}

/// One sweep reading coefficients from a [`StoredSystem`].
pub fn sweep_stored(proj: &ProjectionSet, system: &StoredSystem, rule: &UpdateRule, values: &mut [f64]) -> Diagnostics {
    let mut diag = Diagnostics::default();
    for (i, &p) in proj.data().iter().enumerate() {
        if p == 0.0 && rule.zero_lines == ZeroLinePolicy::Skip {
            diag.skipped_lines += 1;
            continue;
        }
        let (idx, w) = system.row(i);
        let row = idx.iter().zip(w).map(|(&v, &w)| (v as usize, w as f64));
        update_row(values, row, p, rule, &mut diag);
    }
    diag
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CartesianReport {
    pub sweeps: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub precompute: Duration,
    pub elapsed: Duration,
    pub stored_bytes: usize,
    pub diagnostics: Diagnostics,
}

/// Cartesian MART with chord-length coefficients, using the same stopping
/// rule and projection floor as the polar solver.
pub fn reconstruct_cartesian(
    proj: &ProjectionSet,
    spec: &CartesianSpec,
    cfg: &SolverConfig,
    mode: CoefficientMode,
) -> Result<(Vec<f64>, CartesianReport)> {
    cfg.validate()?;
    proj.geometry.validate()?;
    let mut report = CartesianReport::default();
    let start = Instant::now();
    let system = match mode {
        CoefficientMode::Stored => Some(StoredSystem::build(&proj.geometry, spec)?),
        CoefficientMode::OnTheFly => None,
    };
    report.precompute = start.elapsed();
    report.stored_bytes = system.as_ref().map_or(0, StoredSystem::byte_size);

    let start = Instant::now();
    let mut values = vec![cfg.f_init; spec.len()];
    let rule = cfg.update_rule(proj.data());
    let mut previous = values.clone();
    for sweep in 0..cfg.max_sweeps {
        previous.copy_from_slice(&values);
        let d = match &system {
            Some(sys) => sweep_stored(proj, sys, &rule, &mut values),
            None => sweep_on_the_fly(proj, spec, &rule, &mut values),
        };
        report.diagnostics.skipped_lines += d.skipped_lines;
        report.diagnostics.clamped_updates += d.clamped_updates;
        let residual = values
            .iter()
            .zip(&previous)
            .filter(|(n, o)| n != o)
            .map(|(n, o)| ((n - o) / o).abs())
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
    Ok((values, report))
}
