use std::time::{Duration, Instant};

use super::mart::{project_cartesian, reconstruct_cartesian, CoefficientMode, StoredSystem};
use super::siddon::CartesianSpec;
use crate::error::{Error, Result};
use crate::forward::{generate_projections, ProjectionModel};
use crate::grid::{to_cartesian, uspg_to_cg_map, GridSpec};
use crate::phantom::{generate_phantom, PhantomSpec};
use crate::scan::ScanGeometry;
use crate::solver::{reconstruct_with_cache, SolverConfig};
use crate::tracer::precompute_first_view;

/// Problem sizes and view counts to compare. Every run uses the 2D
/// Shepp-Logan phantom on a disc of radius `radius`, the panel of `geometry`
/// and exactly `sweeps` sweeps in both pipelines.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub views: Vec<usize>,
    pub sweeps: usize,
    pub beta: f64,
    pub radius: f64,
    pub geometry: ScanGeometry,
    /// Use the global thread pool for both pipelines instead of one thread.
    pub parallel: bool,
    /// Also time the stored-coefficient Cartesian solve (memory is always
    /// measured).
    pub time_stored: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![256],
            views: vec![10, 50, 100],
            sweeps: 5,
            beta: 0.4,
            radius: 1.2,
            geometry: ScanGeometry::reference_fan(),
            parallel: false,
            time_stored: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub views: usize,
    pub sweeps: usize,
    pub polar_precompute: Duration,
    pub polar_solve: Duration,
    pub polar_bytes: usize,
    pub cartesian_precompute: Duration,
    pub cartesian_stored_solve: Option<Duration>,
    pub cartesian_bytes: usize,
    pub cartesian_on_the_fly_solve: Duration,
}

impl BenchRow {
    pub fn polar_total(&self) -> Duration {
        self.polar_precompute + self.polar_solve
    }

    /// On-the-fly Cartesian time over polar time, both including tracing.
    pub fn speedup(&self) -> f64 {
        self.cartesian_on_the_fly_solve.as_secs_f64() / self.polar_total().as_secs_f64()
    }

    /// Stored Cartesian coefficients over the polar segment cache.
    pub fn memory_ratio(&self) -> f64 {
        self.cartesian_bytes as f64 / self.polar_bytes as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub threads: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Plain-text table, one row per configuration.
    pub fn to_table(&self) -> String {
        let mut s = format!("# threads = {}\n", self.threads);
        s.push_str(
            "n views sweeps polar_precompute_s polar_solve_s polar_bytes cart_precompute_s cart_stored_solve_s \
             cart_bytes cart_fly_solve_s speedup memory_ratio\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{} {} {} {:.6} {:.6} {} {:.6} {} {} {:.6} {:.3} {:.2}\n",
                r.n,
                r.views,
                r.sweeps,
                r.polar_precompute.as_secs_f64(),
                r.polar_solve.as_secs_f64(),
                r.polar_bytes,
                r.cartesian_precompute.as_secs_f64(),
                r.cartesian_stored_solve.map_or("-".to_string(), |d| format!("{:.6}", d.as_secs_f64())),
                r.cartesian_bytes,
                r.cartesian_on_the_fly_solve.as_secs_f64(),
                r.speedup(),
                r.memory_ratio(),
            ));
        }
        s
    }
}

/// Runs the polar and Cartesian pipelines on identical problems.
pub fn bench_compare(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.sweeps == 0 {
        return Err(Error::config("benchmark needs at least one sweep"));
    }
    if cfg.parallel {
        return run(cfg, rayon::current_num_threads());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run(cfg, 1))
}

fn run(cfg: &BenchConfig, threads: usize) -> Result<BenchReport> {
    let solver = SolverConfig { beta: cfg.beta, tolerance: 0.0, max_sweeps: cfg.sweeps, ..SolverConfig::default() };
    let mut report = BenchReport { threads, rows: Vec::new() };
    for &n in &cfg.sizes {
        let spec = GridSpec::planar(n, cfg.radius)?;
        let cspec = CartesianSpec::matching(&spec);
        let phantom = generate_phantom(&PhantomSpec::shepp_logan_2d(), &spec)?;
        let image = to_cartesian(&uspg_to_cg_map(n)?, phantom.field.values());
        for &views in &cfg.views {
            let geom = cfg.geometry.clone().with_views(views);

            let t = Instant::now();
            let cache = precompute_first_view(&geom, &spec, geom.is_quarter_symmetric())?;
            let polar_precompute = t.elapsed();
            let proj = generate_projections(&phantom.field, &geom, ProjectionModel::Binary, Some(&cache))?;
            let (_, polar) = reconstruct_with_cache(&proj, &cache, &solver)?;

            let cproj = project_cartesian(&image, &geom, &cspec)?;
            let t = Instant::now();
            let system = StoredSystem::build(&geom, &cspec)?;
            let cartesian_precompute = t.elapsed();
            let cartesian_bytes = system.byte_size();
            drop(system);
            let cartesian_stored_solve = if cfg.time_stored {
                Some(reconstruct_cartesian(&cproj, &cspec, &solver, CoefficientMode::Stored)?.1.elapsed)
            } else {
                None
            };
            let (_, fly) = reconstruct_cartesian(&cproj, &cspec, &solver, CoefficientMode::OnTheFly)?;

            report.rows.push(BenchRow {
                n,
                views,
                sweeps: cfg.sweeps,
                polar_precompute,
                polar_solve: polar.elapsed,
                polar_bytes: cache.byte_size(),
                cartesian_precompute,
                cartesian_stored_solve,
                cartesian_bytes,
                cartesian_on_the_fly_solve: fly.elapsed,
            });
        }
    }
    Ok(report)
}
