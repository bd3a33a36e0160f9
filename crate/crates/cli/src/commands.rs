use std::fs;
use std::path::{Path, PathBuf};

use polarct::baseline::{bench_compare, BenchConfig};
use polarct::forward::{generate_projections, ProjectionModel};
use polarct::io::{self, parse_point, Metadata, Window};
use polarct::metrics::{intensity_profile, Image, MetricReport};
use polarct::phantom::{generate_phantom, parse_table, PhantomKind, PhantomSpec};
use polarct::solver::reconstruct_from;
use polarct::tracer::precompute_first_view;
use polarct::{Error, Field, GridMode, GridSpec, Result, ScanGeometry, SolverConfig, ZeroLinePolicy};

use crate::run::RunConfig;
use crate::{
    BenchArgs, Cli, Command, GridArgs, MapArgs, MetricsArgs, PhantomArgs, ProjectArgs, ReconstructArgs, ScanArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {t} threads: {e}")))?;
    }
    let (threads, seed) = (cli.threads, cli.seed);
    match cli.command {
        Command::Phantom(a) => phantom(a, RunConfig::new("phantom", threads, seed)),
        Command::Project(a) => project(a, RunConfig::new("project", threads, seed)),
        Command::Reconstruct(a) => reconstruct(a, RunConfig::new("reconstruct", threads, seed)),
        Command::Map(a) => map(a, RunConfig::new("map", threads, seed)),
        Command::Metrics(a) => metrics(a, RunConfig::new("metrics", threads, seed)),
        Command::Bench(a) => bench(a, RunConfig::new("bench", threads, seed)),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Input(format!("cannot read '{}': {e}", path.display())))
}

fn grid_from_args(args: &GridArgs, mode: GridMode, default_n: usize, default_radius: f64) -> Result<GridSpec> {
    let n = args.n.unwrap_or(default_n);
    let radius = args.radius.unwrap_or(default_radius);
    match mode {
        GridMode::Planar => {
            if args.half_height.is_some() {
                return Err(Error::Config("--half-height only applies to 3D grids".into()));
            }
            GridSpec::planar(n, radius)
        }
        GridMode::Volumetric => GridSpec::volumetric(n, radius, args.half_height.unwrap_or(radius)),
    }
    .map_err(|e| Error::Config(e.to_string()))
}

/// Slice file names: the path itself for one slice, `<stem>_sNNN.<ext>`
/// otherwise.
fn slice_paths(base: &Path, slices: usize) -> Vec<PathBuf> {
    if slices == 1 {
        return vec![base.to_path_buf()];
    }
    (0..slices).map(|s| slice_path(base, s)).collect()
}

fn slice_path(base: &Path, slice: usize) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "pgm".into());
    base.with_file_name(format!("{stem}_s{slice:03}.{ext}"))
}

/// Writes the Cartesian slices of `field` as PGMs sharing one window.
fn write_rasters(field: &Field, base: &Path, window: Window, meta: &Metadata) -> Result<Vec<PathBuf>> {
    let paths = slice_paths(base, field.spec().slices());
    for (s, (img, path)) in field.to_cartesian().into_iter().zip(&paths).enumerate() {
        let mut m = meta.clone();
        m.set("raster.slice", s);
        m.set("raster.source", "field mapped to the Cartesian grid");
        io::write_pgm(path, &Image::square(img)?, window, &m)?;
    }
    Ok(paths)
}

fn phantom(a: PhantomArgs, mut run: RunConfig) -> Result<()> {
    let kind = PhantomKind::parse(&a.kind)?;
    let (spec, phantom_spec) = match kind {
        PhantomKind::SheppLogan2d | PhantomKind::SheppLogan3d => {
            let volumetric = kind == PhantomKind::SheppLogan3d;
            let (mode, n, radius) =
                if volumetric { (GridMode::Volumetric, 64, 0.5) } else { (GridMode::Planar, 128, 1.2) };
            if a.volume.is_some() {
                return Err(Error::Config("--volume only applies to raw-volume phantoms".into()));
            }
            let spec = grid_from_args(&a.grid, mode, n, radius)?;
            let table = match &a.table {
                Some(p) => {
                    run.path("table", p);
                    let text = String::from_utf8(read_input(p)?)
                        .map_err(|_| Error::Input(format!("'{}' is not UTF-8 text", p.display())))?;
                    PhantomSpec::Ellipsoids(parse_table(&text)?)
                }
                None => PhantomSpec::of_kind(kind)?,
            };
            (spec, table)
        }
        PhantomKind::RawVolume => {
            let path = a.volume.as_ref().ok_or_else(|| Error::Config("raw-volume needs --volume".into()))?;
            let n = a.grid.n.ok_or_else(|| Error::Config("raw-volume needs --n".into()))?;
            run.path("volume", path);
            let bytes = read_input(path)?;
            if bytes.len() % 4 != 0 {
                return Err(Error::Input(format!(
                    "'{}': truncated f32 sample at byte offset {}",
                    path.display(),
                    bytes.len() / 4 * 4
                )));
            }
            let samples: Vec<f64> =
                bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
            let mode = if samples.len() == n * n {
                GridMode::Planar
            } else if samples.len() == n * n * n {
                GridMode::Volumetric
            } else {
                return Err(Error::Input(format!(
                    "'{}' holds {} samples; expected N^2 = {} or N^3 = {}",
                    path.display(),
                    samples.len(),
                    n * n,
                    n * n * n
                )));
            };
            if let Some((i, v)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::Input(format!("sample {i} at byte offset {} is {v}", 4 * i)));
            }
            (grid_from_args(&a.grid, mode, n, 1.0)?, PhantomSpec::Raw(samples))
        }
    };
    run.grid = Some(spec);
    run.param("kind", kind.as_str());
    run.path("out", &a.out);
    let companion = a.companion.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".pgm");
        PathBuf::from(p)
    });
    run.path("companion", &companion);

    let mut ph = generate_phantom(&phantom_spec, &spec)?;
    // the companion raster must match what a later read of the field file sees
    for v in ph.field.values_mut() {
        *v = *v as f32 as f64;
    }
    let mut meta = run.metadata();
    meta.set("provenance", format!("phantom {}", kind.as_str()));
    meta.set("phantom.clipped_negatives", ph.clipped);
    io::write_field(&a.out, &ph.field, &meta)?;
    let window = Window::spanning(ph.field.values());
    let written = write_rasters(&ph.field, &companion, window, &meta)?;
    println!("wrote {} ({} grids) and {} raster file(s)", a.out.display(), spec.len(), written.len());
    if ph.clipped {
        println!("note: negative phantom values were clipped to 0");
    }
    Ok(())
}

fn scan_from_args(args: &ScanArgs, spec: &GridSpec) -> Result<ScanGeometry> {
    let mut g = if spec.is_volumetric() { ScanGeometry::reference_cone() } else { ScanGeometry::reference_fan() };
    if let Some(v) = args.views {
        g.views = v;
    }
    if let Some(s) = &args.source {
        g.source = parse_point(s, "--source").map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(d) = &args.detector {
        g.detector_center = parse_point(d, "--detector").map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(d) = &args.detectors {
        let counts = parse_list(d, "--detectors")?;
        match counts[..] {
            [u] => (g.detectors_u, g.detectors_v) = (u, 1),
            [u, v] => (g.detectors_u, g.detectors_v) = (u, v),
            _ => return Err(Error::Config(format!("--detectors expects U or U,V, got '{d}'"))),
        }
    }
    if let Some(s) = args.spacing {
        g.spacing = s;
    }
    g.validate()?;
    Ok(g)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("{what}: '{s}' is not a comma-separated list of integers")))
}

fn project(a: ProjectArgs, mut run: RunConfig) -> Result<()> {
    let model = ProjectionModel::parse(&a.model).map_err(|e| Error::Config(e.to_string()))?;
    let (field, field_meta) = io::read_field(&a.field)?;
    let spec = *field.spec();
    let geom = scan_from_args(&a.scan, &spec)?;
    run.grid = Some(spec);
    run.geometry = Some(geom.clone());
    run.param("model", model.as_str());
    run.param("quarter_symmetry", !a.no_symmetry && geom.is_quarter_symmetric());
    run.path("field", &a.field);
    run.path("out", &a.out);

    let cache = match model {
        ProjectionModel::Binary => {
            Some(precompute_first_view(&geom, &spec, !a.no_symmetry && geom.is_quarter_symmetric())?)
        }
        ProjectionModel::LengthWeighted => None,
    };
    let proj = generate_projections(&field, &geom, model, cache.as_ref())?;
    let mut meta = run.metadata();
    meta.set(
        "provenance",
        format!(
            "{} projections of {} ({})",
            model.as_str(),
            a.field.display(),
            field_meta.get("provenance").unwrap_or("unknown")
        ),
    );
    io::write_projections(&a.out, &proj, &meta)?;
    println!("wrote {} ({} views x {} lines)", a.out.display(), geom.views, geom.num_lines());
    Ok(())
}

fn reconstruct(a: ReconstructArgs, mut run: RunConfig) -> Result<()> {
    let zero_lines = ZeroLinePolicy::parse(&a.zero_lines)?;
    let cfg = SolverConfig {
        beta: a.beta,
        tolerance: a.tolerance,
        max_sweeps: a.max_sweeps,
        f_init: a.f_init,
        p_floor: a.p_floor,
        zero_lines,
    };
    cfg.validate()?;
    let (proj, proj_meta) = io::read_projections(&a.projections)?;
    let spec = if a.grid.n.is_some() {
        let mode = match &a.mode {
            Some(m) => GridMode::parse(m).map_err(|e| Error::Config(e.to_string()))?,
            None => proj_meta.grid().map(|g| g.mode()).unwrap_or(GridMode::Planar),
        };
        let radius = a.grid.radius.or_else(|| proj_meta.grid().ok().map(|g| g.radius()));
        let radius = radius.ok_or_else(|| Error::Config("--radius is needed when the projections carry no grid".into()))?;
        grid_from_args(&a.grid, mode, 0, radius)?
    } else {
        if a.mode.is_some() || a.grid.radius.is_some() || a.grid.half_height.is_some() {
            return Err(Error::Config("grid options need --n".into()));
        }
        proj_meta.grid().map_err(|e| Error::Input(format!("projections carry no usable grid; pass --n ({e})")))?
    };
    run.grid = Some(spec);
    run.geometry = Some(proj.geometry.clone());
    run.solver = Some(cfg);
    run.param("quarter_symmetry", !a.no_symmetry && proj.geometry.is_quarter_symmetric());
    run.path("projections", &a.projections);
    run.path("out", &a.out);
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report");
        PathBuf::from(p)
    });
    run.path("report", &report_path);

    let start = std::time::Instant::now();
    let cache = precompute_first_view(&proj.geometry, &spec, !a.no_symmetry && proj.geometry.is_quarter_symmetric())?;
    let precompute = start.elapsed();
    let (field, mut report) = reconstruct_from(&proj, &cache, &cfg, Field::constant(spec, cfg.f_init))?;
    report.precompute = precompute;

    let mut meta = run.metadata();
    meta.set("provenance", format!("reconstruction of {}", a.projections.display()));
    meta.set("report.sweeps", report.sweeps);
    meta.set("report.converged", report.converged);
    meta.set("report.final_residual", report.residuals.last().copied().unwrap_or(0.0));
    meta.set("report.residuals", join(&report.residuals));
    meta.set("report.precompute_seconds", report.precompute.as_secs_f64());
    meta.set("report.solve_seconds", report.elapsed.as_secs_f64());
    meta.set("report.cache_bytes", cache.byte_size());
    meta.set("report.skipped_lines", report.diagnostics.skipped_lines);
    meta.set("report.clamped_updates", report.diagnostics.clamped_updates);
    meta.set("report.warnings", report.warnings.join("; "));
    io::write_field(&a.out, &field, &meta)?;
    io::write_atomic(&report_path, meta.render().as_bytes())?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!(
        "wrote {}: {} sweeps, converged = {}, final residual {:.3e}",
        a.out.display(),
        report.sweeps,
        report.converged,
        report.residuals.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

fn map(a: MapArgs, mut run: RunConfig) -> Result<()> {
    let (field, field_meta) = io::read_field(&a.input)?;
    let auto = Window::spanning(field.values());
    let window = Window { lo: a.window_min.unwrap_or(auto.lo), hi: a.window_max.unwrap_or(auto.hi) };
    if !(window.hi > window.lo) {
        return Err(Error::Config(format!("window [{}, {}] is empty", window.lo, window.hi)));
    }
    run.grid = Some(*field.spec());
    run.path("input", &a.input);
    run.path("out", &a.out);
    let mut meta = run.metadata();
    meta.set("provenance", format!("map of {} ({})", a.input.display(), field_meta.get("provenance").unwrap_or("unknown")));
    let written = write_rasters(&field, &a.out, window, &meta)?;
    println!("wrote {} raster file(s), window [{}, {}]", written.len(), window.lo, window.hi);
    Ok(())
}

/// Reads a field file, a single PGM, or the `_sNNN` slice set of a PGM base
/// name.
fn read_volume(path: &Path) -> Result<Vec<Image>> {
    if path.exists() {
        return io::read_raster(path);
    }
    let mut slices = Vec::new();
    while let Some(p) = Some(slice_path(path, slices.len())).filter(|p| p.exists()) {
        slices.push(io::read_pgm(&p)?);
    }
    if slices.is_empty() {
        return Err(Error::Input(format!("'{}' does not exist", path.display())));
    }
    Ok(slices)
}

fn metrics(a: MetricsArgs, mut run: RunConfig) -> Result<()> {
    let reference = read_volume(&a.reference)?;
    let test = read_volume(&a.test)?;
    let report = MetricReport::compute(&reference, &test, a.range)?;
    run.path("reference", &a.reference);
    run.path("test", &a.test);
    if let Some(r) = a.range {
        run.param("range", r);
    }
    let mut m = run.metadata();
    m.set("slices", reference.len());
    m.set("mae", report.mae);
    m.set("rmse", report.rmse);
    m.set("ssim", report.ssim);
    m.set("area_average.reference", report.area_average_reference);
    m.set("area_average.test", report.area_average_test);
    m.set("sharpness.reference", report.sharpness_reference);
    m.set("sharpness.test", report.sharpness_test);
    if let Some(row) = a.row {
        run.param("row", row);
        let fmt = |v: Vec<f64>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        m.set("profile.reference", fmt(intensity_profile(&reference[0], row)?));
        m.set("profile.test", fmt(intensity_profile(&test[0], row)?));
    }
    let text = m.render();
    print!("{text}");
    if let Some(out) = &a.out {
        io::write_atomic(out, text.as_bytes())?;
    }
    Ok(())
}

fn bench(a: BenchArgs, mut run: RunConfig) -> Result<()> {
    let cfg = BenchConfig {
        sizes: parse_list(&a.sizes, "--sizes")?,
        views: parse_list(&a.views, "--views")?,
        sweeps: a.sweeps,
        beta: a.beta,
        parallel: a.parallel,
        time_stored: a.time_stored,
        ..BenchConfig::default()
    };
    run.geometry = Some(cfg.geometry.clone());
    run.param("sizes", &a.sizes);
    run.param("views", &a.views);
    run.param("sweeps", a.sweeps);
    run.param("beta", a.beta);
    run.param("parallel", a.parallel);
    let report = bench_compare(&cfg)?;
    let mut text = String::new();
    for (k, v) in run.metadata().entries() {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    text.push_str(&report.to_table());
    print!("{text}");
    if let Some(out) = &a.out {
        io::write_atomic(out, text.as_bytes())?;
    }
    Ok(())
}
