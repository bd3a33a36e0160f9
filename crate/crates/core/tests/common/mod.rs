//! Independent reference implementations shared by the integration tests and
//! the acceptance harness.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use polarct::geometry::Point3;
use polarct::grid::GridSpec;
use polarct::tracer::{precompute_first_view, Angle, TraceScratch};
use polarct::ScanGeometry;
use rand::Rng;

/// Both roots of `|s_xy + u (d - s)_xy|^2 = radius^2`, smaller first.
pub fn quadratic_roots(s: Point3, d: Point3, radius: f64) -> Option<(f64, f64)> {
    let (ex, ey) = (d.x - s.x, d.y - s.y);
    let a = ex * ex + ey * ey;
    let b = 2.0 * (s.x * ex + s.y * ey);
    let c = s.x * s.x + s.y * s.y - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    // cancellation-free form
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((r1.min(r2), r1.max(r2)))
}

/// Cell containing `p`, or `None` outside the image volume. Pure
/// floating-point arithmetic on the continuous coordinates.
pub fn cell_of(p: Point3, spec: &GridSpec) -> Option<usize> {
    let r = p.x.hypot(p.y);
    if r >= spec.radius() {
        return None;
    }
    let slice = if spec.is_volumetric() {
        let half = spec.axial_extent() / 2.0;
        if p.z.abs() >= half {
            return None;
        }
        (((p.z + half) / spec.slice_thickness()).floor() as usize).min(spec.slices() - 1)
    } else {
        0
    };
    let ring = (r / spec.ring_spacing()).floor() as usize + 1;
    let count = 4 * (2 * ring - 1);
    let phi = p.y.atan2(p.x).rem_euclid(TAU);
    let sector = ((phi / TAU * count as f64).floor() as usize).min(count - 1);
    Some(slice * spec.n() * spec.n() + 4 * (ring - 1) * (ring - 1) + sector)
}

/// Exact length of the segment `s`-`d` inside every cell it crosses.
///
/// The segment is split at every ring cylinder, slice plane and radial
/// sector plane; each piece lies in one cell, identified by its midpoint.
pub fn exact_cell_lengths(s: Point3, d: Point3, spec: &GridSpec) -> BTreeMap<usize, f64> {
    let e = d - s;
    let len = e.norm();
    let mut cuts = vec![0.0, 1.0];
    for k in 1..=spec.rings() {
        if let Some((a, b)) = quadratic_roots(s, d, k as f64 * spec.ring_spacing()) {
            cuts.extend([a, b]);
        }
    }
    if spec.is_volumetric() && e.z != 0.0 {
        let half = spec.axial_extent() / 2.0;
        for m in 0..=spec.slices() {
            let z = m as f64 * spec.slice_thickness() - half;
            cuts.push((z - s.z) / e.z);
        }
    }
    let mut turns = BTreeSet::new();
    for n in 1..=spec.rings() {
        let count = 4 * (2 * n as u64 - 1);
        for j in 0..count {
            let g = gcd(j, count);
            turns.insert((j / g, count / g));
        }
    }
    for (num, den) in turns {
        let phi = TAU * num as f64 / den as f64;
        let (cx, cy) = (phi.cos(), phi.sin());
        let denom = cx * e.y - cy * e.x;
        if denom != 0.0 {
            cuts.push(-(cx * s.y - cy * s.x) / denom);
        }
    }
    cuts.retain(|u| (0.0..=1.0).contains(u));
    cuts.sort_by(f64::total_cmp);
    let mut out = BTreeMap::new();
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let mid = Point3::lerp(s, d, 0.5 * (w[0] + w[1]));
        if let Some(cell) = cell_of(mid, spec) {
            *out.entry(cell).or_insert(0.0) += (w[1] - w[0]) * len;
        }
    }
    out
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Cells hit by points sampled every `step` along the segment.
pub fn sampled_cells(s: Point3, d: Point3, spec: &GridSpec, step: f64) -> BTreeSet<usize> {
    let len = (d - s).norm();
    let count = (len / step).ceil() as usize;
    (0..=count)
        .filter_map(|i| cell_of(Point3::lerp(s, d, (i as f64 + 0.5) / (count + 1) as f64), spec))
        .collect()
}

/// Outcome of comparing a traced cell list with the exact enumeration.
#[derive(Debug, Default)]
pub struct TraceCheck {
    /// Cells with a chord above the grazing threshold that were not traced.
    pub missing: Vec<(usize, f64)>,
    /// Traced cells that are neither in the exact list nor next to a traced
    /// cell of the same ring that is.
    pub spurious: Vec<usize>,
    pub duplicates: usize,
}

impl TraceCheck {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.spurious.is_empty() && self.duplicates == 0
    }
}

/// Compares `traced` with the exact cell lengths of the segment.
///
/// Cells whose chord is shorter than `grazing` may appear on either side. A
/// segment lying exactly on a cell face (a sector or slice boundary plane)
/// belongs to both neighbours equally, so the segment is also shifted by a
/// tiny offset along each axis: a cell is required only if every shifted copy
/// crosses it for at least `grazing`, and allowed if any copy touches it. A
/// traced cell outside that set is tolerated only when it borders, in the
/// same ring and slice, an allowed cell (an endpoint on a sector boundary).
pub fn check_trace(traced: &[usize], s: Point3, d: Point3, spec: &GridSpec, grazing: f64) -> TraceCheck {
    let delta = 1e-3 * grazing;
    let mut shifts = vec![Point3::new(0.0, 0.0, 0.0)];
    for axis in 0..if spec.is_volumetric() { 3 } else { 2 } {
        for sign in [-1.0, 1.0] {
            let mut o = [0.0; 3];
            o[axis] = sign * delta;
            shifts.push(Point3::new(o[0], o[1], o[2]));
        }
    }
    let variants: Vec<BTreeMap<usize, f64>> =
        shifts.iter().map(|&o| exact_cell_lengths(s + o, d + o, spec)).collect();
    let allowed: BTreeSet<usize> = variants.iter().flat_map(|v| v.keys().copied()).collect();
    let set: BTreeSet<usize> = traced.iter().copied().collect();
    let mut check = TraceCheck { duplicates: traced.len() - set.len(), ..Default::default() };
    for (&cell, &len) in &variants[0] {
        let required = variants.iter().all(|v| v.get(&cell).is_some_and(|&l| l >= grazing));
        if required && !set.contains(&cell) {
            check.missing.push((cell, len));
        }
    }
    let per_slice = spec.n() * spec.n();
    for &cell in &set {
        if allowed.contains(&cell) {
            continue;
        }
        let local = cell % per_slice;
        let ring = (local / 4).isqrt() + 1;
        let head = 4 * (ring - 1) * (ring - 1);
        let count = 4 * (2 * ring - 1);
        let base = cell - local + head;
        let sector = local - head;
        let neighbours = [base + (sector + 1) % count, base + (sector + count - 1) % count];
        if !neighbours.iter().any(|n| allowed.contains(n)) {
            check.spurious.push(cell);
        }
    }
    check
}

/// Random fan or cone geometry whose panel is symmetric about the central
/// ray, looking at a grid of radius `radius` centred at the origin.
pub fn random_geometry(rng: &mut impl Rng, radius: f64, volumetric: bool) -> ScanGeometry {
    let src = rng.gen_range(1.3..6.0) * radius;
    let det = rng.gen_range(1.3..6.0) * radius;
    let nu = 2 * rng.gen_range(5..40) + 1;
    // panel wide enough to cover the object from the source
    let half_width = radius * (src + det) / (src * src - radius * radius).sqrt() * rng.gen_range(0.6..1.3);
    let spacing = 2.0 * half_width / (nu - 1) as f64;
    let views = rng.gen_range(4..80);
    if volumetric {
        let nv = 2 * rng.gen_range(3..20) + 1;
        ScanGeometry::cone(Point3::new(-src, 0.0, 0.0), Point3::new(det, 0.0, 0.0), (nu, nv), spacing, views)
    } else {
        ScanGeometry::fan(Point3::new(-src, 0.0, 0.0), Point3::new(det, 0.0, 0.0), nu, spacing, views)
    }
}

/// Uniform point in a box of half-width `w`.
pub fn random_point(rng: &mut impl Rng, w: f64, planar: bool) -> Point3 {
    let z = if planar { 0.0 } else { rng.gen_range(-w..w) };
    Point3::new(rng.gen_range(-w..w), rng.gen_range(-w..w), z)
}

/// Traces `pairs` random (line, source angle) pairs through random grids and
/// geometries and checks each against [`check_trace`]. Returns a description
/// of every mismatch.
pub fn tracer_oracle(rng: &mut impl Rng, pairs: usize, grazing_fraction: f64) -> Vec<String> {
    let grids = [
        GridSpec::planar(8, 1.0).unwrap(),
        GridSpec::planar(16, 1.2).unwrap(),
        GridSpec::planar(32, 0.7).unwrap(),
        GridSpec::planar(64, 1.2).unwrap(),
        GridSpec::volumetric(8, 0.5, 0.5).unwrap(),
        GridSpec::volumetric(16, 1.0, 0.6).unwrap(),
        GridSpec::volumetric(32, 0.5, 0.5).unwrap(),
    ];
    let per_setup = 250;
    let mut failures = Vec::new();
    let mut done = 0;
    while done < pairs {
        let spec = grids[rng.gen_range(0..grids.len())];
        let geom = random_geometry(rng, spec.radius(), spec.is_volumetric());
        let cache = precompute_first_view(&geom, &spec, rng.gen_bool(0.5)).unwrap();
        let mut scratch = TraceScratch::new(&spec);
        let grazing = grazing_fraction * spec.radius();
        for _ in 0..per_setup.min(pairs - done) {
            let line = rng.gen_range(0..geom.num_lines());
            let (theta, s, d) = if rng.gen_bool(0.5) {
                let view = rng.gen_range(0..geom.views);
                let (s, d) = geom.line_endpoints(view, line);
                (geom.view_angle(view), s, d)
            } else {
                let theta = Angle::from_raw(rng.gen());
                let rad = theta.degrees().to_radians();
                (theta, geom.source.rotate_z(rad), geom.detector_position(line).rotate_z(rad))
            };
            let traced = cache.trace_line(line, theta, &mut scratch);
            let check = check_trace(&traced, s, d, &spec, grazing);
            if !check.ok() {
                failures.push(format!("{spec:?} {geom:?} line {line} theta {}: {check:?}", theta.raw()));
            }
            done += 1;
        }
    }
    failures
}
