//! Test objects: Shepp-Logan ellipse/ellipsoid phantoms and user volumes,
//! sampled at grid centroids.

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::GridSpec;
use crate::solver::Field;

const SHEPP_LOGAN_2D: &str = include_str!("../data/shepp_logan_2d.txt");
const SHEPP_LOGAN_3D: &str = include_str!("../data/shepp_logan_3d.txt");

/// One term of an additive ellipsoid phantom, in normalised coordinates.
/// Planar ellipses have an infinite third semi-axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    pub intensity: f64,
    pub semi_axes: [f64; 3],
    pub center: [f64; 3],
    /// Euler angles (phi, theta, psi) in degrees.
    pub angles: [f64; 3],
}

impl Ellipsoid {
    fn rotation(&self) -> [[f64; 3]; 3] {
        let [phi, theta, psi] = self.angles.map(f64::to_radians);
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (ss, cs) = psi.sin_cos();
        [
            [cs * cp - ct * sp * ss, cs * sp + ct * cp * ss, ss * st],
            [-ss * cp - ct * sp * cs, -ss * sp + ct * cp * cs, cs * st],
            [st * sp, -st * cp, ct],
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let m = self.rotation();
        let mut q = 0.0;
        for (row, axis) in m.iter().zip(self.semi_axes) {
            let local = row[0] * d[0] + row[1] * d[1] + row[2] * d[2];
            q += (local / axis).powi(2);
        }
        q <= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    SheppLogan2d,
    SheppLogan3d,
    RawVolume,
}

impl PhantomKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shepp-logan-2d" => Ok(PhantomKind::SheppLogan2d),
            "shepp-logan-3d" => Ok(PhantomKind::SheppLogan3d),
            "raw-volume" => Ok(PhantomKind::RawVolume),
            other => Err(Error::input(format!("unknown phantom kind '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhantomKind::SheppLogan2d => "shepp-logan-2d",
            PhantomKind::SheppLogan3d => "shepp-logan-3d",
            PhantomKind::RawVolume => "raw-volume",
        }
    }
}

/// What to generate.
#[derive(Clone, Debug, PartialEq)]
pub enum PhantomSpec {
    /// Sum of ellipses/ellipsoids.
    Ellipsoids(Vec<Ellipsoid>),
    /// Row-major Cartesian samples `[slice][row][col]` of an `N x N (x N)`
    /// image, row 0 at the top.
    Raw(Vec<f64>),
}

impl PhantomSpec {
    pub fn shepp_logan_2d() -> Self {
        PhantomSpec::Ellipsoids(parse_table(SHEPP_LOGAN_2D).expect("bundled table parses"))
    }

    pub fn shepp_logan_3d() -> Self {
        PhantomSpec::Ellipsoids(parse_table(SHEPP_LOGAN_3D).expect("bundled table parses"))
    }

    pub fn of_kind(kind: PhantomKind) -> Result<Self> {
        match kind {
            PhantomKind::SheppLogan2d => Ok(PhantomSpec::shepp_logan_2d()),
            PhantomKind::SheppLogan3d => Ok(PhantomSpec::shepp_logan_3d()),
            PhantomKind::RawVolume => Err(Error::input("raw-volume phantoms need a volume file")),
        }
    }
}

/// Parses a whitespace-separated ellipse table. Rows hold either six values
/// (intensity a b x0 y0 phi) or ten (intensity a b c x0 y0 z0 phi theta psi);
/// `#` starts a comment.
pub fn parse_table(text: &str) -> Result<Vec<Ellipsoid>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::input(format!("phantom table line {}: {e}", lineno + 1)))?;
        let e = match v.len() {
            6 => Ellipsoid {
                intensity: v[0],
                semi_axes: [v[1], v[2], f64::INFINITY],
                center: [v[3], v[4], 0.0],
                angles: [v[5], 0.0, 0.0],
            },
            10 => Ellipsoid {
                intensity: v[0],
                semi_axes: [v[1], v[2], v[3]],
                center: [v[4], v[5], v[6]],
                angles: [v[7], v[8], v[9]],
            },
            n => {
                return Err(Error::input(format!(
                    "phantom table line {}: expected 6 or 10 columns, found {n}",
                    lineno + 1
                )))
            }
        };
        if e.semi_axes.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::input(format!("phantom table line {}: semi-axes must be positive", lineno + 1)));
        }
        out.push(e);
    }
    Ok(out)
}

/// Unclipped sum of intensities of all ellipsoids containing `p`.
pub fn evaluate(table: &[Ellipsoid], p: [f64; 3]) -> f64 {
    table.iter().filter(|e| e.contains(p)).map(|e| e.intensity).sum()
}

pub struct Phantom {
    pub field: Field,
    /// Row-major Cartesian image per slice, sampled at pixel centres.
    pub cartesian: Vec<Vec<f64>>,
    /// True if any negative value was clipped to zero.
    pub clipped: bool,
}

/// Normalised coordinates of a physical point: the image radius maps to 1 in
/// x and y, the half-height to 1 in z.
fn normalise(spec: &GridSpec, p: Point3) -> [f64; 3] {
    let z = if spec.is_volumetric() { p.z / spec.z_offset() } else { 0.0 };
    [p.x / spec.radius(), p.y / spec.radius(), z]
}

/// Normalised centre of Cartesian pixel (slice, row, col).
fn pixel_center(spec: &GridSpec, slice: usize, row: usize, col: usize) -> [f64; 3] {
    let half = (spec.n() / 2) as f64;
    let x = (col as f64 + 0.5 - half) / half;
    let y = (half - row as f64 - 0.5) / half;
    let z = if spec.is_volumetric() { (slice as f64 + 0.5 - half) / half } else { 0.0 };
    [x, y, z]
}

pub fn generate_phantom(phantom: &PhantomSpec, spec: &GridSpec) -> Result<Phantom> {
    let n = spec.n();
    let mut clipped = false;
    let mut clip = |v: f64| {
        if v < 0.0 {
            clipped = true;
            0.0
        } else {
            // also turns -0.0 into +0.0
            v + 0.0
        }
    };
    let sample: Box<dyn Fn([f64; 3]) -> f64> = match phantom {
        PhantomSpec::Ellipsoids(table) => {
            let table = table.clone();
            Box::new(move |p| evaluate(&table, p))
        }
        PhantomSpec::Raw(volume) => {
            let expected = spec.slices() * n * n;
            if volume.len() != expected {
                return Err(Error::input(format!(
                    "raw volume has {} samples, grid needs {expected}",
                    volume.len()
                )));
            }
            let volume = volume.clone();
            let slices = spec.slices();
            Box::new(move |p: [f64; 3]| {
                let half = (n / 2) as f64;
                let idx = |v: f64, len: usize| ((v * half + half).floor().max(0.0) as usize).min(len - 1);
                let col = idx(p[0], n);
                let row = idx(-p[1], n);
                let slice = if slices > 1 { idx(p[2], slices) } else { 0 };
                volume[(slice * n + row) * n + col]
            })
        }
    };

    let values: Vec<f64> = (0..spec.len())
        .map(|flat| {
            let addr = spec.address(flat).expect("flat index in range");
            clip(sample(normalise(spec, spec.centroid(&addr))))
        })
        .collect();
    let cartesian = (0..spec.slices())
        .map(|s| {
            (0..n * n)
                .map(|pix| clip(sample(pixel_center(spec, s, pix / n, pix % n))))
                .collect()
        })
        .collect();
    Ok(Phantom { field: Field::new(*spec, values)?, cartesian, clipped })
}
