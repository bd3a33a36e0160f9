//! Line intersections with the cylindrical and axial surfaces of the grid,
//! and classification of the resulting chords.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::instrument;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn radius_xy(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Point at parameter `u` on the line from `a` to `b`.
    pub fn lerp(a: Point3, b: Point3, u: f64) -> Point3 {
        Point3::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.z + u * (b.z - a.z))
    }

    pub fn midpoint(a: Point3, b: Point3) -> Point3 {
        Point3::new((b.x + a.x) / 2.0, (b.y + a.y) / 2.0, (b.z + a.z) / 2.0)
    }

    /// Rotation about the z axis by `radians`, counter-clockwise.
    pub fn rotate_z(self, radians: f64) -> Point3 {
        let (s, c) = radians.sin_cos();
        Point3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Azimuthal angle as a binary fraction of a full turn (`2^32` units per 360
/// degrees). Addition wraps modulo one turn and sector lookup is an integer
/// multiply, so rotating cached angles needs no floating point at all.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Angle(u32);

const TURN: f64 = 4_294_967_296.0;

impl Angle {
    pub const ZERO: Angle = Angle(0);
    pub const HALF_TURN: u32 = 1 << 31;

    /// Rounds up, so an angle lying exactly on a sector boundary belongs to
    /// the higher sector.
    fn from_turns(turns: f64) -> Angle {
        let raw = (turns * TURN).ceil();
        if !(0.0..TURN).contains(&raw) {
            Angle(0)
        } else {
            Angle(raw as u32)
        }
    }

    pub fn from_degrees(degrees: f64) -> Angle {
        Angle::from_turns(degrees.rem_euclid(360.0) / 360.0)
    }

    pub fn from_radians(radians: f64) -> Angle {
        Angle::from_turns(radians.rem_euclid(TAU) / TAU)
    }

    /// Source angle of view `i` out of `views` equally spaced views over 360 degrees.
    pub fn of_view(i: usize, views: usize) -> Angle {
        assert!(views > 0);
        let i = (i % views) as u128;
        let raw = (i << 32).div_ceil(views as u128);
        Angle(raw as u32)
    }

    pub const fn from_raw(raw: u32) -> Angle {
        Angle(raw)
    }

    pub const fn raw(self) -> u32 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0 as f64 / TURN * 360.0
    }

    pub fn rotate(self, by: Angle) -> Angle {
        Angle(self.0.wrapping_add(by.0))
    }

    /// `floor(angle / (360 / count))`.
    #[inline]
    pub fn sector(self, count: u32) -> u32 {
        ((self.0 as u64 * count as u64) >> 32) as u32
    }
}

/// A point on a line together with its parameter `u` (0 at the source, 1 at
/// the detector). Distance to the source is `u |D - S|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intersection {
    pub u: f64,
    pub point: Point3,
}

/// Portion of a line between two consecutive sorted intersections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chord {
    pub start: Point3,
    pub end: Point3,
}

impl Chord {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

/// Per-chord cache entry: slice, 1-based ring and the azimuthal angles of
/// both endpoints (in source-to-detector order) for the reference view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SegmentRecord {
    pub slice: u16,
    pub ring: u16,
    pub phi_k: Angle,
    pub phi_k1: Angle,
}

/// Perpendicular distance from the z axis to the XY projection of the line
/// through `s` and `d`, and the parameter `t` of the foot of that
/// perpendicular.
pub fn line_xy_distance(s: Point3, d: Point3) -> Result<(f64, f64)> {
    let ex = s.x - d.x;
    let ey = s.y - d.y;
    let denom = ex * ex + ey * ey;
    if denom == 0.0 {
        return Err(Error::DegenerateLine);
    }
    let t = (s.x * ex + s.y * ey) / denom;
    let fx = s.x + t * (d.x - s.x);
    let fy = s.y + t * (d.y - s.y);
    instrument::count_sqrt(1);
    Ok((fx.hypot(fy), t))
}

/// Parameters of the intersections with a z-aligned cylinder of radius
/// `radius`, given the values returned by [`line_xy_distance`].
fn cylinder_params(dist: f64, t: f64, denom: f64, radius: f64, eps: f64) -> Roots {
    if dist > radius + eps {
        Roots::None
    } else if (dist - radius).abs() <= eps {
        Roots::Tangent(t)
    } else {
        instrument::count_sqrt(1);
        let k = ((radius * radius - dist * dist) / denom).sqrt();
        Roots::Two(t - k, t + k)
    }
}

enum Roots {
    None,
    Tangent(f64),
    Two(f64, f64),
}

/// Intersections of the infinite line through `s` and `d` with the cylinder
/// `x^2 + y^2 = radius^2`. A line within `eps` of tangency yields one point.
pub fn cylinder_intersections(
    s: Point3,
    d: Point3,
    radius: f64,
    eps: f64,
) -> Result<Vec<Intersection>> {
    let (dist, t) = line_xy_distance(s, d)?;
    let denom = (s.x - d.x).powi(2) + (s.y - d.y).powi(2);
    let at = |u: f64| Intersection { u, point: Point3::lerp(s, d, u) };
    Ok(match cylinder_params(dist, t, denom, radius, eps) {
        Roots::None => vec![],
        Roots::Tangent(u) => vec![at(u)],
        Roots::Two(a, b) => vec![at(a), at(b)],
    })
}

/// z coordinate of axial plane `m` (0..=N) of a centred volume.
fn plane_z(spec: &GridSpec, m: usize) -> f64 {
    (m as f64 - (spec.n() / 2) as f64) * spec.slice_thickness()
}

/// Crossings of the segment `s`-`d` with the axial planes `z = m h - N h / 2`
/// that fall inside the outer cylinder. Empty for planar grids and for
/// segments parallel to the planes.
pub fn axial_plane_intersections(s: Point3, d: Point3, spec: &GridSpec) -> Vec<Intersection> {
    if !spec.is_volumetric() || s.z == d.z {
        return vec![];
    }
    let limit = spec.radius() + spec.eps_geom();
    let dz = d.z - s.z;
    (0..=spec.n())
        .filter_map(|m| {
            let z = plane_z(spec, m);
            let u = (z - s.z) / dz;
            if !(0.0..=1.0).contains(&u) {
                return None;
            }
            let mut point = Point3::lerp(s, d, u);
            point.z = z;
            (point.x * point.x + point.y * point.y <= limit * limit)
                .then_some(Intersection { u, point })
        })
        .collect()
}

/// All cylinder and axial-plane intersections of the segment `s`-`d` inside
/// the image volume, sorted by distance from `s` with near-duplicates merged.
///
/// Returns an empty list when the segment misses the volume.
pub fn build_sorted_intersections(s: Point3, d: Point3, spec: &GridSpec) -> Vec<Intersection> {
    let eps = spec.eps_geom();
    let length = (d - s).norm();
    if length == 0.0 {
        return vec![];
    }
    let u_tol = eps / length;
    let at = |u: f64| Intersection { u, point: Point3::lerp(s, d, u) };

    let mut points = Vec::with_capacity(2 * spec.rings() + spec.n() + 3);
    let (mut lo, mut hi);

    match line_xy_distance(s, d) {
        Ok((dist, t)) => {
            let denom = (s.x - d.x).powi(2) + (s.y - d.y).powi(2);
            match cylinder_params(dist, t, denom, spec.radius(), eps) {
                Roots::None => return vec![],
                Roots::Tangent(u) => {
                    return if (0.0..=1.0).contains(&u) && within_slab(at(u).point, spec) {
                        vec![at(u)]
                    } else {
                        vec![]
                    };
                }
                Roots::Two(a, b) => {
                    lo = a;
                    hi = b;
                }
            }
            if !clip_axial(s, d, spec, &mut lo, &mut hi) {
                return vec![];
            }
            lo = lo.max(0.0);
            hi = hi.min(1.0);
            if lo > hi {
                return vec![];
            }
            let keep = |u: f64| u >= lo - u_tol && u <= hi + u_tol;
            let r = spec.ring_spacing();
            for ring in 1..=spec.rings() {
                match cylinder_params(dist, t, denom, ring as f64 * r, eps) {
                    Roots::None => {}
                    Roots::Tangent(u) => {
                        if keep(u) {
                            points.push(at(u));
                        }
                    }
                    Roots::Two(a, b) => {
                        if keep(a) {
                            points.push(at(a));
                        }
                        if keep(b) {
                            points.push(at(b));
                        }
                    }
                }
            }
            points.extend(axial_plane_intersections(s, d, spec).into_iter().filter(|p| keep(p.u)));
        }
        Err(_) => {
            // Axial ray: only slice boundaries are crossed.
            let inside = s.radius_xy() <= spec.radius();
            if !inside || !spec.is_volumetric() {
                return vec![];
            }
            lo = 0.0;
            hi = 1.0;
            if !clip_axial(s, d, spec, &mut lo, &mut hi) || lo > hi {
                return vec![];
            }
            points.extend(axial_plane_intersections(s, d, spec));
        }
    }
    // Clip boundaries; usually duplicates of a surface crossing.
    points.push(at(lo));
    points.push(at(hi));

    points.sort_by(|a, b| a.u.total_cmp(&b.u));
    instrument::count_sort();
    points.dedup_by(|next, kept| (next.u - kept.u) <= u_tol);
    points
}

fn within_slab(p: Point3, spec: &GridSpec) -> bool {
    !spec.is_volumetric() || p.z.abs() <= spec.z_offset() + spec.eps_geom()
}

/// Restricts `[lo, hi]` to the parameter range inside the axial extent.
/// Returns false if the line never enters it.
fn clip_axial(s: Point3, d: Point3, spec: &GridSpec, lo: &mut f64, hi: &mut f64) -> bool {
    if !spec.is_volumetric() {
        return true;
    }
    let half = plane_z(spec, spec.n());
    let dz = d.z - s.z;
    if dz == 0.0 {
        return s.z.abs() <= half;
    }
    let a = (-half - s.z) / dz;
    let b = (half - s.z) / dz;
    *lo = lo.max(a.min(b));
    *hi = hi.min(a.max(b));
    lo <= hi
}

/// Slice, ring and endpoint angles of the chord from `start` to `end`.
///
/// Returns `None` for chords shorter than the geometric tolerance (grazing
/// contacts), which carry no cells.
pub fn classify_chord(start: Point3, end: Point3, spec: &GridSpec) -> Option<SegmentRecord> {
    let chord = Chord { start, end };
    instrument::count_sqrt(1);
    if !(chord.length() > spec.eps_geom()) {
        return None;
    }
    let mid = Point3::midpoint(start, end);
    let slice = if spec.is_volumetric() {
        let s = ((mid.z + spec.z_offset()) / spec.slice_thickness()).floor();
        s.clamp(0.0, (spec.slices() - 1) as f64) as u16
    } else {
        0
    };
    instrument::count_sqrt(1);
    let radius = mid.radius_xy();
    let ring = ((radius / spec.ring_spacing()).floor() + 1.0).clamp(1.0, spec.rings() as f64) as u16;
    Some(SegmentRecord {
        slice,
        ring,
        phi_k: azimuth(start),
        phi_k1: azimuth(end),
    })
}

/// Quadrant-aware azimuth of a point in `[0, 360)`.
pub fn azimuth(p: Point3) -> Angle {
    Angle::from_radians(p.y.atan2(p.x))
}
