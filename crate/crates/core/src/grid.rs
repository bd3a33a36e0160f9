//! Layout of the uniformly sampled polar / cylindrical grid.
//!
//! Ring `n` (1-based) is the annulus between radii `(n-1)r` and `nr` and is
//! split into `4(2n-1)` equal sectors, so every cell covers `pi r^2 / 4`.
//! Cells are numbered counter-clockwise from the positive X axis, ring by
//! ring from the centre outward, and slice by slice along z:
//!
//! ```text
//! flat = slice * N^2 + head(ring) + local
//! ```

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Largest supported image size; ring and slice numbers are stored in 16 bits.
pub const MAX_IMAGE_SIZE: usize = 32768;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridMode {
    /// Single-slice polar grid (fan beam).
    Planar,
    /// `N` stacked slices (cone beam).
    Volumetric,
}

impl GridMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GridMode::Planar => "2d",
            GridMode::Volumetric => "3d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "2d" | "2D" | "planar" => Ok(GridMode::Planar),
            "3d" | "3D" | "volumetric" => Ok(GridMode::Volumetric),
            other => Err(Error::input(format!("unknown grid mode '{other}'"))),
        }
    }
}

/// Dimensions and spacings of a polar/cylindrical image space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    ring_spacing: f64,
    slice_thickness: f64,
    mode: GridMode,
}

impl GridSpec {
    pub fn new(n: usize, ring_spacing: f64, slice_thickness: f64, mode: GridMode) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::domain(format!("image size must be even and >= 2, got {n}")));
        }
        if n > MAX_IMAGE_SIZE {
            return Err(Error::domain(format!("image size {n} exceeds {MAX_IMAGE_SIZE}")));
        }
        if !(ring_spacing > 0.0 && ring_spacing.is_finite()) {
            return Err(Error::domain(format!("ring spacing must be positive, got {ring_spacing}")));
        }
        if !(slice_thickness > 0.0 && slice_thickness.is_finite()) {
            return Err(Error::domain(format!(
                "slice thickness must be positive, got {slice_thickness}"
            )));
        }
        Ok(GridSpec { n, ring_spacing, slice_thickness, mode })
    }

    /// 2D grid whose outer ring has the given radius.
    pub fn planar(n: usize, radius: f64) -> Result<Self> {
        let r = radius / (n / 2).max(1) as f64;
        GridSpec::new(n, r, r, GridMode::Planar)
    }

    /// 3D grid of radius `radius` whose `n` slices span `[-half_height, half_height]`.
    pub fn volumetric(n: usize, radius: f64, half_height: f64) -> Result<Self> {
        let half = (n / 2).max(1) as f64;
        GridSpec::new(n, radius / half, half_height / half, GridMode::Volumetric)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ring_spacing(&self) -> f64 {
        self.ring_spacing
    }

    pub fn slice_thickness(&self) -> f64 {
        self.slice_thickness
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn is_volumetric(&self) -> bool {
        self.mode == GridMode::Volumetric
    }

    pub fn rings(&self) -> usize {
        self.n / 2
    }

    pub fn slices(&self) -> usize {
        match self.mode {
            GridMode::Planar => 1,
            GridMode::Volumetric => self.n,
        }
    }

    pub fn grids_per_slice(&self) -> usize {
        self.n * self.n
    }

    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.slices() * self.grids_per_slice()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radius of the outermost cylinder, `(N/2) r`.
    pub fn radius(&self) -> f64 {
        self.rings() as f64 * self.ring_spacing
    }

    /// Axial extent `N h` of a volumetric grid.
    pub fn axial_extent(&self) -> f64 {
        self.n as f64 * self.slice_thickness
    }

    /// Shift added to z before slice classification; the volume is centred on z = 0.
    pub fn z_offset(&self) -> f64 {
        self.axial_extent() / 2.0
    }

    /// Geometric tolerance used for merging intersections and detecting tangency.
    pub fn eps_geom(&self) -> f64 {
        1e-9 * self.radius()
    }

    pub fn ring(&self, n: usize) -> Result<RingLayout> {
        if n == 0 || n > self.rings() {
            return Err(Error::domain(format!("ring {n} outside [1, {}]", self.rings())));
        }
        RingLayout::new(n)
    }

    /// Layouts of every ring, indexed by `ring - 1`.
    pub fn ring_layouts(&self) -> Vec<RingLayout> {
        (1..=self.rings()).map(|n| RingLayout::new(n).expect("ring >= 1")).collect()
    }

    pub fn flat_index(&self, slice: usize, ring: usize, local: usize) -> usize {
        debug_assert!(slice < self.slices());
        debug_assert!(ring >= 1 && ring <= self.rings());
        debug_assert!(local < 4 * (2 * ring - 1));
        slice * self.grids_per_slice() + 4 * (ring - 1) * (ring - 1) + local
    }

    pub fn address(&self, flat: usize) -> Result<GridAddress> {
        if flat >= self.len() {
            return Err(Error::domain(format!("flat index {flat} outside [0, {})", self.len())));
        }
        let per_slice = self.grids_per_slice();
        let slice = flat / per_slice;
        let within = flat % per_slice;
        let ring = ring_of_offset(within);
        let local = within - 4 * (ring - 1) * (ring - 1);
        Ok(GridAddress { slice, ring, local, flat })
    }

    /// Centre of a cell: mid-radius, mid-angle, mid-height.
    pub fn centroid(&self, addr: &GridAddress) -> Point3 {
        let radius = (addr.ring as f64 - 0.5) * self.ring_spacing;
        let count = 4 * (2 * addr.ring - 1);
        let angle = (addr.local as f64 + 0.5) * std::f64::consts::TAU / count as f64;
        let z = match self.mode {
            GridMode::Planar => 0.0,
            GridMode::Volumetric => {
                (addr.slice as f64 + 0.5) * self.slice_thickness - self.z_offset()
            }
        };
        Point3::new(radius * angle.cos(), radius * angle.sin(), z)
    }
}

/// Ring containing the given offset within a slice.
fn ring_of_offset(within: usize) -> usize {
    // head(n) = 4(n-1)^2 <= within < 4n^2
    (within / 4).isqrt() + 1
}

/// One ring of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RingLayout {
    index: usize,
    grid_count: usize,
    head: usize,
}

impl RingLayout {
    pub fn new(n: usize) -> Result<Self> {
        Ok(RingLayout { index: n, grid_count: ring_grid_count(n)?, head: ring_head(n)? })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn grid_count(&self) -> usize {
        self.grid_count
    }

    pub fn head(&self) -> usize {
        self.head
    }

    /// Angle between two consecutive radial planes, in degrees.
    pub fn step_angle(&self) -> f64 {
        360.0 / self.grid_count as f64
    }

    /// Maps a signed circular index onto `[0, n_g)`; negative indices count
    /// backward from the head, so `-1` is the tail.
    pub fn resolve_index(&self, i: i64) -> usize {
        i.rem_euclid(self.grid_count as i64) as usize
    }
}

/// Number of cells in ring `n`: `4(2n - 1)`.
pub fn ring_grid_count(n: usize) -> Result<usize> {
    if n < 1 {
        return Err(Error::domain("ring index must be >= 1"));
    }
    Ok(4 * (2 * n - 1))
}

/// Global number of the first cell of ring `n` within a slice: `4(n-1)^2`.
pub fn ring_head(n: usize) -> Result<usize> {
    if n < 1 {
        return Err(Error::domain("ring index must be >= 1"));
    }
    Ok(4 * (n - 1) * (n - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridAddress {
    pub slice: usize,
    pub ring: usize,
    pub local: usize,
    pub flat: usize,
}

/// Permutation from polar flat index (within one slice) to Cartesian pixel
/// index `row * N + col`.
///
/// Circular ring `n` lands on the perimeter of the centred `2n x 2n` pixel
/// block. Row 0 is the top of the image (largest y); column 0 is the left
/// edge. The head of each ring maps to the right-edge pixel just above the
/// positive X half-axis and both rings are walked counter-clockwise.
pub fn uspg_to_cg_map(n: usize) -> Result<Vec<usize>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::domain(format!("image size must be even and >= 2, got {n}")));
    }
    let half = n / 2;
    let mut map = Vec::with_capacity(n * n);
    for ring in 1..=half {
        let lo = half - ring; // first row/col of the block
        let hi = half + ring - 1; // last row/col of the block
        let mut push = |row: usize, col: usize| map.push(row * n + col);
        // right edge, upper half: rows half-1 down to lo
        for row in (lo..half).rev() {
            push(row, hi);
        }
        // top edge, right to left (corner already visited)
        for col in (lo..hi).rev() {
            push(lo, col);
        }
        // left edge, top to bottom
        for row in lo + 1..=hi {
            push(row, lo);
        }
        // bottom edge, left to right
        for col in lo + 1..=hi {
            push(hi, col);
        }
        // right edge, lower half: rows hi-1 up to half
        for row in (half..hi).rev() {
            push(row, hi);
        }
    }
    debug_assert_eq!(map.len(), n * n);
    Ok(map)
}

/// Rearranges one slice of polar values into a row-major Cartesian image.
pub fn to_cartesian(map: &[usize], polar: &[f64]) -> Vec<f64> {
    assert_eq!(map.len(), polar.len());
    let mut out = vec![0.0; polar.len()];
    for (&pixel, &v) in map.iter().zip(polar) {
        out[pixel] = v;
    }
    out
}

/// Inverse of [`to_cartesian`].
pub fn from_cartesian(map: &[usize], image: &[f64]) -> Vec<f64> {
    assert_eq!(map.len(), image.len());
    map.iter().map(|&pixel| image[pixel]).collect()
}
