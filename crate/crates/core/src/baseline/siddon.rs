use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::GridSpec;

/// Regular voxel grid with its minimum corner at `origin`.
///
/// Voxel `(ix, iy, iz)` has flat index `iz * nx * ny + (ny - 1 - iy) * nx +
/// ix`, so each slice is a row-major image with row 0 at the top (largest y),
/// matching the polar-to-Cartesian map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartesianSpec {
    pub dims: [usize; 3],
    pub voxel: [f64; 3],
    pub origin: [f64; 3],
}

impl CartesianSpec {
    pub fn new(dims: [usize; 3], voxel: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 1) {
            return Err(Error::domain(format!("voxel counts must be >= 1, got {dims:?}")));
        }
        if voxel.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("voxel sizes must be positive, got {voxel:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::domain("grid origin must be finite"));
        }
        Ok(CartesianSpec { dims, voxel, origin })
    }

    /// Grid centred on the origin.
    pub fn centered(dims: [usize; 3], voxel: [f64; 3]) -> Result<Self> {
        let origin = [0, 1, 2].map(|a| -0.5 * dims[a] as f64 * voxel[a]);
        CartesianSpec::new(dims, voxel, origin)
    }

    /// Pixel grid of the same size and extent as the polar grid's Cartesian
    /// image: `N x N` pixels of side `r`, one slab per slice.
    pub fn matching(spec: &GridSpec) -> Self {
        let n = spec.n();
        let r = spec.ring_spacing();
        let h = spec.slice_thickness();
        CartesianSpec::centered([n, n, spec.slices()], [r, r, h]).expect("polar grid is valid")
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let [nx, ny, _] = self.dims;
        iz * nx * ny + (ny - 1 - iy) * nx + ix
    }
}

/// Voxels crossed by the segment `s`-`d` with the chord length in each.
pub fn siddon_trace(s: Point3, d: Point3, spec: &CartesianSpec) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut alphas = Vec::new();
    siddon_trace_into(s, d, spec, &mut alphas, &mut out);
    out
}

/// Parametric Siddon traversal: the crossing parameters of the x, y and z
/// planes are generated in order, merged, and each interval is assigned to
/// the voxel containing its midpoint. `alphas` is scratch space; results are
/// appended to `out` after clearing it.
pub fn siddon_trace_into(
    s: Point3,
    d: Point3,
    spec: &CartesianSpec,
    alphas: &mut Vec<f64>,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    alphas.clear();
    let p1 = [s.x, s.y, s.z];
    let delta = [d.x - s.x, d.y - s.y, d.z - s.z];
    let length = (d - s).norm();
    if length == 0.0 {
        return;
    }

    let (mut a_min, mut a_max) = (0.0f64, 1.0f64);
    for a in 0..3 {
        let lo = spec.origin[a];
        let hi = lo + spec.dims[a] as f64 * spec.voxel[a];
        if delta[a] == 0.0 {
            if p1[a] < lo || p1[a] > hi {
                return;
            }
            continue;
        }
        let t0 = (lo - p1[a]) / delta[a];
        let t1 = (hi - p1[a]) / delta[a];
        a_min = a_min.max(t0.min(t1));
        a_max = a_max.min(t0.max(t1));
    }
    if a_max <= a_min {
        return;
    }

    // crossing parameters per axis, each list ascending
    let mut lists: [Vec<f64>; 3] = Default::default();
    for a in 0..3 {
        if delta[a] == 0.0 {
            continue;
        }
        let (o, v) = (spec.origin[a], spec.voxel[a]);
        let enter = (p1[a] + a_min * delta[a] - o) / v;
        let leave = (p1[a] + a_max * delta[a] - o) / v;
        let first = enter.min(leave).ceil().max(0.0) as usize;
        let last = (enter.max(leave).floor() as usize).min(spec.dims[a]);
        let plane = |i: usize| (o + i as f64 * v - p1[a]) / delta[a];
        let list = &mut lists[a];
        if delta[a] > 0.0 {
            list.extend((first..=last).map(plane));
        } else {
            list.extend((first..=last).rev().map(plane));
        }
        list.retain(|&t| t > a_min && t < a_max);
    }

    // three-way merge
    alphas.push(a_min);
    let mut idx = [0usize; 3];
    loop {
        let mut best = None;
        for a in 0..3 {
            if let Some(&t) = lists[a].get(idx[a]) {
                if best.is_none_or(|(_, b)| t < b) {
                    best = Some((a, t));
                }
            }
        }
        match best {
            Some((a, t)) => {
                idx[a] += 1;
                alphas.push(t);
            }
            None => break,
        }
    }
    alphas.push(a_max);

    for w in alphas.windows(2) {
        let chord = (w[1] - w[0]) * length;
        if chord <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let mut cell = [0usize; 3];
        for a in 0..3 {
            let x = (p1[a] + mid * delta[a] - spec.origin[a]) / spec.voxel[a];
            cell[a] = (x.floor().max(0.0) as usize).min(spec.dims[a] - 1);
        }
        out.push((spec.index(cell[0], cell[1], cell[2]), chord));
    }
}
