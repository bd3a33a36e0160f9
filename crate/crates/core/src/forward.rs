//! Synthetic projection data.
//!
//! The binary model sums field values over the grids reported by the tracer,
//! which is exactly the model the solver inverts. The length-weighted model
//! weights every grid by the length of the line inside it, for testing
//! against data the solver does not model exactly.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{azimuth, build_sorted_intersections, classify_chord, Point3};
use crate::grid::GridSpec;
use crate::scan::{ProjectionSet, ScanGeometry};
use crate::solver::{forward_project_spans, Field};
use crate::tracer::{precompute_first_view, FirstViewCache, TraceScratch};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionModel {
    Binary,
    LengthWeighted,
}

impl ProjectionModel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(ProjectionModel::Binary),
            "length" | "length-weighted" => Ok(ProjectionModel::LengthWeighted),
            other => Err(Error::input(format!("unknown projection model '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionModel::Binary => "binary",
            ProjectionModel::LengthWeighted => "length-weighted",
        }
    }
}

/// Simulates projections of `field`. A cache for the binary model is built
/// when none is given.
pub fn generate_projections(
    field: &Field,
    geom: &ScanGeometry,
    model: ProjectionModel,
    cache: Option<&FirstViewCache>,
) -> Result<ProjectionSet> {
    geom.validate()?;
    let spec = field.spec();
    match model {
        ProjectionModel::Binary => {
            let owned;
            let cache = match cache {
                Some(c) => {
                    if c.spec() != spec || c.num_lines() != geom.num_lines() {
                        return Err(Error::input("cache does not match the field grid or scan geometry"));
                    }
                    c
                }
                None => {
                    owned = precompute_first_view(geom, spec, geom.is_quarter_symmetric())?;
                    &owned
                }
            };
            Ok(binary_projections(field, geom, cache))
        }
        ProjectionModel::LengthWeighted => {
            let lines = geom.num_lines();
            let data: Vec<f64> = (0..geom.views * lines)
                .into_par_iter()
                .map(|i| {
                    let (s, d) = geom.line_endpoints(i / lines, i % lines);
                    weighted_cells(s, d, spec).iter().map(|&(v, len)| len * field.values()[v]).sum()
                })
                .collect();
            ProjectionSet::new(geom.clone(), data)
        }
    }
}

fn binary_projections(field: &Field, geom: &ScanGeometry, cache: &FirstViewCache) -> ProjectionSet {
    let lines = geom.num_lines();
    let views: Vec<Vec<f64>> = (0..geom.views)
        .into_par_iter()
        .map_init(
            || TraceScratch::new(field.spec()),
            |scratch, view| {
                let theta = geom.view_angle(view);
                (0..lines)
                    .map(|line| forward_project_spans(field.values(), cache.trace_line_spans(line, theta, scratch)))
                    .collect()
            },
        )
        .collect();
    ProjectionSet::new(geom.clone(), views.concat()).expect("sizes match")
}

/// Grids crossed by the segment `s`-`d` with the length of the segment
/// inside each. Chords are split at the radial planes of their ring.
pub fn weighted_cells(s: Point3, d: Point3, spec: &GridSpec) -> Vec<(usize, f64)> {
    let points = build_sorted_intersections(s, d, spec);
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0].point, w[1].point);
        let Some(rec) = classify_chord(a, b, spec) else { continue };
        let ring = rec.ring as usize;
        let count = 4 * (2 * ring - 1);
        let step = TAU / count as f64;
        let base = rec.slice as usize * spec.grids_per_slice() + 4 * (ring - 1) * (ring - 1);
        let e = b - a;
        let length = e.norm();

        // parameters where the chord crosses a radial plane of this ring;
        // the chord sweeps less than half a turn, so only boundaries inside
        // its angular range are tested
        let mut cuts = vec![0.0, 1.0];
        if e.x != 0.0 || e.y != 0.0 {
            let pa = a.y.atan2(a.x);
            let mut sweep = b.y.atan2(b.x) - pa;
            if sweep > PI {
                sweep -= TAU;
            } else if sweep <= -PI {
                sweep += TAU;
            }
            let (lo, hi) = if sweep >= 0.0 { (pa, pa + sweep) } else { (pa + sweep, pa) };
            for k in (lo / step).ceil() as i64..=(hi / step).floor() as i64 {
                let (sb, cb) = (k as f64 * step).sin_cos();
                let den = e.x * sb - e.y * cb;
                if den == 0.0 {
                    continue;
                }
                let t = (a.y * cb - a.x * sb) / den;
                if t > 0.0 && t < 1.0 {
                    cuts.push(t);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        for c in cuts.windows(2) {
            let piece = (c[1] - c[0]) * length;
            if piece <= 0.0 {
                continue;
            }
            let mid = Point3::lerp(a, b, 0.5 * (c[0] + c[1]));
            let sector = azimuth(mid).sector(count as u32) as usize;
            out.push((base + sector, piece));
        }
    }
    out
}
