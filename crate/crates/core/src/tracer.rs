//! Binary ray tracing through the polar/cylindrical grid.
//!
//! All geometry (intersections, sorting, classification) happens once, for
//! the first view, and is stored as a list of [`SegmentRecord`]s per detector
//! line. Rotating the source about the z axis leaves every chord's slice and
//! ring unchanged and shifts both endpoint angles by the source angle, so any
//! other view is traced with integer arithmetic on the cached angles:
//!
//! * each endpoint falls in sector `floor(phi / step)` of its ring;
//! * if the endpoint angles differ by at most half a turn the chord covers
//!   the sector range between them;
//! * otherwise it wraps through the ring's head, covering the tail end of the
//!   ring followed by its beginning.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{build_sorted_intersections, classify_chord, Point3};
use crate::grid::GridSpec;
use crate::scan::ScanGeometry;

pub use crate::geometry::{Angle, SegmentRecord};

/// Half-open run `start..end` of consecutive global grid numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Segment records of every detector line for the reference view.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstViewCache {
    spec: GridSpec,
    records: Vec<SegmentRecord>,
    offsets: Vec<u32>,
}

impl FirstViewCache {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn num_lines(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_records(&self) -> usize {
        self.records.len()
    }

    /// Records of one detector line, ordered by distance from the source.
    pub fn records(&self, line: usize) -> &[SegmentRecord] {
        &self.records[self.offsets[line] as usize..self.offsets[line + 1] as usize]
    }

    /// Bytes of stored tracing state. Does not depend on the number of views.
    pub fn byte_size(&self) -> usize {
        self.records.len() * std::mem::size_of::<SegmentRecord>()
            + self.offsets.len() * std::mem::size_of::<u32>()
    }

    /// Active spans of `line` at source angle `theta`, written into `scratch`.
    pub fn trace_line_spans<'s>(&self, line: usize, theta: Angle, scratch: &'s mut TraceScratch) -> &'s [Span] {
        scratch.begin_line();
        let per_slice = self.spec.grids_per_slice();
        for rec in self.records(line) {
            scratch.push_chord(rec, theta, per_slice);
        }
        &scratch.spans
    }

    /// Active global grid numbers of `line` at source angle `theta`, without
    /// duplicates. Every listed grid has coefficient 1.
    pub fn trace_line(&self, line: usize, theta: Angle, scratch: &mut TraceScratch) -> Vec<usize> {
        self.trace_line_spans(line, theta, scratch)
            .iter()
            .flat_map(|s| s.start..s.end)
            .collect()
    }

    /// Traces every line of view `view` out of `views`.
    pub fn trace_view(&self, view: usize, views: usize) -> ViewTrace {
        let theta = Angle::of_view(view, views);
        let mut scratch = TraceScratch::new(&self.spec);
        let lines = (0..self.num_lines()).map(|l| self.trace_line(l, theta, &mut scratch)).collect();
        ViewTrace { view, theta, lines }
    }

    /// Plain-text listing of the cache, one record per row.
    pub fn dump(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "# line slice ring phi_k phi_k1")?;
        for line in 0..self.num_lines() {
            for r in self.records(line) {
                writeln!(
                    out,
                    "{line} {} {} {:.9} {:.9}",
                    r.slice,
                    r.ring,
                    r.phi_k.degrees(),
                    r.phi_k1.degrees()
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewTrace {
    pub view: usize,
    pub theta: Angle,
    pub lines: Vec<Vec<usize>>,
}

/// Per-thread working memory for tracing.
///
/// A line re-enters the same (slice, ring) at most once, after dipping into
/// the inner rings, and only the sector where it left can be shared with the
/// sector where it comes back. `last_exit` remembers the exit sector of each
/// ring for the current line so that shared sector is emitted once.
#[derive(Clone, Debug)]
pub struct TraceScratch {
    stamp: u32,
    last_exit: Vec<ExitMark>,
    spans: Vec<Span>,
    counts: Vec<u32>,
    heads: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Default)]
struct ExitMark {
    stamp: u32,
    slice: u16,
    sector: u32,
}

impl TraceScratch {
    pub fn new(spec: &GridSpec) -> Self {
        let rings = spec.rings();
        TraceScratch {
            stamp: 0,
            last_exit: vec![ExitMark::default(); rings + 1],
            spans: Vec::with_capacity(4 * spec.n()),
            counts: (0..=rings).map(|n| if n == 0 { 0 } else { 4 * (2 * n as u32 - 1) }).collect(),
            heads: (0..=rings).map(|n| if n == 0 { 0 } else { 4 * (n as u32 - 1).pow(2) }).collect(),
        }
    }

    fn begin_line(&mut self) {
        self.spans.clear();
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.last_exit.fill(ExitMark::default());
            self.stamp = 1;
        }
    }

    #[inline]
    fn push_chord(&mut self, rec: &SegmentRecord, theta: Angle, per_slice: usize) {
        let ring = rec.ring as usize;
        let count = self.counts[ring];
        let base = rec.slice as usize * per_slice + self.heads[ring] as usize;
        let (enter, leave, pieces) = chord_sectors(rec, theta, count);

        let mark = self.last_exit[ring];
        let shared = mark.stamp == self.stamp && mark.slice == rec.slice && mark.sector == enter;
        self.last_exit[ring] = ExitMark { stamp: self.stamp, slice: rec.slice, sector: leave };

        for (mut lo, mut hi) in pieces.into_iter().flatten() {
            if shared {
                if lo == enter {
                    lo += 1;
                } else if hi == enter {
                    hi -= 1;
                }
                if lo > hi {
                    continue;
                }
            }
            self.spans.push(Span { start: base + lo as usize, end: base + hi as usize + 1 });
        }
    }
}

/// Entry sector, exit sector and the (at most two) inclusive local sector
/// ranges covered by a chord rotated by `theta`.
#[inline]
fn chord_sectors(rec: &SegmentRecord, theta: Angle, count: u32) -> (u32, u32, [Option<(u32, u32)>; 2]) {
    let a = rec.phi_k.rotate(theta);
    let b = rec.phi_k1.rotate(theta);
    let ga = a.sector(count);
    let gb = b.sector(count);
    let pieces = if a.raw().abs_diff(b.raw()) <= Angle::HALF_TURN {
        [Some((ga.min(gb), ga.max(gb))), None]
    } else {
        // walk from the larger sector (negative index) through the head
        [Some((ga.max(gb), count - 1)), Some((0, ga.min(gb)))]
    };
    (ga, gb, pieces)
}

/// Global grid numbers crossed by one chord at source angle `theta`.
pub fn trace_chord(rec: &SegmentRecord, theta: Angle, spec: &GridSpec) -> Vec<usize> {
    let ring = rec.ring as usize;
    let count = 4 * (2 * ring as u32 - 1);
    let base = rec.slice as usize * spec.grids_per_slice() + 4 * (ring - 1) * (ring - 1);
    let (_, _, pieces) = chord_sectors(rec, theta, count);
    pieces
        .into_iter()
        .flatten()
        .flat_map(|(lo, hi)| (lo..=hi).map(move |g| base + g as usize))
        .collect()
}

/// Sorted intersection points of every detector line in the reference view.
fn line_points(geom: &ScanGeometry, spec: &GridSpec, line: usize) -> Vec<Point3> {
    build_sorted_intersections(geom.source, geom.detector_position(line), spec)
        .into_iter()
        .map(|i| i.point)
        .collect()
}

fn classify_points(points: &[Point3], spec: &GridSpec) -> Vec<SegmentRecord> {
    points.windows(2).filter_map(|w| classify_chord(w[0], w[1], spec)).collect()
}

/// Builds the segment cache for the reference view.
///
/// With `quarter_symmetry`, intersections are computed for one quadrant of
/// the panel only and mirrored across y = 0 and z = 0 for the rest; the panel
/// must be symmetric (see [`ScanGeometry::is_quarter_symmetric`]).
pub fn precompute_first_view(
    geom: &ScanGeometry,
    spec: &GridSpec,
    quarter_symmetry: bool,
) -> Result<FirstViewCache> {
    geom.validate()?;
    if quarter_symmetry && !geom.is_quarter_symmetric() {
        return Err(Error::config(
            "quarter symmetry needs a panel mirror-symmetric about y = 0 and z = 0 with odd detector counts",
        ));
    }
    let nu = geom.detectors_u;
    let nv = geom.detectors_v;
    let lines = geom.num_lines();

    let per_line: Vec<Vec<SegmentRecord>> = if quarter_symmetry {
        let (cu, cv) = ((nu - 1) / 2, (nv - 1) / 2);
        let quadrant: Vec<(usize, usize)> =
            (0..=cv).flat_map(|iv| (0..=cu).map(move |iu| (iu, iv))).collect();
        let points: Vec<Vec<Point3>> =
            quadrant.par_iter().map(|&(iu, iv)| line_points(geom, spec, iv * nu + iu)).collect();
        (0..lines)
            .into_par_iter()
            .map(|line| {
                let (iu, iv) = (line % nu, line / nu);
                let (flip_y, flip_z) = (iu > cu, iv > cv);
                let (ru, rv) = (iu.min(nu - 1 - iu), iv.min(nv - 1 - iv));
                let source = &points[rv * (cu + 1) + ru];
                let mirrored: Vec<Point3> = source
                    .iter()
                    .map(|p| {
                        Point3::new(p.x, if flip_y { -p.y } else { p.y }, if flip_z { -p.z } else { p.z })
                    })
                    .collect();
                classify_points(&mirrored, spec)
            })
            .collect()
    } else {
        (0..lines)
            .into_par_iter()
            .map(|line| classify_points(&line_points(geom, spec, line), spec))
            .collect()
    };

    let mut offsets = Vec::with_capacity(lines + 1);
    let mut records = Vec::with_capacity(per_line.iter().map(Vec::len).sum());
    offsets.push(0u32);
    for recs in per_line {
        records.extend(recs);
        let end = u32::try_from(records.len())
            .map_err(|_| Error::config("segment cache exceeds 2^32 records"))?;
        offsets.push(end);
    }
    Ok(FirstViewCache { spec: *spec, records, offsets })
}
