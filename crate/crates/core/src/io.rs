//! Binary field and projection files, `key = value` sidecars and 16-bit PGM
//! export.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! offset 0   8-byte magic ("PCTFIELD" or "PCTPROJ\0")
//! offset 8   u32 format version (1)
//! offset 12  u32 number of dimensions k
//! offset 16  k x u64 dimensions
//! then       f32 values in flat order
//! ```
//!
//! Field dimensions are `(N, N, slices)`; projection dimensions are
//! `(views, detectors_u, detectors_v)`. Spacings, positions and provenance
//! live in the sidecar `<file>.meta`.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::{GridMode, GridSpec};
use crate::metrics::Image;
use crate::scan::{ProjectionSet, ScanGeometry};
use crate::solver::Field;

pub const FIELD_MAGIC: [u8; 8] = *b"PCTFIELD";
pub const PROJECTION_MAGIC: [u8; 8] = *b"PCTPROJ\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const PGM_MAX: u16 = u16::MAX;

/// Ordered `key = value` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Metadata::default()
    }

    /// Sets `key`, replacing an existing value in place.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Copies every entry of `other`, overriding existing keys.
    pub fn extend(&mut self, other: &Metadata) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| Error::input(format!("metadata is missing '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::input(format!("metadata '{key}' has invalid value '{raw}'")))
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Metadata::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::input(format!("metadata line {} has no '='", i + 1)))?;
            meta.set(k.trim(), v.trim());
        }
        Ok(meta)
    }

    pub fn put_grid(&mut self, spec: &GridSpec) {
        self.set("grid.mode", spec.mode().as_str());
        self.set("grid.n", spec.n());
        self.set("grid.ring_spacing", spec.ring_spacing());
        self.set("grid.slice_thickness", spec.slice_thickness());
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.require("grid.n")?,
            self.require("grid.ring_spacing")?,
            self.require("grid.slice_thickness")?,
            GridMode::parse(self.get("grid.mode").unwrap_or("planar"))?,
        )
        .map_err(|e| Error::input(format!("metadata describes an invalid grid: {e}")))
    }

    pub fn put_geometry(&mut self, g: &ScanGeometry) {
        self.set("scan.source", point(g.source));
        self.set("scan.detector_center", point(g.detector_center));
        self.set("scan.detectors_u", g.detectors_u);
        self.set("scan.detectors_v", g.detectors_v);
        self.set("scan.spacing", g.spacing);
        self.set("scan.views", g.views);
        self.set("scan.step_degrees", g.step_degrees());
    }

    pub fn geometry(&self) -> Result<ScanGeometry> {
        let g = ScanGeometry {
            source: parse_point(self.get("scan.source").unwrap_or(""), "scan.source")?,
            detector_center: parse_point(self.get("scan.detector_center").unwrap_or(""), "scan.detector_center")?,
            detectors_u: self.require("scan.detectors_u")?,
            detectors_v: self.require("scan.detectors_v")?,
            spacing: self.require("scan.spacing")?,
            views: self.require("scan.views")?,
        };
        g.validate().map_err(|e| Error::input(format!("metadata describes an invalid scan: {e}")))?;
        Ok(g)
    }
}

fn point(p: Point3) -> String {
    format!("{},{},{}", p.x, p.y, p.z)
}

/// Parses `x,y` or `x,y,z`.
pub fn parse_point(s: &str, what: &str) -> Result<Point3> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::input(format!("{what}: '{s}' is not a comma-separated point")))?;
    match parts[..] {
        [x, y] => Ok(Point3::new(x, y, 0.0)),
        [x, y, z] => Ok(Point3::new(x, y, z)),
        _ => Err(Error::input(format!("{what}: expected 2 or 3 coordinates, got '{s}'"))),
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("'{}' is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

pub fn write_metadata(path: &Path, meta: &Metadata) -> Result<()> {
    write_atomic(&sidecar_path(path), meta.render().as_bytes())
}

pub fn read_metadata(path: &Path) -> Result<Metadata> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side)
        .map_err(|e| Error::input(format!("cannot read sidecar '{}': {e}", side.display())))?;
    Metadata::parse(&text)
}

fn encode(magic: [u8; 8], dims: &[u64], values: impl Iterator<Item = f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * dims.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &'a [u8], offset: usize, len: usize, what: &str) -> Result<&'a [u8]> {
    bytes.get(offset..offset + len).ok_or_else(|| {
        Error::input(format!(
            "truncated file: {what} needs {len} bytes at byte offset {offset}, file has {}",
            bytes.len()
        ))
    })
}

/// Checks the header and returns the dimensions and the values.
fn decode(bytes: &[u8], magic: [u8; 8]) -> Result<(Vec<u64>, Vec<f32>)> {
    let found = take(bytes, 0, 8, "magic")?;
    if found != magic {
        return Err(Error::input(format!(
            "bad magic at byte offset 0: expected {:?}, found {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(found)
        )));
    }
    let version = u32::from_le_bytes(take(bytes, 8, 4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::input(format!(
            "unsupported format version {version} at byte offset 8 (expected {FORMAT_VERSION})"
        )));
    }
    let ndims = u32::from_le_bytes(take(bytes, 12, 4, "dimension count")?.try_into().expect("4 bytes")) as usize;
    if ndims == 0 || ndims > 8 {
        return Err(Error::input(format!("invalid dimension count {ndims} at byte offset 12")));
    }
    let mut dims = Vec::with_capacity(ndims);
    for i in 0..ndims {
        let off = HEADER_LEN + 8 * i;
        dims.push(u64::from_le_bytes(take(bytes, off, 8, "dimension")?.try_into().expect("8 bytes")));
    }
    let start = HEADER_LEN + 8 * ndims;
    let count = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .and_then(|c| usize::try_from(c).ok())
        .and_then(|c| c.checked_mul(4).map(|_| c))
        .ok_or_else(|| Error::input(format!("dimensions {dims:?} overflow at byte offset {HEADER_LEN}")))?;
    let payload = take(bytes, start, count * 4, "payload")?;
    if bytes.len() != start + count * 4 {
        return Err(Error::input(format!(
            "{} trailing bytes after the payload at byte offset {}",
            bytes.len() - start - count * 4,
            start + count * 4
        )));
    }
    let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok((dims, values))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::input(format!("cannot read '{}': {e}", path.display())))
}

/// Writes a field (values rounded to `f32`) and its sidecar. `meta` is
/// copied into the sidecar after the grid description.
pub fn write_field(path: &Path, field: &Field, meta: &Metadata) -> Result<()> {
    let spec = field.spec();
    let bytes = encode(FIELD_MAGIC, &[spec.n() as u64, spec.n() as u64, spec.slices() as u64], field.values().iter().map(|&v| v as f32));
    let mut side = Metadata::new();
    side.set("file.kind", "field");
    side.put_grid(spec);
    side.extend(meta);
    write_atomic(path, &bytes)?;
    write_metadata(path, &side)
}

pub fn read_field(path: &Path) -> Result<(Field, Metadata)> {
    let (dims, values) = decode(&read_bytes(path)?, FIELD_MAGIC)?;
    let meta = read_metadata(path)?;
    let spec = meta.grid()?;
    if dims != [spec.n() as u64, spec.n() as u64, spec.slices() as u64] {
        return Err(Error::input(format!(
            "field dimensions {dims:?} disagree with sidecar grid (N = {}, slices = {})",
            spec.n(),
            spec.slices()
        )));
    }
    let field = Field::new(spec, values.into_iter().map(f64::from).collect())?;
    Ok((field, meta))
}

pub fn write_projections(path: &Path, proj: &ProjectionSet, meta: &Metadata) -> Result<()> {
    let g = &proj.geometry;
    let dims = [g.views as u64, g.detectors_u as u64, g.detectors_v as u64];
    let bytes = encode(PROJECTION_MAGIC, &dims, proj.data().iter().map(|&v| v as f32));
    let mut side = Metadata::new();
    side.set("file.kind", "projections");
    side.put_geometry(g);
    side.extend(meta);
    write_atomic(path, &bytes)?;
    write_metadata(path, &side)
}

pub fn read_projections(path: &Path) -> Result<(ProjectionSet, Metadata)> {
    let (dims, values) = decode(&read_bytes(path)?, PROJECTION_MAGIC)?;
    let meta = read_metadata(path)?;
    let g = meta.geometry()?;
    if dims != [g.views as u64, g.detectors_u as u64, g.detectors_v as u64] {
        return Err(Error::input(format!(
            "projection dimensions {dims:?} disagree with sidecar scan ({} views, {}x{} detectors)",
            g.views, g.detectors_u, g.detectors_v
        )));
    }
    let proj = ProjectionSet::new(g, values.into_iter().map(f64::from).collect())?;
    Ok((proj, meta))
}

/// Intensity window mapping `[lo, hi]` onto `0..=65535`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    /// Window spanning all values; a constant set maps to `[v, v + 1]`.
    pub fn spanning<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            return Window { lo: 0.0, hi: 1.0 };
        }
        if hi > lo {
            Window { lo, hi }
        } else {
            Window { lo, hi: lo + 1.0 }
        }
    }

    pub fn quantize(&self, v: f64) -> u16 {
        let t = ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        (t * PGM_MAX as f64).round() as u16
    }

    pub fn level(&self, q: u16) -> f64 {
        self.lo + (q as f64 / PGM_MAX as f64) * (self.hi - self.lo)
    }
}

/// Binary 16-bit PGM (big-endian samples), row 0 first.
pub fn encode_pgm(image: &Image, window: Window) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", image.cols(), image.rows(), PGM_MAX).into_bytes();
    for &v in image.data() {
        out.extend_from_slice(&window.quantize(v).to_be_bytes());
    }
    out
}

/// Writes a PGM and a sidecar holding the window and `meta`.
pub fn write_pgm(path: &Path, image: &Image, window: Window, meta: &Metadata) -> Result<()> {
    let mut side = Metadata::new();
    side.set("file.kind", "pgm");
    side.set("window.min", window.lo);
    side.set("window.max", window.hi);
    side.set("window.rule", "value = min + sample / 65535 * (max - min), clamped");
    side.extend(meta);
    write_atomic(path, &encode_pgm(image, window))?;
    write_metadata(path, &side)
}

/// Parses a binary PGM with maxval 65535 into raw samples.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    // header: magic, width, height, maxval separated by whitespace, comments allowed
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::input(format!("truncated PGM header at byte offset {pos}")));
        }
        fields.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
    }
    if fields[0].1 != "P5" {
        return Err(Error::input(format!("bad PGM magic at byte offset 0: '{}'", fields[0].1)));
    }
    let number = |i: usize| -> Result<usize> {
        fields[i]
            .1
            .parse()
            .map_err(|_| Error::input(format!("bad PGM header value '{}' at byte offset {}", fields[i].1, fields[i].0)))
    };
    let (cols, rows, maxval) = (number(1)?, number(2)?, number(3)?);
    if maxval != PGM_MAX as usize {
        return Err(Error::input(format!(
            "unsupported PGM maxval {maxval} at byte offset {} (expected 65535)",
            fields[3].0
        )));
    }
    pos += 1; // single whitespace before the raster
    let payload = take(bytes, pos, rows * cols * 2, "PGM raster")?;
    let samples = payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((rows, cols, samples))
}

/// Reads a PGM back to real values using the window in its sidecar, or the
/// raw sample levels when there is no sidecar.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let (rows, cols, samples) = decode_pgm(&read_bytes(path)?)?;
    let window = if sidecar_path(path).exists() {
        let meta = read_metadata(path)?;
        Window { lo: meta.require("window.min")?, hi: meta.require("window.max")? }
    } else {
        Window { lo: 0.0, hi: PGM_MAX as f64 }
    };
    Image::new(rows, cols, samples.into_iter().map(|q| window.level(q)).collect())
}

/// Kind of file detected from its leading bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Field,
    Projections,
    Pgm,
}

pub fn detect_kind(path: &Path) -> Result<FileKind> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(&FIELD_MAGIC) {
        Ok(FileKind::Field)
    } else if bytes.starts_with(&PROJECTION_MAGIC) {
        Ok(FileKind::Projections)
    } else if bytes.starts_with(b"P5") {
        Ok(FileKind::Pgm)
    } else {
        Err(Error::input(format!("'{}': unrecognised file type at byte offset 0", path.display())))
    }
}

/// Cartesian slices of a field file, or the single slice of a PGM.
pub fn read_raster(path: &Path) -> Result<Vec<Image>> {
    match detect_kind(path)? {
        FileKind::Field => {
            let (field, _) = read_field(path)?;
            field.to_cartesian().into_iter().map(Image::square).collect()
        }
        FileKind::Pgm => Ok(vec![read_pgm(path)?]),
        FileKind::Projections => Err(Error::input(format!(
            "'{}' holds projections, expected a field or raster",
            path.display()
        ))),
    }
}
