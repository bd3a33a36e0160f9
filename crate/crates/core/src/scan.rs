//! Source/detector geometry and projection data containers.

use crate::error::{Error, Result};
use crate::geometry::{Angle, Point3};

/// Point source facing a flat detector panel, rotated `views` times over a
/// full circle about the z axis.
///
/// The panel is perpendicular to the source-centre axis; its `u` direction
/// lies in the XY plane and its `v` direction is +z. Detector `line` index is
/// `iv * detectors_u + iu`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGeometry {
    pub source: Point3,
    pub detector_center: Point3,
    pub detectors_u: usize,
    pub detectors_v: usize,
    pub spacing: f64,
    pub views: usize,
}

impl ScanGeometry {
    pub fn fan(source: Point3, detector_center: Point3, detectors: usize, spacing: f64, views: usize) -> Self {
        ScanGeometry { source, detector_center, detectors_u: detectors, detectors_v: 1, spacing, views }
    }

    pub fn cone(
        source: Point3,
        detector_center: Point3,
        detectors: (usize, usize),
        spacing: f64,
        views: usize,
    ) -> Self {
        ScanGeometry {
            source,
            detector_center,
            detectors_u: detectors.0,
            detectors_v: detectors.1,
            spacing,
            views,
        }
    }

    /// Fan-beam setup used for the 2D phantoms: source (-8, 0), panel centre
    /// (8, 0), 101 detectors at 0.05 spacing, 50 views.
    pub fn reference_fan() -> Self {
        ScanGeometry::fan(Point3::new(-8.0, 0.0, 0.0), Point3::new(8.0, 0.0, 0.0), 101, 0.05, 50)
    }

    /// Cone-beam setup used for the 3D phantom: source (-3, 0, 0), panel
    /// centre (10, 0, 0), 101 x 101 detectors at 0.05 spacing, 70 views.
    pub fn reference_cone() -> Self {
        ScanGeometry::cone(
            Point3::new(-3.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            (101, 101),
            0.05,
            70,
        )
    }

    pub fn with_views(mut self, views: usize) -> Self {
        self.views = views;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.views < 1 {
            return Err(Error::config("number of views must be >= 1"));
        }
        if self.detectors_u < 1 || self.detectors_v < 1 {
            return Err(Error::config("detector counts must be >= 1"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::config(format!("detector spacing must be positive, got {}", self.spacing)));
        }
        if !self.source.is_finite() || !self.detector_center.is_finite() {
            return Err(Error::config("source and detector positions must be finite"));
        }
        let (s, d) = (self.source, self.detector_center);
        if s.x * d.x + s.y * d.y >= 0.0 {
            return Err(Error::config("source and detector must lie on opposite sides of the origin"));
        }
        Ok(())
    }

    pub fn num_lines(&self) -> usize {
        self.detectors_u * self.detectors_v
    }

    /// Angular step between views in degrees.
    pub fn step_degrees(&self) -> f64 {
        360.0 / self.views as f64
    }

    pub fn view_angle(&self, view: usize) -> Angle {
        Angle::of_view(view, self.views)
    }

    /// Unit vector along the panel's in-plane axis.
    fn u_axis(&self) -> (f64, f64) {
        let ax = self.detector_center.x - self.source.x;
        let ay = self.detector_center.y - self.source.y;
        let len = ax.hypot(ay);
        (-ay / len, ax / len)
    }

    /// Position of detector element `line` in the reference (first) view.
    pub fn detector_position(&self, line: usize) -> Point3 {
        let iu = line % self.detectors_u;
        let iv = line / self.detectors_u;
        let half = 0.5 * self.spacing;
        // integer offsets keep mirrored elements exact negatives of each other
        let ou = (2 * iu as i64 - (self.detectors_u as i64 - 1)) as f64 * half;
        let ov = (2 * iv as i64 - (self.detectors_v as i64 - 1)) as f64 * half;
        let (ux, uy) = self.u_axis();
        Point3::new(
            self.detector_center.x + ux * ou,
            self.detector_center.y + uy * ou,
            self.detector_center.z + ov,
        )
    }

    /// Source and detector element `line` rotated to `view`.
    pub fn line_endpoints(&self, view: usize, line: usize) -> (Point3, Point3) {
        let theta = self.view_angle(view).degrees().to_radians();
        (self.source.rotate_z(theta), self.detector_position(line).rotate_z(theta))
    }

    /// True when the panel is mirror-symmetric about the source-centre axis
    /// (y -> -y) and the central transverse plane (z -> -z).
    pub fn is_quarter_symmetric(&self) -> bool {
        let (s, d) = (self.source, self.detector_center);
        s.y == 0.0
            && d.y == 0.0
            && s.z == 0.0
            && d.z == 0.0
            && self.detectors_u % 2 == 1
            && self.detectors_v % 2 == 1
    }
}

/// Line integrals indexed by (view, detector line).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSet {
    pub geometry: ScanGeometry,
    data: Vec<f64>,
}

impl ProjectionSet {
    pub fn new(geometry: ScanGeometry, data: Vec<f64>) -> Result<Self> {
        let expected = geometry.views * geometry.num_lines();
        if data.len() != expected {
            return Err(Error::input(format!(
                "projection data has {} values, geometry needs {expected}",
                data.len()
            )));
        }
        Ok(ProjectionSet { geometry, data })
    }

    pub fn zeros(geometry: ScanGeometry) -> Self {
        let n = geometry.views * geometry.num_lines();
        ProjectionSet { geometry, data: vec![0.0; n] }
    }

    pub fn get(&self, view: usize, line: usize) -> f64 {
        self.data[view * self.geometry.num_lines() + line]
    }

    pub fn view(&self, view: usize) -> &[f64] {
        let n = self.geometry.num_lines();
        &self.data[view * n..(view + 1) * n]
    }

    pub fn view_mut(&mut self, view: usize) -> &mut [f64] {
        let n = self.geometry.num_lines();
        &mut self.data[view * n..(view + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_fan_panel() {
        let g = ScanGeometry::reference_fan();
        g.validate().unwrap();
        assert_eq!(g.num_lines(), 101);
        let c = g.detector_position(50);
        assert_eq!(c, Point3::new(8.0, 0.0, 0.0));
        let first = g.detector_position(0);
        let last = g.detector_position(100);
        assert_eq!(first.y, -last.y);
        assert!((last.y - 2.5).abs() < 1e-12);
        assert!(g.is_quarter_symmetric());
    }

    #[test]
    fn cone_panel_layout() {
        let g = ScanGeometry::reference_cone();
        assert_eq!(g.num_lines(), 101 * 101);
        let p = g.detector_position(101 * 100 + 100);
        assert!((p.y - 2.5).abs() < 1e-12 && (p.z - 2.5).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let mut g = ScanGeometry::reference_fan();
        g.views = 0;
        assert!(g.validate().is_err());
        let mut g = ScanGeometry::reference_fan();
        g.detector_center = Point3::new(-8.0, 1.0, 0.0);
        assert!(g.validate().is_err());
        let mut g = ScanGeometry::reference_fan();
        g.spacing = 0.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn projection_shape_checked() {
        let g = ScanGeometry::reference_fan().with_views(2);
        assert!(ProjectionSet::new(g.clone(), vec![0.0; 10]).is_err());
        let p = ProjectionSet::new(g, vec![1.0; 202]).unwrap();
        assert_eq!(p.view(1).len(), 101);
    }
}
