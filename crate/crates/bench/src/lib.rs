//! Fixtures shared by the criterion benchmarks.

use polarct::forward::{generate_projections, ProjectionModel};
use polarct::phantom::{generate_phantom, PhantomSpec};
use polarct::{FirstViewCache, GridSpec, ProjectionSet, ScanGeometry};

/// A 2D fan-beam problem: Shepp-Logan field, its segment cache and
/// binary-consistent projections.
pub struct FanProblem {
    pub spec: GridSpec,
    pub geometry: ScanGeometry,
    pub cache: FirstViewCache,
    pub projections: ProjectionSet,
}

pub fn fan_problem(n: usize, views: usize) -> FanProblem {
    let spec = GridSpec::planar(n, 1.2).expect("valid grid");
    let geometry = ScanGeometry::reference_fan().with_views(views);
    let cache = polarct::tracer::precompute_first_view(&geometry, &spec, true).expect("symmetric panel");
    let phantom = generate_phantom(&PhantomSpec::shepp_logan_2d(), &spec).expect("phantom");
    let projections =
        generate_projections(&phantom.field, &geometry, ProjectionModel::Binary, Some(&cache)).expect("projections");
    FanProblem { spec, geometry, cache, projections }
}
