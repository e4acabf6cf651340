//! Meshes, P1 vector fields, gradient operators, load assembly and norms.

pub mod assembly;
pub mod field;
pub mod io;
pub mod mesh;
pub mod structured;

pub use assembly::{assemble_load, korn_constant, remove_rigid_part, DofMap, COMPATIBILITY_TOL};
pub use field::{
    basis_gradient, cell_gradient, gradient, norms, CellTensorField, DataFn, Field, GradientKind, QuadratureRule,
};
pub use io::{read_field_file, read_mesh, write_field_file, write_mesh, CellBlock, NodalBlock};
pub use mesh::{BoundaryFacet, FacetTag, MeshDomain, Point};
pub use structured::{build_structured_mesh, GeometrySpec};
