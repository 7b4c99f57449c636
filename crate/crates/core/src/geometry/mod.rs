//! Planar sections, hexahedral volume meshes and point location.

pub mod element;
pub mod locate;
mod section;
mod shape;
mod volume;

pub use section::{build_section_mesh, graded_section_mesh, QuadPoint2, SectionMesh};
pub use shape::{SectionSpec, Shape2};
pub use volume::{build_cylinder_mesh, build_halfbox_mesh, Grading, MeshKind, NodeSet, VolumeMesh};
