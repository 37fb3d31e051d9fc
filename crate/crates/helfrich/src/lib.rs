//! Constrained minimization of the Helfrich bending energy over closed
//! triangulated surfaces.

pub mod energy;
pub mod geometry;
pub mod mesh;

pub use energy::{EnergyParams, GradientField};
pub use geometry::VertexGeometry;
pub use mesh::{MeshQualityReport, TriMesh};
