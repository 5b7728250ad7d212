//! Lagrange finite element spaces, quadrature and sparse assembly.

pub mod assemble;
pub mod qfield;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use assemble::{
    assemble_convection, assemble_gradient_coupling, assemble_load, assemble_load_with, assemble_mass,
    assemble_stiffness, l2_project, linf_norm,
};
pub use qfield::QuadField;
pub use quadrature::QuadratureRule;
pub use space::{CellGeometry, Constraint, FeSpace, Tabulation};
pub use sparse::{SparseCholesky, SparseLu, SparseOperator, TripletBuilder};

/// Equivalent of `build_space`: see [`FeSpace::new`].
pub fn build_space(
    mesh: std::sync::Arc<crate::mesh::Mesh>,
    degree: usize,
    components: usize,
    constraint: Constraint,
) -> crate::Result<FeSpace> {
    FeSpace::new(mesh, degree, components, constraint)
}
