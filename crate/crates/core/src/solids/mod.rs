//! Mesh-backed solids, uniform grids, scalar fields, and Hausdorff
//! estimation.

mod field;
pub mod gen;
mod grid;
mod hausdorff;
pub mod io;
mod mesh;

pub use field::{parse_field_header, NodeSet, ScalarField};
pub use grid::{exact_cube_root, UniformGrid};
pub use hausdorff::{hausdorff_estimate, PointCloud, SetSample};
pub use io::{load_mesh, normalize_into_box, write_obj};
pub use mesh::{interior_nodes, point_triangle_distance_sq, Solid};
