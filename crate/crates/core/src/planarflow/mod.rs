//! The planar system of the weak generic kernel limit, its heteroclinic
//! connection, the cubic test-function criterion and the finite-speed
//! four-dimensional profile system.

mod cs;
mod flow;
mod heteroclinic;
mod region;
mod testfn;

pub use cs::cs_profile;
pub use flow::{
    char_poly, eigen_directions, flow_field, half_line_flux, lyapunov_matrix, lyapunov_v, EigenDirections, Mat2,
    PlanarFlow,
};
pub use heteroclinic::{
    heteroclinic, line_angle_deg, overshoots, tau_sharp, HeteroclinicResult, CAPTURE_RADIUS, SAMPLE_DT,
};
pub use region::{boundary_region, boundary_region_csv, BoundaryRow};
pub use testfn::{i2a_interval, p4_coefficients, tau_star, test_function_check, TestFunction, TestFunctionVerdict, A_GRID};
