//! Pure forward operations of the registration chain plus the loss terms.

use alloc::vec::Vec;

use crate::math::{self, fp, Mat3, Vec3};
use crate::ssm::ShapeModel;

use super::FitState;

/// Rotation for the row-vector convention `x' = x · R` with
/// `R = R_z(gamma) · R_y(beta) · R_x(alpha)` in that fixed order.
pub fn rotation_matrix(euler: [f64; 3]) -> Mat3 {
    let (rx, ry, rz) = axis_matrices(euler);
    math::mat3_mul(&rz, &math::mat3_mul(&ry, &rx))
}

fn axis_matrices(euler: [f64; 3]) -> (Mat3, Mat3, Mat3) {
    let (sa, ca) = (fp::sin(euler[0]), fp::cos(euler[0]));
    let (sb, cb) = (fp::sin(euler[1]), fp::cos(euler[1]));
    let (sg, cg) = (fp::sin(euler[2]), fp::cos(euler[2]));
    let rx = [[1.0, 0.0, 0.0], [0.0, ca, sa], [0.0, -sa, ca]];
    let ry = [[cb, 0.0, -sb], [0.0, 1.0, 0.0], [sb, 0.0, cb]];
    let rz = [[cg, sg, 0.0], [-sg, cg, 0.0], [0.0, 0.0, 1.0]];
    (rx, ry, rz)
}

/// Rotation matrix together with its partial derivatives in the Euler
/// angles.
pub(super) fn rotation_with_derivatives(euler: [f64; 3]) -> (Mat3, [Mat3; 3]) {
    let (rx, ry, rz) = axis_matrices(euler);
    let (sa, ca) = (fp::sin(euler[0]), fp::cos(euler[0]));
    let (sb, cb) = (fp::sin(euler[1]), fp::cos(euler[1]));
    let (sg, cg) = (fp::sin(euler[2]), fp::cos(euler[2]));
    let dx = [[0.0, 0.0, 0.0], [0.0, -sa, ca], [0.0, -ca, -sa]];
    let dy = [[-sb, 0.0, -cb], [0.0, 0.0, 0.0], [cb, 0.0, -sb]];
    let dz = [[-sg, cg, 0.0], [-cg, -sg, 0.0], [0.0, 0.0, 0.0]];
    let r = math::mat3_mul(&rz, &math::mat3_mul(&ry, &rx));
    let da = math::mat3_mul(&rz, &math::mat3_mul(&ry, &dx));
    let db = math::mat3_mul(&rz, &math::mat3_mul(&dy, &rx));
    let dg = math::mat3_mul(&dz, &math::mat3_mul(&ry, &rx));
    (r, [da, db, dg])
}

/// Similarity transform `x' = psi · (x · R) + offset`.
pub fn similarity_transform(points: &[Vec3], psi: f64, euler: [f64; 3], offset: Vec3) -> Vec<Vec3> {
    let r = rotation_matrix(euler);
    points
        .iter()
        .map(|p| math::add(math::scale(math::mat3_apply_row(*p, &r), psi), offset))
        .collect()
}

/// Polyharmonic warp field: per point,
/// `disp(x) = Σ_k w_k · ‖x − (c_k + dc_k)‖ + linᵀ x̃` with the order-1
/// kernel `phi(r) = r` and `x̃ = (x, 1)`.
pub fn rbf_deform(
    points: &[Vec3],
    centers: &[Vec3],
    offsets: &[Vec3],
    weights: &[Vec3],
    linear: &[[f64; 3]; 4],
) -> Vec<Vec3> {
    assert!(
        centers.len() == offsets.len() && centers.len() == weights.len(),
        "anchor arrays must share a length"
    );
    let anchors: Vec<Vec3> = centers
        .iter()
        .zip(offsets)
        .map(|(c, d)| math::add(*c, *d))
        .collect();
    points
        .iter()
        .map(|p| {
            let mut d = [
                p[0] * linear[0][0] + p[1] * linear[1][0] + p[2] * linear[2][0] + linear[3][0],
                p[0] * linear[0][1] + p[1] * linear[1][1] + p[2] * linear[2][1] + linear[3][1],
                p[0] * linear[0][2] + p[1] * linear[1][2] + p[2] * linear[2][2] + linear[3][2],
            ];
            for (a, w) in anchors.iter().zip(weights) {
                let r = math::dist(*p, *a);
                d = math::add(d, math::scale(*w, r));
            }
            d
        })
        .collect()
}

/// Full forward chain: model evaluation, similarity transform, then the warp
/// applied to the transformed nodes.
pub fn predict_nodes(model: &ShapeModel, state: &FitState) -> Vec<Vec3> {
    let x_pca = model.reconstruct(&state.amplitudes, state.delta);
    let x_trans = similarity_transform(&x_pca, state.psi, state.euler, state.offset);
    let disp = rbf_deform(
        &x_trans,
        &state.control_points,
        &state.control_offsets,
        &state.rbf_weights,
        &state.rbf_linear,
    );
    x_trans
        .iter()
        .zip(&disp)
        .map(|(p, d)| math::add(*p, *d))
        .collect()
}

/// Mean squared nearest-node distance, contour to mesh:
/// `(1/Q) Σ_j min_i ‖s_j − x_i‖²`.
pub fn loss_mesh(contour_points: &[Vec3], mesh_points: &[Vec3]) -> f64 {
    assert!(!contour_points.is_empty() && !mesh_points.is_empty());
    let mut acc = 0.0;
    for s in contour_points {
        let mut best = f64::MAX;
        for x in mesh_points {
            let d = math::dist_sq(*s, *x);
            if d < best {
                best = d;
            }
        }
        acc += best;
    }
    acc / contour_points.len() as f64
}

/// Mean squared nearest-sample distance, data centerline to mesh centerline:
/// `(1/P_s) Σ_i min_j ‖cls_i − clm_j‖²`.
pub fn loss_centerline(cl_slices: &[Vec3], cl_mesh: &[Vec3]) -> f64 {
    loss_mesh(cl_slices, cl_mesh)
}

/// Regularizers: mean squared amplitudes, mean squared Euler angles, mean
/// squared anchor displacement.
pub fn regularization_losses(state: &FitState) -> (f64, f64, f64) {
    let m = state.amplitudes.len().max(1) as f64;
    let modal = state.amplitudes.iter().map(|a| a * a).sum::<f64>() / m;
    let rot = state.euler.iter().map(|e| e * e).sum::<f64>() / 3.0;
    let k = state.control_offsets.len().max(1) as f64;
    let warp = state
        .control_offsets
        .iter()
        .map(|d| math::norm_sq(*d))
        .sum::<f64>()
        / k;
    (modal, rot, warp)
}
