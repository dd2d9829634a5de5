//! Voxel-overlap and point-set surface-distance metrics, plus radius-error
//! profiles along the centerline.

use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, fp, Vec3};
use crate::mesh::{centerline_from_mesh, Plane, TubeMesh};
use crate::planner;
use crate::slice::{effective_radius, slice_all_loops};
use crate::voxel::VoxelMask;
use crate::Result;

/// One station of a radius-error profile.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadiusStation {
    /// Arclength along the reference centerline, mm.
    pub arclength: f64,
    pub radius_ref: f64,
    pub radius_fit: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Metric bundle for one fitted/reference pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub dice: f64,
    pub iou: f64,
    pub hausdorff: f64,
    pub chamfer: f64,
    pub asd: f64,
    pub radius_profile: Vec<RadiusStation>,
}

fn overlap_counts(a: &VoxelMask, b: &VoxelMask) -> Result<(usize, usize, usize)> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    let (mut tp, mut fp_, mut fn_) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.occupancy.iter().zip(&b.occupancy) {
        match (x, y) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp_ += 1,
            (false, false) => {}
        }
    }
    Ok((tp, fp_, fn_))
}

/// Dice overlap `2TP / (2TP + FP + FN)`. Two empty masks agree vacuously
/// (score 1).
pub fn dice(a: &VoxelMask, b: &VoxelMask) -> Result<f64> {
    let (tp, fp_, fn_) = overlap_counts(a, b)?;
    let den = 2 * tp + fp_ + fn_;
    Ok(if den == 0 { 1.0 } else { 2.0 * tp as f64 / den as f64 })
}

/// Intersection over union `TP / (TP + FP + FN)`; empty-vs-empty is 1.
pub fn iou(a: &VoxelMask, b: &VoxelMask) -> Result<f64> {
    let (tp, fp_, fn_) = overlap_counts(a, b)?;
    let den = tp + fp_ + fn_;
    Ok(if den == 0 { 1.0 } else { tp as f64 / den as f64 })
}

fn directed_nearest<'a>(x: &'a [Vec3], y: &'a [Vec3]) -> impl Iterator<Item = f64> + 'a {
    x.iter().map(move |p| {
        y.iter()
            .map(|q| math::dist_sq(*p, *q))
            .fold(f64::MAX, f64::min)
    })
}

/// Symmetric Hausdorff distance, exact brute force.
pub fn hausdorff(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySet);
    }
    let hx = directed_nearest(x, y).fold(0.0, f64::max);
    let hy = directed_nearest(y, x).fold(0.0, f64::max);
    Ok(fp::sqrt(hx.max(hy)))
}

/// Average surface distance `(Σ_x min_y d + Σ_y min_x d) / (|X| + |Y|)`.
pub fn asd(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySet);
    }
    let sx: f64 = directed_nearest(x, y).map(fp::sqrt).sum();
    let sy: f64 = directed_nearest(y, x).map(fp::sqrt).sum();
    Ok((sx + sy) / (x.len() + y.len()) as f64)
}

/// Chamfer distance `(1/|X|) Σ_x min_y d + (1/|Y|) Σ_y min_x d`.
pub fn chamfer(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySet);
    }
    let sx: f64 = directed_nearest(x, y).map(fp::sqrt).sum();
    let sy: f64 = directed_nearest(y, x).map(fp::sqrt).sum();
    Ok(sx / x.len() as f64 + sy / y.len() as f64)
}

/// Station placement for [`radius_error_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationPlacement {
    /// The twelve candidate-slice arclengths of the planner.
    Candidates,
    /// Uniform stations every `interval` mm (inclusive endpoints).
    Uniform { interval: f64 },
}

/// Slices both meshes orthogonally to the reference centerline and compares
/// effective contour radii (perimeter / 2π) per station.
///
/// Stations where either mesh fails to produce a closed loop are skipped
/// with a warning.
pub fn radius_error_profile(
    fit: &TubeMesh,
    reference: &TubeMesh,
    placement: StationPlacement,
) -> Result<Vec<RadiusStation>> {
    let cl = centerline_from_mesh(reference, 500)?;
    let stations: Vec<f64> = match placement {
        StationPlacement::Candidates => planner::candidate_arclengths(cl.total_length())?,
        StationPlacement::Uniform { interval } => {
            if interval <= 0.0 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "station interval must be positive, got {interval}"
                )));
            }
            let mut s = Vec::new();
            let total = cl.total_length();
            let mut t = 0.0;
            while t < total - 1e-9 {
                s.push(t);
                t += interval;
            }
            s.push(total);
            s
        }
    };

    let mut profile = Vec::with_capacity(stations.len());
    for &s in &stations {
        // Pull end stations slightly inside so the plane cuts transversally.
        let sc = planner::clamp_station(s, cl.total_length());
        let anchor = cl.point_at(sc);
        let plane = match Plane::from_direction(anchor, cl.tangent_at(sc)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let r_ref = station_radius(reference, &plane, anchor);
        let r_fit = station_radius(fit, &plane, anchor);
        match (r_ref, r_fit) {
            (Some(radius_ref), Some(radius_fit)) => {
                profile.push(RadiusStation {
                    arclength: s,
                    radius_ref,
                    radius_fit,
                    abs_err: fp::abs(radius_fit - radius_ref),
                    rel_err: (radius_fit - radius_ref) / radius_ref,
                });
            }
            _ => log::warn!("radius profile: station at {s:.1} mm failed to slice, skipped"),
        }
    }
    Ok(profile)
}

/// Effective radius of the slice loop nearest to `anchor`, or `None` when no
/// closed loop exists at the plane.
pub fn station_radius(mesh: &TubeMesh, plane: &Plane, anchor: Vec3) -> Option<f64> {
    let loops = slice_all_loops(mesh, plane);
    let nearest = loops.into_iter().min_by(|a, b| {
        let da = math::dist_sq(math::centroid(a), anchor);
        let db = math::dist_sq(math::centroid(b), anchor);
        da.partial_cmp(&db).unwrap()
    })?;
    Some(effective_radius(&nearest))
}
