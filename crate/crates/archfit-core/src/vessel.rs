//! Anatomical arch features, wall motion and radial strain.

use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, fp, Vec3};
use crate::mesh::{centerline_from_mesh, ring_stations, CenterlineCurve, Plane, TubeMesh};
use crate::metrics::station_radius;
use crate::planner::{candidate_arclengths, clamp_station};
use crate::slice::{resample_contour, slice_all_loops};
use crate::Result;

/// Anatomical landmarks on the centerline: inlet (A), ascending end (B),
/// apex (T), descending start (C) and outlet (D), with their arclengths.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchLandmarks {
    pub a: Vec3,
    pub b: Vec3,
    pub t: Vec3,
    pub c: Vec3,
    pub d: Vec3,
    pub arclengths: [f64; 5],
}

impl ArchLandmarks {
    /// Ascending region span `[s_A, s_B]`.
    pub fn ascending_span(&self) -> (f64, f64) {
        (self.arclengths[0], self.arclengths[1])
    }

    /// Arch-top region span `[s_B, s_C]`.
    pub fn arch_top_span(&self) -> (f64, f64) {
        (self.arclengths[1], self.arclengths[3])
    }

    /// Descending region span `[s_C, s_D]`.
    pub fn descending_span(&self) -> (f64, f64) {
        (self.arclengths[3], self.arclengths[4])
    }

    /// Centerline length from inlet to outlet.
    pub fn total_length(&self) -> f64 {
        self.arclengths[4] - self.arclengths[0]
    }
}

/// Static shape features of one mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VesselFeatures {
    pub radius_ascending: f64,
    pub radius_top: f64,
    pub radius_descending: f64,
    pub ascending_length: f64,
    pub total_length: f64,
    pub arch_width: f64,
    pub arch_height: f64,
    pub tortuosity: f64,
}

/// Locates the arch landmarks from the centerline height profile along
/// `up`.
///
/// The apex T maximizes height; B and C are the first and last centerline
/// points reaching the height of the second candidate station (the
/// reference-pair level) on the ascending and descending limbs. A fully
/// height-degenerate (flat) centerline keeps B = A and C = D.
pub fn detect_landmarks(mesh: &TubeMesh, up: Vec3) -> Result<ArchLandmarks> {
    let up = math::normalize(up)
        .ok_or_else(|| Error::InvalidParameter("zero up direction".into()))?;
    let cl = centerline_from_mesh(mesh, 500)?;
    detect_landmarks_on(&cl, up)
}

/// Landmark detection on an existing centerline.
pub fn detect_landmarks_on(cl: &CenterlineCurve, up: Vec3) -> Result<ArchLandmarks> {
    let n = cl.points.len();
    let heights: Vec<f64> = cl.points.iter().map(|p| math::dot(*p, up)).collect();
    let h_max = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h_min = heights.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (h_max - h_min).abs().max(1.0);

    // Apex plateau: the contiguous run of samples at maximum height.
    let at_max: Vec<usize> = (0..n).filter(|&i| heights[i] >= h_max - tol).collect();
    let plateau_first = at_max[0];
    let plateau_last = *at_max.last().unwrap();
    let flat = plateau_first == 0 && plateau_last == n - 1;
    let touches_end = plateau_first == 0 || plateau_last == n - 1;
    if touches_end && !flat {
        return Err(Error::NoApex);
    }
    if flat || plateau_last > plateau_first {
        log::warn!(
            "apex plateau of {} samples, using its midpoint",
            plateau_last - plateau_first + 1
        );
    }
    let t_idx = (plateau_first + plateau_last) / 2;

    // Reference height: the second candidate station's level.
    let s2 = candidate_arclengths(cl.total_length())?[1];
    let z2 = math::dot(cl.point_at(s2), up);

    // B: first crossing of the reference height walking from the inlet.
    let first_at = (0..n)
        .find(|&i| heights[i] >= z2 - tol)
        .expect("apex exceeds the reference height");
    let (b, s_b) = if first_at == 0 {
        (cl.points[0], 0.0)
    } else {
        refine_crossing(cl, &heights, first_at - 1, first_at, z2)
    };
    // C: last point still at or above the reference height.
    let last_at = (0..n)
        .rev()
        .find(|&i| heights[i] >= z2 - tol)
        .expect("apex exceeds the reference height");
    let (c, s_c) = if last_at == n - 1 {
        (cl.points[n - 1], cl.total_length())
    } else {
        refine_crossing(cl, &heights, last_at + 1, last_at, z2)
    };

    Ok(ArchLandmarks {
        a: cl.points[0],
        b,
        t: cl.points[t_idx],
        c,
        d: cl.points[n - 1],
        arclengths: [0.0, s_b, cl.arclength[t_idx], s_c, cl.total_length()],
    })
}

fn refine_crossing(
    cl: &CenterlineCurve,
    heights: &[f64],
    below: usize,
    above: usize,
    level: f64,
) -> (Vec3, f64) {
    let (h0, h1) = (heights[below], heights[above]);
    let f = if (h1 - h0).abs() < 1e-300 {
        0.0
    } else {
        ((level - h0) / (h1 - h0)).clamp(0.0, 1.0)
    };
    let p = math::add(
        math::scale(cl.points[below], 1.0 - f),
        math::scale(cl.points[above], f),
    );
    let s = cl.arclength[below] + f * (cl.arclength[above] - cl.arclength[below]);
    (p, s)
}

/// Arch width `‖B − C‖` and height (distance of T from the segment B–C).
pub fn arch_dimensions(landmarks: &ArchLandmarks) -> (f64, f64) {
    let w = math::dist(landmarks.b, landmarks.c);
    let h = point_segment_distance(landmarks.t, landmarks.b, landmarks.c);
    (w, h)
}

fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = math::sub(b, a);
    let len_sq = math::norm_sq(ab);
    if len_sq < 1e-300 {
        return math::dist(p, a);
    }
    let f = (math::dot(math::sub(p, a), ab) / len_sq).clamp(0.0, 1.0);
    math::dist(p, math::add(a, math::scale(ab, f)))
}

/// Tortuosity `1 − w / L_AD` with `L_AD` the inlet-to-outlet centerline
/// length.
pub fn tortuosity(landmarks: &ArchLandmarks) -> f64 {
    let (w, _) = arch_dimensions(landmarks);
    1.0 - w / landmarks.total_length()
}

/// Per-cell displacement magnitude between two frames of the same topology;
/// correspondence is index-based, no re-alignment is applied.
pub fn wall_motion(mesh_t: &TubeMesh, mesh_0: &TubeMesh) -> Result<Vec<f64>> {
    if !mesh_t.same_topology(mesh_0) {
        return Err(Error::TopologyMismatch);
    }
    Ok(mesh_t
        .cell_centers()
        .iter()
        .zip(mesh_0.cell_centers())
        .map(|(a, b)| math::dist(*a, b))
        .collect())
}

/// Mean relative radial strain `|r_t − r_0| / r_0` over the rings whose
/// reference-frame station lies in `region` (arclength interval, mm).
pub fn radial_strain(
    mesh_t: &TubeMesh,
    mesh_0: &TubeMesh,
    region: (f64, f64),
) -> Result<f64> {
    if !mesh_t.same_topology(mesh_0) {
        return Err(Error::TopologyMismatch);
    }
    let stations = ring_stations(mesh_0);
    let rings: Vec<usize> = (0..mesh_0.n_rings)
        .filter(|&r| stations[r] >= region.0 - 1e-9 && stations[r] <= region.1 + 1e-9)
        .collect();
    if rings.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut acc = 0.0;
    for &r in &rings {
        let r0 = mesh_0.ring_radius(r);
        let rt = mesh_t.ring_radius(r);
        acc += fp::abs(rt - r0) / r0;
    }
    Ok(acc / rings.len() as f64)
}

/// Relative inlet-to-outlet centerline length change between two frames,
/// using the landmark chain on each.
pub fn centerline_length_change(mesh_t: &TubeMesh, mesh_0: &TubeMesh, up: Vec3) -> Result<f64> {
    if !mesh_t.same_topology(mesh_0) {
        return Err(Error::TopologyMismatch);
    }
    let l0 = detect_landmarks(mesh_0, up)?.total_length();
    let lt = detect_landmarks(mesh_t, up)?.total_length();
    Ok((lt - l0) / l0)
}

/// Orthogonal slices every `interval` mm of centerline arclength, inclusive
/// endpoints; failed stations are skipped with a warning.
pub fn station_slices(
    mesh: &TubeMesh,
    interval: f64,
) -> Result<Vec<(f64, Vec<Vec3>)>> {
    if interval <= 0.0 {
        return Err(Error::InvalidParameter(alloc::format!(
            "station interval must be positive, got {interval}"
        )));
    }
    let cl = centerline_from_mesh(mesh, 500)?;
    let total = cl.total_length();
    let mut stations = Vec::new();
    let mut s = 0.0;
    while s < total - 1e-9 {
        stations.push(s);
        s += interval;
    }
    stations.push(total);

    let mut out = Vec::with_capacity(stations.len());
    for &s in &stations {
        let sc = clamp_station(s, total);
        let anchor = cl.point_at(sc);
        let Ok(plane) = Plane::from_direction(anchor, cl.tangent_at(sc)) else {
            log::warn!("station at {s:.1} mm: degenerate tangent, skipped");
            continue;
        };
        let loops = slice_all_loops(mesh, &plane);
        let nearest = loops.into_iter().min_by(|a, b| {
            math::dist_sq(math::centroid(a), anchor)
                .partial_cmp(&math::dist_sq(math::centroid(b), anchor))
                .unwrap()
        });
        match nearest {
            Some(polyline) => out.push((s, polyline)),
            None => log::warn!("station at {s:.1} mm failed to slice, skipped"),
        }
    }
    Ok(out)
}

/// All static shape features of one mesh.
pub fn vessel_features(mesh: &TubeMesh, up: Vec3) -> Result<VesselFeatures> {
    let landmarks = detect_landmarks(mesh, up)?;
    let (w, h) = arch_dimensions(&landmarks);
    let cl = centerline_from_mesh(mesh, 500)?;
    let total = cl.total_length();
    let radius_at = |s: f64| -> f64 {
        let sc = clamp_station(s, total);
        let plane = Plane::from_direction(cl.point_at(sc), cl.tangent_at(sc));
        plane
            .ok()
            .and_then(|p| station_radius(mesh, &p, cl.point_at(sc)))
            .unwrap_or(f64::NAN)
    };
    Ok(VesselFeatures {
        radius_ascending: radius_at(landmarks.arclengths[0]),
        radius_top: radius_at(landmarks.arclengths[2]),
        radius_descending: radius_at(landmarks.arclengths[3]),
        ascending_length: landmarks.arclengths[1] - landmarks.arclengths[0],
        total_length: total,
        arch_width: w,
        arch_height: h,
        tortuosity: tortuosity(&landmarks),
    })
}

/// Resamples every station slice of [`station_slices`] to a fixed count;
/// convenience for feature export.
pub fn station_contours(
    mesh: &TubeMesh,
    interval: f64,
    points: usize,
) -> Result<Vec<(f64, Vec<Vec3>)>> {
    station_slices(mesh, interval)?
        .into_iter()
        .map(|(s, poly)| Ok((s, resample_contour(&poly, points)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::circular_tube;
    use approx::assert_relative_eq;

    const UP: Vec3 = [0.0, 0.0, 1.0];

    fn semicircle_mesh(radius: f64, tube_r: f64) -> TubeMesh {
        let centers: Vec<Vec3> = (0..40)
            .map(|i| {
                let a = core::f64::consts::PI * i as f64 / 39.0;
                [-radius * fp::cos(a), 0.0, radius * fp::sin(a)]
            })
            .collect();
        circular_tube(&centers, tube_r, 40).unwrap()
    }

    #[test]
    fn semicircle_landmarks_are_symmetric() {
        let mesh = semicircle_mesh(70.0, 8.0);
        let lm = detect_landmarks(&mesh, UP).unwrap();
        // Apex on top, x ≈ 0.
        assert!(lm.t[2] > 69.0, "apex height {}", lm.t[2]);
        assert!(lm.t[0].abs() < 2.0);
        // B and C symmetric about the apex plane.
        assert_relative_eq!(lm.b[2], lm.c[2], max_relative = 1e-2);
        assert_relative_eq!(lm.b[0], -lm.c[0], epsilon = 1.0);
        // Ordering invariant.
        for w in lm.arclengths.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn vertical_tube_has_no_apex() {
        let centers: Vec<Vec3> = (0..40).map(|i| [0.0, 0.0, 5.0 * i as f64]).collect();
        let mesh = circular_tube(&centers, 8.0, 40).unwrap();
        assert!(matches!(detect_landmarks(&mesh, UP), Err(Error::NoApex)));
    }

    #[test]
    fn flat_tube_tortuosity_is_zero() {
        // Horizontal straight tube: landmarks collapse to B = A, C = D, so
        // width equals length and tortuosity vanishes.
        let centers: Vec<Vec3> = (0..40).map(|i| [5.0 * i as f64, 0.0, 10.0] ).collect();
        let mesh = circular_tube(&centers, 8.0, 40).unwrap();
        let lm = detect_landmarks(&mesh, UP).unwrap();
        assert!(math::dist(lm.b, lm.a) < 1e-6);
        assert!(math::dist(lm.c, lm.d) < 1e-6);
        assert!(tortuosity(&lm).abs() < 1e-9);
    }

    #[test]
    fn semicircle_dimensions_with_diameter_landmarks() {
        // Landmarks constructed at the diameter ends: w = 2R, h = R and
        // tortuosity 1 - 2/pi, all analytic.
        let r = 70.0;
        let mesh = semicircle_mesh(r, 8.0);
        let cl = centerline_from_mesh(&mesh, 500).unwrap();
        let lm = ArchLandmarks {
            a: cl.points[0],
            b: cl.points[0],
            t: cl.point_at(cl.total_length() / 2.0),
            c: cl.points[499],
            d: cl.points[499],
            arclengths: [
                0.0,
                0.0,
                cl.total_length() / 2.0,
                cl.total_length(),
                cl.total_length(),
            ],
        };
        let (w, h) = arch_dimensions(&lm);
        assert_relative_eq!(w, 2.0 * r, max_relative = 1e-3);
        assert_relative_eq!(h, r, max_relative = 1e-3);
        let t = tortuosity(&lm);
        assert!((t - (1.0 - 2.0 / core::f64::consts::PI)).abs() < 1e-3);
    }

    #[test]
    fn elongating_the_arch_increases_tortuosity() {
        // Same width, longer path: append straight limbs below the arch.
        let tort_of = |limb: f64| {
            let mut centers = Vec::new();
            let n_limb = (limb / 5.0) as usize;
            for i in 0..n_limb {
                centers.push([-70.0, 0.0, -limb + 5.0 * i as f64]);
            }
            for i in 0..40 {
                let a = core::f64::consts::PI * i as f64 / 39.0;
                centers.push([-70.0 * fp::cos(a), 0.0, 70.0 * fp::sin(a)]);
            }
            for i in 1..=n_limb {
                centers.push([70.0, 0.0, -5.0 * i as f64]);
            }
            let mesh = circular_tube(&centers, 8.0, 32).unwrap();
            let lm = detect_landmarks(&mesh, UP).unwrap();
            tortuosity(&lm)
        };
        let short = tort_of(20.0);
        let long = tort_of(60.0);
        assert!(long > short, "tortuosity {long} !> {short}");
    }

    #[test]
    fn wall_motion_translation_and_identity() {
        let mesh = semicircle_mesh(60.0, 8.0);
        let motion = wall_motion(&mesh, &mesh).unwrap();
        assert_eq!(motion.len(), mesh.cells.len());
        assert!(motion.iter().all(|&d| d == 0.0));

        let moved = {
            let nodes = mesh
                .nodes
                .iter()
                .map(|p| math::add(*p, [3.0, 4.0, 0.0]))
                .collect();
            mesh.with_nodes(nodes).unwrap()
        };
        let motion = wall_motion(&moved, &mesh).unwrap();
        for d in &motion {
            assert_relative_eq!(*d, 5.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn wall_motion_sees_pure_rotation() {
        // No alignment is applied, so rotating about the centroid yields
        // nonzero motion by design.
        let mesh = semicircle_mesh(60.0, 8.0);
        let centroid = math::centroid(&mesh.nodes);
        let (c, s) = (fp::cos(0.2), fp::sin(0.2));
        let rot: math::Mat3 = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
        let rotated = {
            let nodes = mesh
                .nodes
                .iter()
                .map(|p| {
                    math::add(
                        math::mat3_apply_row(math::sub(*p, centroid), &rot),
                        centroid,
                    )
                })
                .collect();
            mesh.with_nodes(nodes).unwrap()
        };
        let motion = wall_motion(&rotated, &mesh).unwrap();
        let max = motion.iter().cloned().fold(0.0, f64::max);
        assert!(max > 1.0, "rotation motion {max}");
    }

    #[test]
    fn strain_homogeneity_and_identity() {
        let mesh = semicircle_mesh(60.0, 10.0);
        let span = (0.0, centerline_from_mesh(&mesh, 100).unwrap().total_length());
        assert_eq!(radial_strain(&mesh, &mesh, span).unwrap(), 0.0);

        let inflated = {
            let mut nodes = mesh.nodes.clone();
            for r in 0..mesh.n_rings {
                let c = math::centroid(mesh.ring(r));
                for j in 0..mesh.pts_per_ring {
                    let i = r * mesh.pts_per_ring + j;
                    nodes[i] = math::add(c, math::scale(math::sub(nodes[i], c), 1.05));
                }
            }
            mesh.with_nodes(nodes).unwrap()
        };
        assert_relative_eq!(
            radial_strain(&inflated, &mesh, span).unwrap(),
            0.05,
            max_relative = 1e-9
        );

        // Axial-only stretch leaves ring radii untouched.
        let stretched = {
            let c0 = math::centroid(mesh.ring(0));
            let centroids: Vec<Vec3> = (0..mesh.n_rings)
                .map(|r| math::centroid(mesh.ring(r)))
                .collect();
            let mut nodes = mesh.nodes.clone();
            for r in 0..mesh.n_rings {
                let shift = math::scale(math::sub(centroids[r], c0), 0.03);
                for j in 0..mesh.pts_per_ring {
                    let i = r * mesh.pts_per_ring + j;
                    nodes[i] = math::add(nodes[i], shift);
                }
            }
            mesh.with_nodes(nodes).unwrap()
        };
        assert!(radial_strain(&stretched, &mesh, span).unwrap() <= 1e-6);

        assert!(matches!(
            radial_strain(&mesh, &mesh, (1e6, 2e6)),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn strain_is_rigid_invariant() {
        let mesh = semicircle_mesh(60.0, 10.0);
        let inflated = {
            let mut nodes = mesh.nodes.clone();
            for r in 0..mesh.n_rings {
                let c = math::centroid(mesh.ring(r));
                for j in 0..mesh.pts_per_ring {
                    let i = r * mesh.pts_per_ring + j;
                    nodes[i] = math::add(c, math::scale(math::sub(nodes[i], c), 1.07));
                }
            }
            mesh.with_nodes(nodes).unwrap()
        };
        let span = (10.0, 120.0);
        let s0 = radial_strain(&inflated, &mesh, span).unwrap();
        let (c, s) = (fp::cos(0.5), fp::sin(0.5));
        let rot: math::Mat3 = [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]];
        let t = [7.0, -2.0, 4.0];
        let m0 = crate::mesh::transform_mesh(&mesh, &rot, t);
        let m1 = crate::mesh::transform_mesh(&inflated, &rot, t);
        let s1 = radial_strain(&m1, &m0, span).unwrap();
        assert_relative_eq!(s0, s1, max_relative = 1e-9);
    }

    #[test]
    fn length_change_scales_with_uniform_scaling() {
        let mesh = semicircle_mesh(70.0, 8.0);
        let centroid = math::centroid(&mesh.nodes);
        let scaled = {
            let nodes = mesh
                .nodes
                .iter()
                .map(|p| math::add(centroid, math::scale(math::sub(*p, centroid), 1.02)))
                .collect();
            mesh.with_nodes(nodes).unwrap()
        };
        assert_eq!(centerline_length_change(&mesh, &mesh, UP).unwrap(), 0.0);
        let change = centerline_length_change(&scaled, &mesh, UP).unwrap();
        assert!((change - 0.02).abs() < 1e-3, "length change {change}");
    }

    #[test]
    fn station_counts_match_the_interval() {
        // 75 mm centerline at 7.5 mm spacing: 11 stations inclusive.
        let centers: Vec<Vec3> = (0..40)
            .map(|i| [75.0 * i as f64 / 39.0, 0.0, 0.0])
            .collect();
        let mesh = circular_tube(&centers, 6.0, 32).unwrap();
        let slices = station_slices(&mesh, 7.5).unwrap();
        assert_eq!(slices.len(), 11);
        assert_relative_eq!(slices[10].0, 75.0, max_relative = 1e-6);

        // Interval beyond the length: both ends only.
        let slices = station_slices(&mesh, 200.0).unwrap();
        assert_eq!(slices.len(), 2);
    }
}
