//! Plane/mesh intersection and contour resampling.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, Vec3};
use crate::mesh::{Plane, TubeMesh};
use crate::spline;
use crate::Result;

/// Intersects the mesh surface with a plane and returns every closed loop,
/// sorted by descending perimeter.
///
/// Loops are ordered polylines of triangle-edge crossings, wound
/// counter-clockwise about the plane normal. Open chains (the plane grazing
/// a tube end) are discarded.
pub fn slice_all_loops(mesh: &TubeMesh, plane: &Plane) -> Vec<Vec<Vec3>> {
    // Signed side per node; exact zeros count as the negative side so that
    // both triangles sharing an edge agree on every crossing.
    let side: Vec<bool> = mesh
        .nodes
        .iter()
        .map(|p| plane.signed_distance(*p) > 0.0)
        .collect();
    let dist: Vec<f64> = mesh.nodes.iter().map(|p| plane.signed_distance(*p)).collect();

    let edge_key = |a: u32, b: u32| if a < b { (a, b) } else { (b, a) };

    // Each crossed triangle contributes one segment joining its two crossed
    // edges; loops are chained by shared edge keys.
    struct Segment {
        edges: [(u32, u32); 2],
    }
    let mut segments: Vec<Segment> = Vec::new();
    let mut by_edge: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    let mut crossing_point: BTreeMap<(u32, u32), Vec3> = BTreeMap::new();

    for cell in &mesh.cells {
        let mut crossed: Vec<(u32, u32)> = Vec::with_capacity(2);
        for e in 0..3 {
            let a = cell[e];
            let b = cell[(e + 1) % 3];
            if side[a as usize] != side[b as usize] {
                crossed.push(edge_key(a, b));
            }
        }
        if crossed.len() != 2 {
            continue;
        }
        for key in &crossed {
            crossing_point.entry(*key).or_insert_with(|| {
                let (a, b) = (*key).into();
                let (da, db) = (dist[a as usize], dist[b as usize]);
                let t = da / (da - db);
                math::add(
                    math::scale(mesh.nodes[a as usize], 1.0 - t),
                    math::scale(mesh.nodes[b as usize], t),
                )
            });
        }
        let idx = segments.len();
        segments.push(Segment {
            edges: [crossed[0], crossed[1]],
        });
        by_edge.entry(crossed[0]).or_default().push(idx);
        by_edge.entry(crossed[1]).or_default().push(idx);
    }

    let mut visited = alloc::vec![false; segments.len()];
    let mut loops: Vec<Vec<Vec3>> = Vec::new();
    for start in 0..segments.len() {
        if visited[start] {
            continue;
        }
        let mut chain: Vec<(u32, u32)> = Vec::new();
        let mut current = start;
        let mut enter_edge = segments[start].edges[0];
        visited[start] = true;
        chain.push(enter_edge);
        let closed;
        loop {
            let seg = &segments[current];
            let exit_edge = if seg.edges[0] == enter_edge {
                seg.edges[1]
            } else {
                seg.edges[0]
            };
            chain.push(exit_edge);
            // The partner triangle sharing the exit edge.
            let next = by_edge[&exit_edge]
                .iter()
                .copied()
                .find(|&s| s != current && !visited[s]);
            match next {
                Some(s) => {
                    visited[s] = true;
                    current = s;
                    enter_edge = exit_edge;
                }
                None => {
                    closed = exit_edge == chain[0];
                    break;
                }
            }
        }
        if !closed || chain.len() < 4 {
            log::debug!("discarding open intersection chain of {} edges", chain.len());
            continue;
        }
        chain.pop(); // last edge repeats the first
        let polyline: Vec<Vec3> = chain.iter().map(|e| crossing_point[e]).collect();
        loops.push(orient_ccw(polyline, plane.normal));
    }

    loops.sort_by(|a, b| {
        perimeter(b)
            .partial_cmp(&perimeter(a))
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    loops
}

/// Intersects the mesh with a plane expecting exactly one closed loop.
pub fn slice_with_plane(mesh: &TubeMesh, plane: &Plane) -> Result<Vec<Vec3>> {
    let mut loops = slice_all_loops(mesh, plane);
    match loops.len() {
        0 => Err(Error::NoIntersection),
        1 => Ok(loops.remove(0)),
        n => Err(Error::MultipleLoops(n)),
    }
}

/// Perimeter of a closed polyline.
pub fn perimeter(polyline: &[Vec3]) -> f64 {
    let mut s = 0.0;
    for i in 0..polyline.len() {
        s += math::dist(polyline[i], polyline[(i + 1) % polyline.len()]);
    }
    s
}

/// Centroid-based effective radius of a closed contour: perimeter / 2π.
pub fn effective_radius(polyline: &[Vec3]) -> f64 {
    perimeter(polyline) / (2.0 * core::f64::consts::PI)
}

fn orient_ccw(mut polyline: Vec<Vec3>, normal: Vec3) -> Vec<Vec3> {
    let (u, v) = math::plane_basis(normal);
    let c = math::centroid(&polyline);
    let mut area2 = 0.0;
    for i in 0..polyline.len() {
        let p = math::sub(polyline[i], c);
        let q = math::sub(polyline[(i + 1) % polyline.len()], c);
        area2 += math::dot(p, u) * math::dot(q, v) - math::dot(p, v) * math::dot(q, u);
    }
    if area2 < 0.0 {
        polyline.reverse();
    }
    polyline
}

/// Resamples a closed polyline to `p` points at equal arclength spacing,
/// starting at the first input vertex.
pub fn resample_contour(polyline: &[Vec3], p: usize) -> Result<Vec<Vec3>> {
    if polyline.len() < 3 || p < 3 {
        return Err(Error::InvalidParameter(alloc::format!(
            "closed contour needs >= 3 vertices and p >= 3 (got {} and {p})",
            polyline.len()
        )));
    }
    let total = perimeter(polyline);
    if total < 1e-9 {
        return Err(Error::DegenerateContour);
    }
    // Closed polyline: append the first vertex and walk cumulative lengths.
    let mut cum = Vec::with_capacity(polyline.len() + 1);
    cum.push(0.0);
    for i in 0..polyline.len() {
        let d = math::dist(polyline[i], polyline[(i + 1) % polyline.len()]);
        cum.push(cum[i] + d);
    }
    let at = |i: usize| polyline[i % polyline.len()];
    let mut out = Vec::with_capacity(p);
    let mut seg = 0usize;
    for k in 0..p {
        let target = total * k as f64 / p as f64;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let f = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        out.push(math::add(
            math::scale(at(seg), 1.0 - f),
            math::scale(at(seg + 1), f),
        ));
    }
    Ok(out)
}

/// Cubic-spline curve through ordered contour centroids, resampled to
/// `n_points` by arclength. Fails with [`Error::TooFewSlices`] below five
/// contours; callers fall back to the surrogate arc in
/// [`crate::planner::surrogate_centerline`].
pub fn centerline_from_contours(
    contours: &[Vec<Vec3>],
    n_points: usize,
) -> Result<crate::mesh::CenterlineCurve> {
    if contours.len() < 5 {
        return Err(Error::TooFewSlices {
            got: contours.len(),
            need: 5,
        });
    }
    let centroids: Vec<Vec3> = contours.iter().map(|c| math::centroid(c)).collect();
    let spline3 = spline::CubicSpline3::through_points(&centroids);
    let dense = spline3.sample_uniform_param((n_points * 16).max(2048));
    let mut points = spline::resample_by_arclength(&dense, n_points);
    points[0] = centroids[0];
    let last = points.len() - 1;
    points[last] = centroids[centroids.len() - 1];
    crate::mesh::CenterlineCurve::from_points(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::fp;
    use crate::mesh::{circular_tube, DEFAULT_PTS_PER_RING};
    use approx::assert_relative_eq;

    fn straight_tube(n_rings: usize, radius: f64) -> TubeMesh {
        let centers: Vec<Vec3> = (0..n_rings).map(|r| [0.0, 0.0, r as f64 * 2.0]).collect();
        circular_tube(&centers, radius, DEFAULT_PTS_PER_RING).unwrap()
    }

    #[test]
    fn cylinder_slice_is_a_circle() {
        let mesh = straight_tube(20, 10.0);
        let plane = Plane::new([0.0, 0.0, 7.0], [0.0, 0.0, 1.0]).unwrap();
        let loop_ = slice_with_plane(&mesh, &plane).unwrap();
        assert!(loop_.len() >= DEFAULT_PTS_PER_RING);
        for p in &loop_ {
            assert!((p[2] - 7.0).abs() < 1e-9);
            let r = fp::hypot(p[0], p[1]);
            assert!((r - 10.0).abs() < 0.2, "chordal error {r}");
        }
    }

    #[test]
    fn plane_above_mesh_has_no_intersection() {
        let mesh = straight_tube(10, 10.0);
        let plane = Plane::new([0.0, 0.0, 100.0], [0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            slice_with_plane(&mesh, &plane),
            Err(Error::NoIntersection)
        ));
    }

    #[test]
    fn arch_cut_yields_two_loops() {
        // Semicircular arch: a horizontal plane cuts both limbs.
        let centers: Vec<Vec3> = (0..40)
            .map(|i| {
                let a = core::f64::consts::PI * i as f64 / 39.0;
                [-50.0 * fp::cos(a), 0.0, 50.0 * fp::sin(a)]
            })
            .collect();
        let mesh = circular_tube(&centers, 8.0, DEFAULT_PTS_PER_RING).unwrap();
        let plane = Plane::new([0.0, 0.0, 20.0], [0.0, 0.0, 1.0]).unwrap();
        let loops = slice_all_loops(&mesh, &plane);
        assert_eq!(loops.len(), 2);
        assert!(matches!(
            slice_with_plane(&mesh, &plane),
            Err(Error::MultipleLoops(2))
        ));
        // Sorted by descending perimeter.
        assert!(perimeter(&loops[0]) >= perimeter(&loops[1]));
    }

    #[test]
    fn winding_is_ccw_about_normal() {
        let mesh = straight_tube(10, 10.0);
        let plane = Plane::new([0.0, 0.0, 5.0], [0.0, 0.0, 1.0]).unwrap();
        let loop_ = slice_with_plane(&mesh, &plane).unwrap();
        let (u, v) = math::plane_basis(plane.normal);
        let c = math::centroid(&loop_);
        let mut area2 = 0.0;
        for i in 0..loop_.len() {
            let p = math::sub(loop_[i], c);
            let q = math::sub(loop_[(i + 1) % loop_.len()], c);
            area2 += math::dot(p, u) * math::dot(q, v) - math::dot(p, v) * math::dot(q, u);
        }
        assert!(area2 > 0.0);
    }

    #[test]
    fn resample_square_hits_corners() {
        let square = alloc::vec![
            [0.0, 0.0, 0.0],
            [4.0, 0.0, 0.0],
            [4.0, 4.0, 0.0],
            [0.0, 4.0, 0.0],
        ];
        let out = resample_contour(&square, 4).unwrap();
        for (a, b) in out.iter().zip(&square) {
            assert!(math::dist(*a, *b) < 1e-12);
        }
    }

    #[test]
    fn resample_circle_preserves_perimeter() {
        let circle: Vec<Vec3> = (0..1000)
            .map(|i| {
                let a = 2.0 * core::f64::consts::PI * i as f64 / 1000.0;
                [10.0 * fp::cos(a), 10.0 * fp::sin(a), 0.0]
            })
            .collect();
        let out = resample_contour(&circle, 180).unwrap();
        assert_eq!(out.len(), 180);
        let expect = 2.0 * core::f64::consts::PI * 10.0;
        assert!((perimeter(&out) - expect).abs() / expect < 1e-3);
    }

    #[test]
    fn resample_rejects_degenerate_contour() {
        let tiny = alloc::vec![[0.0; 3], [1e-12, 0.0, 0.0], [0.0, 1e-12, 0.0]];
        assert!(matches!(
            resample_contour(&tiny, 10),
            Err(Error::DegenerateContour)
        ));
    }

    #[test]
    fn resample_as_point_set_ignores_vertex_rotation() {
        let hexagon: Vec<Vec3> = (0..6)
            .map(|i| {
                let a = 2.0 * core::f64::consts::PI * i as f64 / 6.0;
                [3.0 * fp::cos(a), 3.0 * fp::sin(a), 1.0]
            })
            .collect();
        let mut rotated = hexagon.clone();
        rotated.rotate_left(2);
        let a = resample_contour(&hexagon, 12).unwrap();
        let b = resample_contour(&rotated, 12).unwrap();
        // Same point set up to start index.
        for p in &a {
            let nearest = b.iter().map(|q| math::dist(*p, *q)).fold(f64::MAX, f64::min);
            assert!(nearest < 1e-9);
        }
    }

    #[test]
    fn slicing_then_resampling_recovers_cylinder_radius() {
        let mesh = straight_tube(20, 10.0);
        let plane = Plane::new([0.0, 0.0, 11.0], [0.0, 0.0, 1.0]).unwrap();
        let contour = resample_contour(&slice_with_plane(&mesh, &plane).unwrap(), 180).unwrap();
        let c = math::centroid(&contour);
        let mean_r: f64 =
            contour.iter().map(|p| math::dist(*p, c)).sum::<f64>() / contour.len() as f64;
        assert_relative_eq!(mean_r, 10.0, max_relative = 5e-3);
    }

    #[test]
    fn contour_centerline_matches_arc_length() {
        // Centroids on a circular arc; spline length within 1%.
        let contours: Vec<Vec<Vec3>> = (0..9)
            .map(|i| {
                let a = core::f64::consts::PI * i as f64 / 8.0;
                let c = [40.0 * fp::cos(a), 0.0, 40.0 * fp::sin(a)];
                (0..20)
                    .map(|j| {
                        let b = 2.0 * core::f64::consts::PI * j as f64 / 20.0;
                        math::add(c, [0.0, 3.0 * fp::cos(b), 3.0 * fp::sin(b)])
                    })
                    .collect()
            })
            .collect();
        let cl = centerline_from_contours(&contours, 300).unwrap();
        assert_eq!(cl.points.len(), 300);
        let expect = core::f64::consts::PI * 40.0;
        assert!((cl.total_length() - expect).abs() / expect < 0.01);

        let straight: Vec<Vec<Vec3>> = (0..5)
            .map(|i| {
                let c = [0.0, 0.0, 10.0 * i as f64];
                (0..12)
                    .map(|j| {
                        let b = 2.0 * core::f64::consts::PI * j as f64 / 12.0;
                        math::add(c, [2.0 * fp::cos(b), 2.0 * fp::sin(b), 0.0])
                    })
                    .collect()
            })
            .collect();
        let cl = centerline_from_contours(&straight, 50).unwrap();
        for p in &cl.points {
            assert!(p[0].abs() < 1e-9 && p[1].abs() < 1e-9);
        }

        assert!(matches!(
            centerline_from_contours(&straight[..4], 50),
            Err(Error::TooFewSlices { got: 4, need: 5 })
        ));
    }
}
