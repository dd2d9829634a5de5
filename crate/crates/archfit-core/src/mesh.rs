//! Fixed-topology tube mesh: ring-structured surface with centerline
//! extraction, per-ring radii and surface sampling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, fp, Vec3};
use crate::spline::{self, CubicSpline3};
use crate::Result;

/// Default number of cross-section rings.
pub const DEFAULT_RINGS: usize = 40;
/// Default number of points per ring.
pub const DEFAULT_PTS_PER_RING: usize = 82;

/// An oriented plane given by a point and a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Plane {
    /// A point on the plane, mm.
    pub origin: Vec3,
    /// Unit normal.
    pub normal: Vec3,
}

impl Plane {
    pub fn new(origin: Vec3, normal: Vec3) -> Result<Self> {
        let n = math::norm(normal);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "plane normal has length {n}, expected 1"
            )));
        }
        Ok(Self { origin, normal })
    }

    /// Builds a plane from an arbitrary non-zero direction.
    pub fn from_direction(origin: Vec3, direction: Vec3) -> Result<Self> {
        let normal = math::normalize(direction)
            .ok_or_else(|| Error::InvalidParameter(String::from("zero plane normal")))?;
        Ok(Self { origin, normal })
    }

    /// Signed distance of `p` to the plane along the normal.
    #[inline]
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        math::dot(math::sub(p, self.origin), self.normal)
    }
}

/// Ring-structured tube surface mesh with fixed topology.
///
/// Nodes are stored ring-major from inlet to outlet: node `(r, j)` lives at
/// index `r * pts_per_ring + j`. Triangles cover the quad strips between
/// consecutive rings; the tube is open at both ends.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TubeMesh {
    pub n_rings: usize,
    pub pts_per_ring: usize,
    /// Node coordinates in mm, ring-major.
    pub nodes: Vec<Vec3>,
    /// Triangle node-index triples.
    pub cells: Vec<[u32; 3]>,
}

/// Arclength-parameterized polyline curve.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CenterlineCurve {
    /// Ordered samples, mm.
    pub points: Vec<Vec3>,
    /// Cumulative arclength per sample, mm; starts at 0, strictly increasing.
    pub arclength: Vec<f64>,
}

impl CenterlineCurve {
    pub fn from_points(points: Vec<Vec3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateMesh(String::from(
                "centerline needs at least 2 points",
            )));
        }
        let arclength = spline::chord_lengths(&points);
        for w in arclength.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DegenerateMesh(String::from(
                    "coincident consecutive centerline points",
                )));
            }
        }
        Ok(Self { points, arclength })
    }

    pub fn total_length(&self) -> f64 {
        self.arclength[self.arclength.len() - 1]
    }

    /// Point at arclength `s` (clamped), linear between samples.
    pub fn point_at(&self, s: f64) -> Vec3 {
        let s = s.clamp(0.0, self.total_length());
        let i = match self
            .arclength
            .binary_search_by(|a| a.partial_cmp(&s).unwrap())
        {
            Ok(i) => return self.points[i],
            Err(i) => i,
        };
        let (i0, i1) = (i - 1, i.min(self.points.len() - 1));
        let f = (s - self.arclength[i0]) / (self.arclength[i1] - self.arclength[i0]);
        math::add(
            math::scale(self.points[i0], 1.0 - f),
            math::scale(self.points[i1], f),
        )
    }

    /// Unit tangent at arclength `s` from the local segment.
    pub fn tangent_at(&self, s: f64) -> Vec3 {
        let s = s.clamp(0.0, self.total_length());
        let i = self
            .arclength
            .partition_point(|&a| a < s)
            .clamp(1, self.points.len() - 1);
        math::normalize(math::sub(self.points[i], self.points[i - 1]))
            .expect("strictly increasing arclength implies distinct samples")
    }
}

impl TubeMesh {
    /// Validates all structural invariants and wraps the raw arrays.
    pub fn new(
        n_rings: usize,
        pts_per_ring: usize,
        nodes: Vec<Vec3>,
        cells: Vec<[u32; 3]>,
    ) -> Result<Self> {
        if n_rings < 2 || pts_per_ring < 3 {
            return Err(Error::DegenerateMesh(format!(
                "{n_rings} rings x {pts_per_ring} points is below the 2x3 minimum"
            )));
        }
        if nodes.len() != n_rings * pts_per_ring {
            return Err(Error::DegenerateMesh(format!(
                "{} nodes, expected {}",
                nodes.len(),
                n_rings * pts_per_ring
            )));
        }
        let mesh = Self {
            n_rings,
            pts_per_ring,
            nodes,
            cells,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Builds the canonical quad-strip triangulation over ring-major nodes.
    pub fn from_ring_nodes(n_rings: usize, pts_per_ring: usize, nodes: Vec<Vec3>) -> Result<Self> {
        let cells = standard_cells(n_rings, pts_per_ring);
        Self::new(n_rings, pts_per_ring, nodes, cells)
    }

    fn validate(&self) -> Result<()> {
        let n_nodes = self.nodes.len() as u32;
        let mut referenced = alloc::vec![false; self.nodes.len()];
        for c in &self.cells {
            for &i in c {
                if i >= n_nodes {
                    return Err(Error::DegenerateMesh(format!(
                        "cell index {i} out of range ({n_nodes} nodes)"
                    )));
                }
                referenced[i as usize] = true;
            }
        }
        if referenced.iter().any(|r| !r) {
            return Err(Error::DegenerateMesh(String::from(
                "unreferenced node present",
            )));
        }
        for r in 0..self.n_rings {
            let ring = self.ring(r);
            if ring_area(ring) <= 1e-9 {
                return Err(Error::DegenerateMesh(format!("ring {r} has zero area")));
            }
            if !ring_is_simple(ring) {
                return Err(Error::DegenerateMesh(format!("ring {r} self-intersects")));
            }
        }
        let centroids = self.ring_centroids();
        for (r, w) in centroids.windows(2).enumerate() {
            if math::dist(w[0], w[1]) < 1e-9 {
                return Err(Error::DegenerateMesh(format!(
                    "rings {r} and {} share a centroid",
                    r + 1
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn node(&self, ring: usize, j: usize) -> Vec3 {
        self.nodes[ring * self.pts_per_ring + j]
    }

    /// Node slice of one ring.
    pub fn ring(&self, ring: usize) -> &[Vec3] {
        let start = ring * self.pts_per_ring;
        &self.nodes[start..start + self.pts_per_ring]
    }

    pub fn ring_centroids(&self) -> Vec<Vec3> {
        (0..self.n_rings)
            .map(|r| math::centroid(self.ring(r)))
            .collect()
    }

    /// Mean distance of a ring's points to the ring centroid.
    pub fn ring_radius(&self, ring: usize) -> f64 {
        let pts = self.ring(ring);
        let c = math::centroid(pts);
        pts.iter().map(|p| math::dist(*p, c)).sum::<f64>() / pts.len() as f64
    }

    /// All node coordinates in storage order.
    pub fn surface_points(&self) -> &[Vec3] {
        &self.nodes
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Triangle centroids in cell order.
    pub fn cell_centers(&self) -> Vec<Vec3> {
        self.cells
            .iter()
            .map(|c| {
                math::scale(
                    math::add(
                        math::add(self.nodes[c[0] as usize], self.nodes[c[1] as usize]),
                        self.nodes[c[2] as usize],
                    ),
                    1.0 / 3.0,
                )
            })
            .collect()
    }

    pub fn same_topology(&self, other: &TubeMesh) -> bool {
        self.n_rings == other.n_rings
            && self.pts_per_ring == other.pts_per_ring
            && self.cells == other.cells
    }

    /// Returns a copy with nodes replaced; topology is reused.
    pub fn with_nodes(&self, nodes: Vec<Vec3>) -> Result<Self> {
        Self::new(self.n_rings, self.pts_per_ring, nodes, self.cells.clone())
    }
}

/// Quad-strip triangulation of a ring-major node grid: two triangles per
/// quad, `(n_rings - 1) * pts_per_ring * 2` cells total.
pub fn standard_cells(n_rings: usize, pts_per_ring: usize) -> Vec<[u32; 3]> {
    let mut cells = Vec::with_capacity((n_rings - 1) * pts_per_ring * 2);
    let idx = |r: usize, j: usize| (r * pts_per_ring + j % pts_per_ring) as u32;
    for r in 0..n_rings - 1 {
        for j in 0..pts_per_ring {
            cells.push([idx(r, j), idx(r, j + 1), idx(r + 1, j)]);
            cells.push([idx(r, j + 1), idx(r + 1, j + 1), idx(r + 1, j)]);
        }
    }
    cells
}

/// Area of a closed (possibly slightly non-planar) polygon via the Newell
/// normal.
pub fn ring_area(ring: &[Vec3]) -> f64 {
    let mut n = [0.0; 3];
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        n[0] += (a[1] - b[1]) * (a[2] + b[2]);
        n[1] += (a[2] - b[2]) * (a[0] + b[0]);
        n[2] += (a[0] - b[0]) * (a[1] + b[1]);
    }
    0.5 * math::norm(n)
}

/// Checks that a closed polygon does not self-intersect after projecting
/// onto its Newell plane.
pub fn ring_is_simple(ring: &[Vec3]) -> bool {
    let mut normal = [0.0; 3];
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        normal[0] += (a[1] - b[1]) * (a[2] + b[2]);
        normal[1] += (a[2] - b[2]) * (a[0] + b[0]);
        normal[2] += (a[0] - b[0]) * (a[1] + b[1]);
    }
    let Some(n) = math::normalize(normal) else {
        return false;
    };
    let (u, v) = math::plane_basis(n);
    let c = math::centroid(ring);
    let pts2: Vec<[f64; 2]> = ring
        .iter()
        .map(|p| {
            let d = math::sub(*p, c);
            [math::dot(d, u), math::dot(d, v)]
        })
        .collect();
    let m = pts2.len();
    for i in 0..m {
        let (a1, a2) = (pts2[i], pts2[(i + 1) % m]);
        for j in (i + 1)..m {
            // Skip adjacent segments (shared vertex).
            if j == i || (j + 1) % m == i || (i + 1) % m == j {
                continue;
            }
            let (b1, b2) = (pts2[j], pts2[(j + 1) % m]);
            if segments_intersect_2d(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect_2d(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Cubic-spline centerline through the ring centroids, resampled to
/// `n_points` at (approximately) equal arclength.
///
/// The first and last samples coincide with the end-ring centroids.
pub fn centerline_from_mesh(mesh: &TubeMesh, n_points: usize) -> Result<CenterlineCurve> {
    if n_points < 5 {
        return Err(Error::InvalidParameter(format!(
            "n_points = {n_points}, need >= 5"
        )));
    }
    let centroids = mesh.ring_centroids();
    for (r, w) in centroids.windows(2).enumerate() {
        if math::dist(w[0], w[1]) < 1e-9 {
            return Err(Error::DegenerateMesh(format!(
                "rings {r} and {} share a centroid",
                r + 1
            )));
        }
    }
    let spline = CubicSpline3::through_points(&centroids);
    // Dense pre-sampling, then equal-arclength cuts.
    let dense = spline.sample_uniform_param((n_points * 16).max(2048));
    let mut points = spline::resample_by_arclength(&dense, n_points);
    // Pin exact endpoints of the interpolating spline.
    points[0] = centroids[0];
    let last = points.len() - 1;
    points[last] = centroids[centroids.len() - 1];
    CenterlineCurve::from_points(points)
}

/// Arclength position of each ring centroid along the centroid polyline.
pub fn ring_stations(mesh: &TubeMesh) -> Vec<f64> {
    spline::chord_lengths(&mesh.ring_centroids())
}

/// Applies `p -> p·R + t` to every node (row-vector convention).
pub fn transform_mesh(mesh: &TubeMesh, rotation: &math::Mat3, translation: Vec3) -> TubeMesh {
    let nodes = mesh
        .nodes
        .iter()
        .map(|p| math::add(math::mat3_apply_row(*p, rotation), translation))
        .collect();
    TubeMesh {
        n_rings: mesh.n_rings,
        pts_per_ring: mesh.pts_per_ring,
        nodes,
        cells: mesh.cells.clone(),
    }
}

/// Builds a circular-ring test tube along a centerline path.
///
/// Used across the crate's tests and by the synthetic generator's simplest
/// configurations.
pub fn circular_tube(centers: &[Vec3], radius: f64, pts_per_ring: usize) -> Result<TubeMesh> {
    let n = centers.len();
    let mut nodes = Vec::with_capacity(n * pts_per_ring);
    for (r, c) in centers.iter().enumerate() {
        let tangent = if r + 1 < n {
            math::sub(centers[r + 1], *c)
        } else {
            math::sub(*c, centers[r - 1])
        };
        let t = math::normalize(tangent).ok_or_else(|| {
            Error::DegenerateMesh(String::from("coincident consecutive centers"))
        })?;
        let (u, v) = math::plane_basis(t);
        for j in 0..pts_per_ring {
            let a = 2.0 * core::f64::consts::PI * j as f64 / pts_per_ring as f64;
            nodes.push(math::add(
                *c,
                math::add(
                    math::scale(u, radius * fp::cos(a)),
                    math::scale(v, radius * fp::sin(a)),
                ),
            ));
        }
    }
    TubeMesh::from_ring_nodes(n, pts_per_ring, nodes)
}
