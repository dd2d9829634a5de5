//! Parametric generation of arch-like tube meshes, temporal deformation
//! sequences, and noisy contour extraction.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::fit::{SliceContour, SliceSet};
use crate::math::{self, fp, rng, Vec3};
use crate::mesh::{Plane, TubeMesh, DEFAULT_PTS_PER_RING, DEFAULT_RINGS};
use crate::slice::{resample_contour, slice_all_loops};
use crate::Result;

/// Parameters of one generated arch.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchParams {
    /// Radius of the central circular arc, mm.
    pub arch_radius: f64,
    /// Straight inlet segment length, mm (0 for a bare arc).
    pub ascending_length: f64,
    /// Straight outlet segment length, mm (0 for a bare arc).
    pub descending_length: f64,
    /// Tube radius at the inlet, mm.
    pub inlet_radius: f64,
    /// Outlet/inlet radius ratio.
    pub taper: f64,
    /// Ring axis ratio (1 = circular sections).
    pub ellipticity: f64,
    /// Tilt of the arc plane about the ascending axis, radians.
    pub bend_out_of_plane: f64,
    /// RMS amplitude of the smooth surface perturbation, mm.
    pub noise_amplitude: f64,
    /// Correlation length of the perturbation along the tube, mm.
    pub noise_correlation: f64,
    pub seed: u64,
}

impl Default for ArchParams {
    fn default() -> Self {
        Self {
            arch_radius: 40.0,
            ascending_length: 50.0,
            descending_length: 90.0,
            inlet_radius: 13.0,
            taper: 0.85,
            ellipticity: 1.0,
            bend_out_of_plane: 0.15,
            noise_amplitude: 0.0,
            noise_correlation: 40.0,
            seed: 0,
        }
    }
}

impl ArchParams {
    pub fn validate(&self) -> Result<()> {
        if self.arch_radius <= 0.0 || self.inlet_radius <= 0.0 {
            return Err(Error::InvalidParameter(
                "arch_radius and inlet_radius must be positive".into(),
            ));
        }
        if self.ascending_length < 0.0 || self.descending_length < 0.0 {
            return Err(Error::InvalidParameter("segment lengths must be >= 0".into()));
        }
        if !(self.taper > 0.3 && self.taper < 2.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "taper {} outside (0.3, 2)",
                self.taper
            )));
        }
        if !(self.ellipticity > 0.5 && self.ellipticity < 2.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "ellipticity {} outside (0.5, 2)",
                self.ellipticity
            )));
        }
        if self.noise_amplitude < 0.0 || self.noise_correlation <= 0.0 {
            return Err(Error::InvalidParameter(
                "noise amplitude must be >= 0 and correlation > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-frame deformation factors; frame 0 is the identity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotionProfile {
    /// Radial scale per frame.
    pub radial: Vec<f64>,
    /// Axial (centerline) stretch per frame.
    pub axial: Vec<f64>,
    pub peak_frame: usize,
}

impl MotionProfile {
    /// Smooth systolic bump: unity at frame 0, the given peaks at
    /// `peak_frame`, easing back to unity at the last frame.
    pub fn systolic(n_frames: usize, peak_frame: usize, peak_radial: f64, peak_axial: f64) -> Self {
        assert!(n_frames >= 1 && peak_frame < n_frames);
        let weight = |t: usize| -> f64 {
            if t == 0 {
                0.0
            } else if t <= peak_frame {
                let x = t as f64 / peak_frame as f64;
                let s = fp::sin(core::f64::consts::FRAC_PI_2 * x);
                s * s
            } else {
                let x = (n_frames - 1 - t) as f64 / (n_frames - 1 - peak_frame).max(1) as f64;
                let s = fp::sin(core::f64::consts::FRAC_PI_2 * x);
                s * s
            }
        };
        let radial = (0..n_frames).map(|t| 1.0 + (peak_radial - 1.0) * weight(t)).collect();
        let axial = (0..n_frames).map(|t| 1.0 + (peak_axial - 1.0) * weight(t)).collect();
        Self {
            radial,
            axial,
            peak_frame,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.radial.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial.len() != self.axial.len() || self.radial.is_empty() {
            return Err(Error::InvalidParameter("profile arrays differ in length".into()));
        }
        if self.radial[0] != 1.0 || self.axial[0] != 1.0 {
            return Err(Error::InvalidParameter("frame 0 factors must be 1.0".into()));
        }
        if self.radial.iter().chain(&self.axial).any(|&f| f <= 0.0) {
            return Err(Error::InvalidParameter("scale factors must be positive".into()));
        }
        Ok(())
    }
}

/// Piecewise centerline: straight ascending segment, circular arc, straight
/// descending segment; tangent-continuous at the joins.
fn path_point(params: &ArchParams, s: f64) -> Vec3 {
    let asc = params.ascending_length;
    let arc = core::f64::consts::PI * params.arch_radius;
    let u = [
        fp::cos(params.bend_out_of_plane),
        fp::sin(params.bend_out_of_plane),
        0.0,
    ];
    let top = [0.0, 0.0, asc];
    if s <= asc {
        return [0.0, 0.0, s];
    }
    let center = math::add(top, math::scale(u, params.arch_radius));
    if s <= asc + arc {
        let theta = (s - asc) / params.arch_radius;
        return math::add(
            center,
            math::add(
                math::scale(u, -params.arch_radius * fp::cos(theta)),
                math::scale([0.0, 0.0, 1.0], params.arch_radius * fp::sin(theta)),
            ),
        );
    }
    let end = math::add(center, math::scale(u, params.arch_radius));
    math::add(end, [0.0, 0.0, -(s - asc - arc)])
}

/// Generates a 40x82 arch mesh from the parameters; deterministic per seed.
pub fn generate_arch(params: &ArchParams) -> Result<TubeMesh> {
    generate_arch_with(params, DEFAULT_RINGS, DEFAULT_PTS_PER_RING)
}

/// Generator with explicit grid resolution.
pub fn generate_arch_with(
    params: &ArchParams,
    n_rings: usize,
    pts_per_ring: usize,
) -> Result<TubeMesh> {
    params.validate()?;
    let total = params.ascending_length
        + core::f64::consts::PI * params.arch_radius
        + params.descending_length;

    // Stations uniform in arclength; tangents from small path differences.
    let stations: Vec<f64> = (0..n_rings)
        .map(|i| total * i as f64 / (n_rings - 1) as f64)
        .collect();
    let centers: Vec<Vec3> = stations.iter().map(|&s| path_point(params, s)).collect();
    let eps = total * 1e-6;
    let tangents: Vec<Vec3> = stations
        .iter()
        .map(|&s| {
            let a = path_point(params, (s - eps).max(0.0));
            let b = path_point(params, (s + eps).min(total));
            math::normalize(math::sub(b, a)).expect("distinct path samples")
        })
        .collect();

    // Rotation-minimizing ring frames by tangent-plane projection.
    let mut normals: Vec<Vec3> = Vec::with_capacity(n_rings);
    let (first_n, _) = math::plane_basis(tangents[0]);
    normals.push(first_n);
    for i in 1..n_rings {
        let prev = normals[i - 1];
        let t = tangents[i];
        let proj = math::sub(prev, math::scale(t, math::dot(prev, t)));
        normals.push(math::normalize(proj).unwrap_or_else(|| math::plane_basis(t).0));
    }

    // Smooth radial perturbation: a few low-order harmonics along the tube
    // and around each ring, rescaled to the requested RMS amplitude.
    let noise = radial_noise_field(params, n_rings, pts_per_ring, total);

    let mut nodes = Vec::with_capacity(n_rings * pts_per_ring);
    let mut max_ring_radius = 0.0f64;
    for i in 0..n_rings {
        let frac = stations[i] / total;
        let r = params.inlet_radius * (1.0 + (params.taper - 1.0) * frac);
        let a = r;
        let b = r * params.ellipticity;
        max_ring_radius = max_ring_radius.max(a.max(b));
        let bn = math::cross(tangents[i], normals[i]);
        for j in 0..pts_per_ring {
            let ang = 2.0 * core::f64::consts::PI * j as f64 / pts_per_ring as f64;
            let radial = math::add(
                math::scale(normals[i], a * fp::cos(ang)),
                math::scale(bn, b * fp::sin(ang)),
            );
            let bump = noise[i * pts_per_ring + j];
            let dir = math::normalize(radial).expect("non-zero ring radius");
            nodes.push(math::add(
                centers[i],
                math::add(radial, math::scale(dir, bump)),
            ));
        }
    }

    if params.arch_radius < 1.5 * max_ring_radius {
        return Err(Error::SelfIntersection(alloc::format!(
            "arch radius {:.1} below 1.5 x max ring radius {:.1}",
            params.arch_radius,
            max_ring_radius
        )));
    }
    TubeMesh::from_ring_nodes(n_rings, pts_per_ring, nodes)
}

fn radial_noise_field(
    params: &ArchParams,
    n_rings: usize,
    pts_per_ring: usize,
    total_length: f64,
) -> Vec<f64> {
    let mut field = vec![0.0; n_rings * pts_per_ring];
    if params.noise_amplitude == 0.0 {
        return field;
    }
    let mut rng = rng::chacha(rng::derive_seed(params.seed, "arch-noise"));
    let p_max = ((total_length / params.noise_correlation).round() as usize).clamp(1, 6);
    let q_max = 3usize;
    for p in 0..=p_max {
        for q in 0..=q_max {
            if p == 0 && q == 0 {
                continue;
            }
            let coef = rng::normal(&mut rng) / (1.0 + p as f64 + q as f64);
            let phase_p = 2.0 * core::f64::consts::PI * rng::uniform(&mut rng);
            let phase_q = 2.0 * core::f64::consts::PI * rng::uniform(&mut rng);
            for i in 0..n_rings {
                let along = fp::cos(
                    core::f64::consts::PI * p as f64 * i as f64 / (n_rings - 1) as f64 + phase_p,
                );
                for j in 0..pts_per_ring {
                    let around = fp::cos(
                        2.0 * core::f64::consts::PI * q as f64 * j as f64 / pts_per_ring as f64
                            + phase_q,
                    );
                    field[i * pts_per_ring + j] += coef * along * around;
                }
            }
        }
    }
    let rms = fp::sqrt(field.iter().map(|x| x * x).sum::<f64>() / field.len() as f64);
    if rms > 0.0 {
        let scale = params.noise_amplitude / rms;
        field.iter_mut().for_each(|x| *x *= scale);
    }
    field
}

/// Applies a motion profile: each frame scales rings radially about their
/// centroids and stretches the centroid chain about the inlet. Frame 0 is
/// the input mesh, bit for bit.
pub fn animate(mesh: &TubeMesh, profile: &MotionProfile) -> Result<Vec<TubeMesh>> {
    profile.validate()?;
    let centroids: Vec<Vec3> = (0..mesh.n_rings)
        .map(|r| math::centroid(mesh.ring(r)))
        .collect();
    let inlet = centroids[0];
    let mut frames = Vec::with_capacity(profile.n_frames());
    for t in 0..profile.n_frames() {
        let (radial, axial) = (profile.radial[t], profile.axial[t]);
        if radial == 1.0 && axial == 1.0 {
            frames.push(mesh.clone());
            continue;
        }
        let mut nodes = Vec::with_capacity(mesh.nodes.len());
        for r in 0..mesh.n_rings {
            let c_new = math::add(inlet, math::scale(math::sub(centroids[r], inlet), axial));
            for j in 0..mesh.pts_per_ring {
                let p = mesh.node(r, j);
                nodes.push(math::add(
                    c_new,
                    math::scale(math::sub(p, centroids[r]), radial),
                ));
            }
        }
        frames.push(mesh.with_nodes(nodes)?);
    }
    Ok(frames)
}

/// Slices every frame at the given planes, resamples each contour to `p`
/// points and adds i.i.d. in-plane Gaussian noise of `noise_sigma` mm.
/// Where a plane cuts both limbs, the loop nearest the plane origin is
/// taken. Deterministic per seed.
pub fn extract_slice_set(
    frames: &[TubeMesh],
    planes: &[Plane],
    p: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SliceSet> {
    if frames.is_empty() || planes.is_empty() {
        return Err(Error::InvalidParameter("no frames or planes".into()));
    }
    let mut rng = rng::chacha(rng::derive_seed(seed, "slice-noise"));
    let mut all_frames = Vec::with_capacity(frames.len());
    for (t, mesh) in frames.iter().enumerate() {
        let mut contours = Vec::with_capacity(planes.len());
        for plane in planes {
            let loops = slice_all_loops(mesh, plane);
            let nearest = loops
                .into_iter()
                .min_by(|a, b| {
                    math::dist_sq(math::centroid(a), plane.origin)
                        .partial_cmp(&math::dist_sq(math::centroid(b), plane.origin))
                        .unwrap()
                })
                .ok_or(Error::NoIntersection)?;
            let mut points = resample_contour(&nearest, p)?;
            if noise_sigma > 0.0 {
                let (u, v) = math::plane_basis(plane.normal);
                for q in points.iter_mut() {
                    let du = noise_sigma * rng::normal(&mut rng);
                    let dv = noise_sigma * rng::normal(&mut rng);
                    *q = math::add(*q, math::add(math::scale(u, du), math::scale(v, dv)));
                }
            }
            contours.push(SliceContour::new(*plane, points, t)?);
        }
        all_frames.push(contours);
    }
    SliceSet::new(all_frames)
}

/// Uniform parameter ranges for cohort draws.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamRanges {
    pub arch_radius: (f64, f64),
    pub ascending_length: (f64, f64),
    pub descending_length: (f64, f64),
    pub inlet_radius: (f64, f64),
    pub taper: (f64, f64),
    pub ellipticity: (f64, f64),
    pub bend_out_of_plane: (f64, f64),
    pub noise_amplitude: (f64, f64),
    pub noise_correlation: (f64, f64),
}

impl Default for ParamRanges {
    /// Arch scales spanning young-to-elderly anatomy (ascending radii of
    /// roughly 11–17 mm with matching arc and limb growth).
    fn default() -> Self {
        Self {
            arch_radius: (33.0, 52.0),
            ascending_length: (35.0, 85.0),
            descending_length: (70.0, 120.0),
            inlet_radius: (11.0, 17.0),
            taper: (0.70, 0.95),
            ellipticity: (0.9, 1.12),
            bend_out_of_plane: (0.0, 0.35),
            noise_amplitude: (0.2, 0.7),
            noise_correlation: (30.0, 60.0),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng::uniform_in(rng, range.0, range.1)
}

/// Draws `n` parameter sets; self-intersecting draws are rejected and
/// redrawn (deterministically).
pub fn sample_cohort_params(n: usize, ranges: &ParamRanges, seed: u64) -> Vec<ArchParams> {
    let mut rng = rng::chacha(rng::derive_seed(seed, "cohort-params"));
    let mut out = Vec::with_capacity(n);
    let mut draw_seed = seed;
    while out.len() < n {
        draw_seed = draw_seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let params = ArchParams {
            arch_radius: draw(&mut rng, ranges.arch_radius),
            ascending_length: draw(&mut rng, ranges.ascending_length),
            descending_length: draw(&mut rng, ranges.descending_length),
            inlet_radius: draw(&mut rng, ranges.inlet_radius),
            taper: draw(&mut rng, ranges.taper),
            ellipticity: draw(&mut rng, ranges.ellipticity),
            bend_out_of_plane: draw(&mut rng, ranges.bend_out_of_plane),
            noise_amplitude: draw(&mut rng, ranges.noise_amplitude),
            noise_correlation: draw(&mut rng, ranges.noise_correlation),
            seed: draw_seed,
        };
        if params.arch_radius >= 1.5 * params.inlet_radius * params.taper.max(1.0) * 1.3 {
            out.push(params);
        }
    }
    out
}

/// Generates a full cohort; every member satisfies the mesh invariants.
pub fn generate_cohort(n: usize, ranges: &ParamRanges, seed: u64) -> Result<Vec<TubeMesh>> {
    sample_cohort_params(n, ranges, seed)
        .iter()
        .map(generate_arch)
        .collect()
}
