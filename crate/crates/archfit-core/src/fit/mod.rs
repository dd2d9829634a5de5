//! Staged gradient-based registration of a shape model to sparse planar
//! contours.
//!
//! One time frame is described by a [`FitState`]: shape-mode amplitudes, a
//! global deformation magnitude, a similarity transform and a local warp
//! field anchored at a fixed control-point lattice. The first frame runs a
//! four-stage schedule that activates parameter groups hierarchically;
//! subsequent frames warm-start from the previous result and refine only the
//! warp.

mod adam;
mod engine;
mod ops;

pub use engine::{fit_frame0, fit_sequence, FitContext, Frame0Fit};
pub use ops::{
    loss_centerline, loss_mesh, predict_nodes, rbf_deform, regularization_losses,
    rotation_matrix, similarity_transform,
};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, Vec3};
use crate::mesh::{CenterlineCurve, Plane, TubeMesh};
use crate::Result;

/// Default contour sample count per slice.
pub const DEFAULT_CONTOUR_POINTS: usize = 180;
/// Default mesh-centerline sample count used by the centerline loss.
pub const DEFAULT_MESH_CENTERLINE_POINTS: usize = 500;
/// Default data-centerline sample count.
pub const DEFAULT_SLICE_CENTERLINE_POINTS: usize = 300;

/// One planar contour of one time frame.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SliceContour {
    pub plane: Plane,
    /// Resampled contour points, mm; all on the plane.
    pub points: Vec<Vec3>,
    /// Time frame index.
    pub frame: usize,
}

impl SliceContour {
    pub fn new(plane: Plane, points: Vec<Vec3>, frame: usize) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidParameter(alloc::format!(
                "contour needs >= 3 points, got {}",
                points.len()
            )));
        }
        for p in &points {
            if plane.signed_distance(*p).abs() > 1e-6 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "contour point off its plane by {:.2e} mm",
                    plane.signed_distance(*p).abs()
                )));
            }
        }
        Ok(Self {
            plane,
            points,
            frame,
        })
    }

    pub fn centroid(&self) -> Vec3 {
        math::centroid(&self.points)
    }
}

/// Per-frame contour collections sharing one set of acquisition planes.
///
/// Contours within a frame are ordered along the vessel (inlet to outlet);
/// the data centerline relies on that order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SliceSet {
    pub frames: Vec<Vec<SliceContour>>,
}

impl SliceSet {
    pub fn new(frames: Vec<Vec<SliceContour>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidParameter("no frames".into()));
        };
        if first.len() < 2 {
            return Err(Error::InvalidParameter(alloc::format!(
                "need >= 2 slices per frame, got {}",
                first.len()
            )));
        }
        for (t, frame) in frames.iter().enumerate() {
            if frame.len() != first.len() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "frame {t} has {} slices, frame 0 has {}",
                    frame.len(),
                    first.len()
                )));
            }
            for (s, contour) in frame.iter().enumerate() {
                let p0 = &first[s].plane;
                if math::dist(contour.plane.origin, p0.origin) > 1e-6
                    || math::dist(contour.plane.normal, p0.normal) > 1e-9
                {
                    return Err(Error::InvalidParameter(alloc::format!(
                        "slice {s} of frame {t} uses a different plane than frame 0"
                    )));
                }
            }
        }
        Ok(Self { frames })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_slices(&self) -> usize {
        self.frames[0].len()
    }
}

/// Weights of the five loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub mesh: f64,
    pub centerline: f64,
    pub modal: f64,
    pub rotation: f64,
    pub warp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mesh: 1.0,
            centerline: 1.0,
            modal: 1.0,
            rotation: 1.0,
            warp: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("mesh", self.mesh),
            ("centerline", self.centerline),
            ("modal", self.modal),
            ("rotation", self.rotation),
            ("warp", self.warp),
        ] {
            if !(w >= 0.0) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "loss weight {name} = {w} must be >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Raw (unweighted) loss-term values plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub mesh: f64,
    pub centerline: f64,
    pub modal: f64,
    pub rotation: f64,
    pub warp: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.mesh.is_finite()
            && self.centerline.is_finite()
            && self.modal.is_finite()
            && self.rotation.is_finite()
            && self.warp.is_finite()
            && self.total.is_finite()
    }
}

/// All learnable parameters of one frame's registration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitState {
    /// Mode amplitudes `a`, dimensionless.
    pub amplitudes: Vec<f64>,
    /// Global deformation magnitude `delta`.
    pub delta: f64,
    /// Isotropic scale.
    pub psi: f64,
    /// Euler angles (alpha, beta, gamma), radians.
    pub euler: [f64; 3],
    /// Translation, mm.
    pub offset: Vec3,
    /// Fixed warp anchor lattice, mm.
    pub control_points: Vec<Vec3>,
    /// Learned anchor displacements, mm.
    pub control_offsets: Vec<Vec3>,
    /// Radial kernel weights (one 3-vector per anchor).
    pub rbf_weights: Vec<Vec3>,
    /// Affine tail: rows x, y, z, bias; columns are output components.
    pub rbf_linear: [[f64; 3]; 4],
    pub loss_weights: LossWeights,
    /// Epochs run so far on this state.
    pub epoch: usize,
}

impl FitState {
    /// Neutral state: zero amplitudes, identity transform, null warp.
    pub fn neutral(n_modes: usize, control_points: Vec<Vec3>, loss_weights: LossWeights) -> Self {
        let k = control_points.len();
        Self {
            amplitudes: vec![0.0; n_modes],
            delta: 1.0,
            psi: 1.0,
            euler: [0.0; 3],
            offset: [0.0; 3],
            control_points,
            control_offsets: vec![[0.0; 3]; k],
            rbf_weights: vec![[0.0; 3]; k],
            rbf_linear: [[0.0; 3]; 4],
            loss_weights,
            epoch: 0,
        }
    }

    pub fn n_control_points(&self) -> usize {
        self.control_points.len()
    }

    /// True when the warp field is identically zero.
    pub fn warp_is_null(&self) -> bool {
        self.rbf_weights.iter().all(|w| *w == [0.0; 3])
            && self.rbf_linear == [[0.0; 3]; 4]
    }

    pub fn all_finite(&self) -> bool {
        let flat_ok = |v: &[Vec3]| v.iter().all(|p| p.iter().all(|x| x.is_finite()));
        self.amplitudes.iter().all(|x| x.is_finite())
            && self.delta.is_finite()
            && self.psi.is_finite()
            && self.euler.iter().all(|x| x.is_finite())
            && self.offset.iter().all(|x| x.is_finite())
            && flat_ok(&self.control_offsets)
            && flat_ok(&self.rbf_weights)
            && self.rbf_linear.iter().flatten().all(|x| x.is_finite())
    }
}

/// Gradient of the total loss with respect to every learnable parameter.
/// Entries for inactive parameters are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub amplitudes: Vec<f64>,
    pub delta: f64,
    pub psi: f64,
    pub euler: [f64; 3],
    pub offset: Vec3,
    pub control_offsets: Vec<Vec3>,
    pub rbf_weights: Vec<Vec3>,
    pub rbf_linear: [[f64; 3]; 4],
}

impl ParamGrads {
    pub fn zeros(n_modes: usize, k: usize) -> Self {
        Self {
            amplitudes: vec![0.0; n_modes],
            delta: 0.0,
            psi: 0.0,
            euler: [0.0; 3],
            offset: [0.0; 3],
            control_offsets: vec![[0.0; 3]; k],
            rbf_weights: vec![[0.0; 3]; k],
            rbf_linear: [[0.0; 3]; 4],
        }
    }

    pub fn all_finite(&self) -> bool {
        let flat_ok = |v: &[Vec3]| v.iter().all(|p| p.iter().all(|x| x.is_finite()));
        self.amplitudes.iter().all(|x| x.is_finite())
            && self.delta.is_finite()
            && self.psi.is_finite()
            && self.euler.iter().all(|x| x.is_finite())
            && self.offset.iter().all(|x| x.is_finite())
            && flat_ok(&self.control_offsets)
            && flat_ok(&self.rbf_weights)
            && self.rbf_linear.iter().flatten().all(|x| x.is_finite())
    }
}

/// Which parameter groups receive gradient updates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActiveSet {
    pub amplitudes: bool,
    pub delta: bool,
    pub psi: bool,
    pub rotation: bool,
    pub offset: bool,
    pub warp: bool,
}

impl ActiveSet {
    pub const ALL: ActiveSet = ActiveSet {
        amplitudes: true,
        delta: true,
        psi: true,
        rotation: true,
        offset: true,
        warp: true,
    };
}

/// Four-stage activation schedule for the first frame.
///
/// `stage_ends[i]` is the exclusive epoch bound of stage `i`; the defaults
/// are `[10, 200, 250, 300]`:
/// amplitudes+magnitude, then +similarity, then shape+rotation+warp, then
/// warp only. Warp kernel weights are active whenever the control offsets
/// are, and are re-zeroed at every warp-stage entry.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageSchedule {
    pub stage_ends: [usize; 4],
}

impl Default for StageSchedule {
    fn default() -> Self {
        Self {
            stage_ends: [10, 200, 250, 300],
        }
    }
}

impl StageSchedule {
    pub fn validate(&self) -> Result<()> {
        let e = self.stage_ends;
        if !(e[0] <= e[1] && e[1] <= e[2] && e[2] <= e[3]) {
            return Err(Error::InvalidParameter(alloc::format!(
                "stage bounds must be non-decreasing, got {e:?}"
            )));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.stage_ends[3]
    }

    pub fn stage_of(&self, epoch: usize) -> usize {
        self.stage_ends.iter().position(|&end| epoch < end).unwrap_or(3)
    }

    pub fn active_set(&self, epoch: usize) -> ActiveSet {
        match self.stage_of(epoch) {
            0 => ActiveSet {
                amplitudes: true,
                delta: true,
                ..Default::default()
            },
            1 => ActiveSet {
                amplitudes: true,
                delta: true,
                psi: true,
                rotation: true,
                offset: true,
                ..Default::default()
            },
            2 => ActiveSet {
                amplitudes: true,
                delta: true,
                rotation: true,
                warp: true,
                ..Default::default()
            },
            _ => ActiveSet {
                warp: true,
                ..Default::default()
            },
        }
    }

    /// True when `epoch` enters a stage whose active set includes the warp.
    pub fn enters_warp_stage(&self, epoch: usize) -> bool {
        (epoch == self.stage_ends[1] || epoch == self.stage_ends[2])
            && self.active_set(epoch).warp
            && epoch < self.stage_ends[3]
    }
}

/// Registration configuration for one subject.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitConfig {
    pub schedule: StageSchedule,
    /// Epochs per warm-started frame after the first.
    pub warm_epochs: usize,
    pub learning_rate: f64,
    pub loss_weights: LossWeights,
    /// Control lattice resolution per axis; the product is the anchor count.
    pub grid_dims: [usize; 3],
    /// Fractional bounding-box inflation of the lattice.
    pub grid_inflation: f64,
    /// Subtract the data center of mass before fitting (restored on output).
    pub center_data: bool,
    pub mesh_centerline_points: usize,
    pub slice_centerline_points: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            schedule: StageSchedule::default(),
            warm_epochs: 50,
            learning_rate: 0.1,
            loss_weights: LossWeights::default(),
            grid_dims: [10, 9, 8],
            grid_inflation: 0.2,
            center_data: true,
            mesh_centerline_points: DEFAULT_MESH_CENTERLINE_POINTS,
            slice_centerline_points: DEFAULT_SLICE_CENTERLINE_POINTS,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.loss_weights.validate()?;
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.grid_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter("zero control-grid dimension".into()));
        }
        if self.mesh_centerline_points < 5 || self.slice_centerline_points < 5 {
            return Err(Error::InvalidParameter(
                "centerline sample counts must be >= 5".into(),
            ));
        }
        Ok(())
    }
}

/// Loss record of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochTrace {
    pub frame: usize,
    pub epoch: usize,
    pub losses: LossBreakdown,
}

/// Per-frame meshes, centerlines and diagnostics of a full sequence fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub meshes: Vec<TubeMesh>,
    pub centerlines: Vec<CenterlineCurve>,
    pub final_losses: Vec<LossBreakdown>,
    pub trace: Vec<EpochTrace>,
}

/// Fit failure carrying the partial convergence trace.
#[derive(Debug, Clone)]
pub struct FitFailure {
    pub error: Error,
    pub trace: Vec<EpochTrace>,
}

impl From<Error> for FitFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            trace: Vec::new(),
        }
    }
}

impl From<FitFailure> for Error {
    fn from(failure: FitFailure) -> Self {
        failure.error
    }
}

impl core::fmt::Display for FitFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.error)
    }
}

/// Axis-aligned regular lattice over an inflated bounding box.
pub fn control_lattice(lo: Vec3, hi: Vec3, dims: [usize; 3], inflation: f64) -> Vec<Vec3> {
    let center = math::scale(math::add(lo, hi), 0.5);
    let half = math::scale(math::sub(hi, lo), 0.5 * (1.0 + inflation));
    let lo = math::sub(center, half);
    let hi = math::add(center, half);
    let mut pts = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for iz in 0..dims[2] {
        for iy in 0..dims[1] {
            for ix in 0..dims[0] {
                let f = |i: usize, n: usize, a: f64, b: f64| {
                    if n == 1 {
                        0.5 * (a + b)
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                };
                pts.push([
                    f(ix, dims[0], lo[0], hi[0]),
                    f(iy, dims[1], lo[1], hi[1]),
                    f(iz, dims[2], lo[2], hi[2]),
                ]);
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_active_sets_follow_the_stage_gates() {
        let s = StageSchedule::default();
        assert_eq!(s.total_epochs(), 300);
        let early = s.active_set(0);
        assert!(early.amplitudes && early.delta);
        assert!(!early.psi && !early.rotation && !early.offset && !early.warp);

        let mid = s.active_set(10);
        assert!(mid.psi && mid.rotation && mid.offset && !mid.warp);

        let warp1 = s.active_set(200);
        assert!(warp1.amplitudes && warp1.delta && warp1.rotation && warp1.warp);
        assert!(!warp1.psi && !warp1.offset);

        let warp2 = s.active_set(250);
        assert!(warp2.warp);
        assert!(!warp2.amplitudes && !warp2.delta && !warp2.rotation);

        assert!(s.enters_warp_stage(200));
        assert!(s.enters_warp_stage(250));
        assert!(!s.enters_warp_stage(10));
        assert!(!s.enters_warp_stage(123));
    }

    #[test]
    fn collapsed_stages_freeze_the_warp() {
        let s = StageSchedule {
            stage_ends: [10, 300, 300, 300],
        };
        for e in 0..300 {
            assert!(!s.active_set(e).warp, "warp active at {e}");
        }
        assert!(!s.enters_warp_stage(300));
    }

    #[test]
    fn control_lattice_has_expected_layout() {
        let pts = control_lattice([0.0; 3], [10.0, 9.0, 8.0], [10, 9, 8], 0.2);
        assert_eq!(pts.len(), 720);
        let lo = pts.iter().fold([f64::MAX; 3], |a, p| {
            [a[0].min(p[0]), a[1].min(p[1]), a[2].min(p[2])]
        });
        let hi = pts.iter().fold([f64::MIN; 3], |a, p| {
            [a[0].max(p[0]), a[1].max(p[1]), a[2].max(p[2])]
        });
        // 20% inflation about the box center.
        assert!((lo[0] - -1.0).abs() < 1e-12 && (hi[0] - 11.0).abs() < 1e-12);
        assert!((lo[1] - -0.9).abs() < 1e-12 && (hi[1] - 9.9).abs() < 1e-12);
    }

    #[test]
    fn slice_set_rejects_inconsistent_planes() {
        let plane_a = Plane::new([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        let plane_b = Plane::new([0.0, 0.0, 5.0], [0.0, 0.0, 1.0]).unwrap();
        let ring = |z: f64| -> Vec<Vec3> {
            (0..8)
                .map(|j| {
                    let a = 2.0 * core::f64::consts::PI * j as f64 / 8.0;
                    [crate::math::fp::cos(a), crate::math::fp::sin(a), z]
                })
                .collect()
        };
        let c0 = SliceContour::new(plane_a, ring(0.0), 0).unwrap();
        let c1 = SliceContour::new(plane_b, ring(5.0), 0).unwrap();
        let ok = SliceSet::new(vec![vec![c0.clone(), c1.clone()]]);
        assert!(ok.is_ok());
        // Frame 1 swaps the planes.
        let c0f1 = SliceContour::new(plane_b, ring(5.0), 1).unwrap();
        let c1f1 = SliceContour::new(plane_a, ring(0.0), 1).unwrap();
        let bad = SliceSet::new(vec![vec![c0, c1], vec![c0f1, c1f1]]);
        assert!(bad.is_err());
    }

    #[test]
    fn contour_must_lie_on_plane() {
        let plane = Plane::new([0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        let bad = SliceContour::new(
            plane,
            vec![[0.0, 0.0, 0.1], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            0,
        );
        assert!(bad.is_err());
    }
}
