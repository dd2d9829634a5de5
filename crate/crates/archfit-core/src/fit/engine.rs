//! Forward/backward evaluation of the registration chain and the staged
//! optimization loops.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, Vec3};
use crate::mesh::{centerline_from_mesh, TubeMesh};
use crate::planner;
use crate::slice;
use crate::spline;
use crate::ssm::ShapeModel;
use crate::Result;

use super::adam::{Adam, Block};
use super::ops;
use super::{
    control_lattice, ActiveSet, EpochTrace, FitConfig, FitFailure, FitResult, FitState,
    LossBreakdown, ParamGrads, SliceContour, SliceSet,
};

/// Immutable per-subject fitting context: centered model, control lattice
/// and the linear centerline operator.
///
/// All internal computation runs in centered coordinates when
/// `config.center_data` is set: the model mean is shifted to its own center
/// of mass and the contour data to the center of mass of the first frame's
/// points. The data shift is restored on every output mesh.
pub struct FitContext<'a> {
    pub model: &'a ShapeModel,
    pub config: FitConfig,
    mean_centered: Vec<Vec3>,
    data_shift: Vec3,
    control_points: Vec<Vec3>,
    /// Mesh-centerline operator rows: `cl_mesh = weights · ring_centroids`.
    /// A fixed linear map keeps the centerline loss exactly differentiable.
    cl_weights: Vec<Vec<f64>>,
    warp_weight_scale: f64,
    warp_linear_scale: f64,
}

/// Contour data of one frame, in context coordinates.
pub struct FrameData {
    pub contour_points: Vec<Vec3>,
    pub cl_slices: Vec<Vec3>,
}

/// Reusable buffers for one fit.
pub struct Scratch {
    /// Kernel distances, node-major: `radii[i * k + j]`.
    radii: Vec<f64>,
}

impl Scratch {
    pub fn new() -> Self {
        Self { radii: Vec::new() }
    }
}

impl Default for Scratch {
    fn default() -> Self {
        Self::new()
    }
}

struct ForwardPass {
    x_pca: Vec<Vec3>,
    /// Rotated model nodes before scaling, `z = x_pca · R`.
    z: Vec<Vec3>,
    x_trans: Vec<Vec3>,
    x_out: Vec<Vec3>,
    warp_evaluated: bool,
    cl_mesh: Vec<Vec3>,
    mesh_match: Vec<u32>,
    cl_match: Vec<u32>,
    losses: LossBreakdown,
}

impl<'a> FitContext<'a> {
    pub fn new(
        model: &'a ShapeModel,
        frame0: &[SliceContour],
        config: FitConfig,
    ) -> Result<Self> {
        config.validate()?;
        if frame0.len() < 2 {
            return Err(Error::InvalidParameter(alloc::format!(
                "need >= 2 slices, got {}",
                frame0.len()
            )));
        }
        let (mean_shift, data_shift) = if config.center_data {
            let all_points: Vec<Vec3> = frame0
                .iter()
                .flat_map(|c| c.points.iter().copied())
                .collect();
            (math::centroid(&model.mean), math::centroid(&all_points))
        } else {
            ([0.0; 3], [0.0; 3])
        };
        let mean_centered: Vec<Vec3> = model
            .mean
            .iter()
            .map(|p| math::sub(*p, mean_shift))
            .collect();

        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in &mean_centered {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let control_points = control_lattice(lo, hi, config.grid_dims, config.grid_inflation);
        let k = control_points.len() as f64;
        // Half-diagonal of the lattice: the typical kernel magnitude phi(r).
        let r_scale = 0.5 * math::dist(lo, hi).max(1.0) * (1.0 + config.grid_inflation);
        // Kernel weights are per-mm-of-distance quantities; scale their
        // steps so one optimizer step moves the field by about one
        // learning-rate unit (in mm), matching the other parameter groups.
        let warp_weight_scale = 1.0 / (math::fp::sqrt(k) * r_scale);
        let warp_linear_scale = 1.0 / (2.0 * r_scale);

        let cl_weights = spline::uniform_spline_weights(
            model.topology.n_rings,
            config.mesh_centerline_points,
        );

        Ok(Self {
            model,
            config,
            mean_centered,
            data_shift,
            control_points,
            cl_weights,
            warp_weight_scale,
            warp_linear_scale,
        })
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    /// Neutral initial state for this context.
    pub fn initial_state(&self) -> FitState {
        FitState::neutral(
            self.model.n_modes(),
            self.control_points.clone(),
            self.config.loss_weights,
        )
    }

    /// Prepares one frame's contour data: shifts into context coordinates
    /// and derives the data centerline (spline through the slice centroids,
    /// or the surrogate arc below five slices).
    pub fn frame_data(&self, contours: &[SliceContour]) -> Result<FrameData> {
        let contour_points: Vec<Vec3> = contours
            .iter()
            .flat_map(|c| c.points.iter().map(|p| math::sub(*p, self.data_shift)))
            .collect();
        if contour_points.is_empty() {
            return Err(Error::InvalidParameter("no contour points".into()));
        }
        let cl_slices = if contours.len() >= 5 {
            let point_lists: Vec<Vec<Vec3>> = contours
                .iter()
                .map(|c| {
                    c.points
                        .iter()
                        .map(|p| math::sub(*p, self.data_shift))
                        .collect()
                })
                .collect();
            slice::centerline_from_contours(&point_lists, self.config.slice_centerline_points)?
                .points
        } else {
            let mut curve =
                planner::surrogate_centerline(contours, self.config.slice_centerline_points)?;
            for p in curve.points.iter_mut() {
                *p = math::sub(*p, self.data_shift);
            }
            curve.points
        };
        Ok(FrameData {
            contour_points,
            cl_slices,
        })
    }

    /// Output-space node positions predicted by a state.
    pub fn predicted_nodes(&self, state: &FitState) -> Vec<Vec3> {
        let fwd = self.forward(state, &mut Scratch::new(), true, None);
        fwd.x_out
            .iter()
            .map(|p| math::add(*p, self.data_shift))
            .collect()
    }

    fn output_mesh(&self, nodes_centered: &[Vec3]) -> Result<TubeMesh> {
        let nodes: Vec<Vec3> = nodes_centered
            .iter()
            .map(|p| math::add(*p, self.data_shift))
            .collect();
        self.model.mesh_from_nodes(nodes)
    }

    /// Evaluates the full chain. `base` switches the warm-start composition:
    /// when set, the warp is applied to those fixed nodes instead of the
    /// similarity-transformed model.
    fn forward(
        &self,
        state: &FitState,
        scratch: &mut Scratch,
        warp_needed: bool,
        base: Option<&[Vec3]>,
    ) -> ForwardPass {
        let n = self.model.n_nodes();
        let (x_pca, z, x_trans): (Vec<Vec3>, Vec<Vec3>, Vec<Vec3>) = match base {
            Some(nodes) => (Vec::new(), Vec::new(), nodes.to_vec()),
            None => {
                let mut x_pca = self.mean_centered.clone();
                for (m, mode) in self.model.modes.iter().enumerate() {
                    let w = state.delta * state.amplitudes[m] * self.model.sigmas[m];
                    if w == 0.0 {
                        continue;
                    }
                    for (o, phi) in x_pca.iter_mut().zip(mode) {
                        *o = math::add(*o, math::scale(*phi, w));
                    }
                }
                let rot = ops::rotation_matrix(state.euler);
                let z: Vec<Vec3> = x_pca
                    .iter()
                    .map(|p| math::mat3_apply_row(*p, &rot))
                    .collect();
                let x_trans: Vec<Vec3> = z
                    .iter()
                    .map(|p| math::add(math::scale(*p, state.psi), state.offset))
                    .collect();
                (x_pca, z, x_trans)
            }
        };

        let evaluate_warp = warp_needed || !state.warp_is_null();
        let x_out: Vec<Vec3> = if evaluate_warp {
            let k = state.control_points.len();
            scratch.radii.resize(n * k, 0.0);
            let anchors: Vec<Vec3> = state
                .control_points
                .iter()
                .zip(&state.control_offsets)
                .map(|(c, d)| math::add(*c, *d))
                .collect();
            let lin = &state.rbf_linear;
            x_trans
                .iter()
                .enumerate()
                .map(|(i, y)| {
                    let mut disp = [
                        y[0] * lin[0][0] + y[1] * lin[1][0] + y[2] * lin[2][0] + lin[3][0],
                        y[0] * lin[0][1] + y[1] * lin[1][1] + y[2] * lin[2][1] + lin[3][1],
                        y[0] * lin[0][2] + y[1] * lin[1][2] + y[2] * lin[2][2] + lin[3][2],
                    ];
                    let row = &mut scratch.radii[i * k..(i + 1) * k];
                    for ((r_out, a), w) in
                        row.iter_mut().zip(&anchors).zip(&state.rbf_weights)
                    {
                        let r = math::dist(*y, *a);
                        *r_out = r;
                        disp[0] += w[0] * r;
                        disp[1] += w[1] * r;
                        disp[2] += w[2] * r;
                    }
                    math::add(*y, disp)
                })
                .collect()
        } else {
            x_trans.clone()
        };

        // Ring centroids and the fixed-operator mesh centerline.
        let ppr = self.model.topology.pts_per_ring;
        let n_rings = self.model.topology.n_rings;
        let centroids: Vec<Vec3> = (0..n_rings)
            .map(|r| math::centroid(&x_out[r * ppr..(r + 1) * ppr]))
            .collect();
        let cl_mesh: Vec<Vec3> = self
            .cl_weights
            .iter()
            .map(|row| {
                let mut p = [0.0; 3];
                for (w, c) in row.iter().zip(&centroids) {
                    p = math::add(p, math::scale(*c, *w));
                }
                p
            })
            .collect();

        ForwardPass {
            x_pca,
            z,
            x_trans,
            x_out,
            warp_evaluated: evaluate_warp,
            cl_mesh,
            mesh_match: Vec::new(),
            cl_match: Vec::new(),
            losses: LossBreakdown::default(),
        }
    }

    fn match_and_losses(&self, state: &FitState, data: &FrameData, fwd: &mut ForwardPass) {
        let nearest = |targets: &[Vec3], p: Vec3| -> (u32, f64) {
            let mut best = f64::MAX;
            let mut arg = 0u32;
            for (i, t) in targets.iter().enumerate() {
                let d = math::dist_sq(p, *t);
                if d < best {
                    best = d;
                    arg = i as u32;
                }
            }
            (arg, best)
        };
        let q = data.contour_points.len() as f64;
        let mut mesh_loss = 0.0;
        fwd.mesh_match = data
            .contour_points
            .iter()
            .map(|s| {
                let (i, d) = nearest(&fwd.x_out, *s);
                mesh_loss += d;
                i
            })
            .collect();
        mesh_loss /= q;

        let ps = data.cl_slices.len() as f64;
        let mut cl_loss = 0.0;
        fwd.cl_match = data
            .cl_slices
            .iter()
            .map(|s| {
                let (i, d) = nearest(&fwd.cl_mesh, *s);
                cl_loss += d;
                i
            })
            .collect();
        cl_loss /= ps;

        let (modal, rot, warp) = ops::regularization_losses(state);
        let w = &state.loss_weights;
        fwd.losses = LossBreakdown {
            mesh: mesh_loss,
            centerline: cl_loss,
            modal,
            rotation: rot,
            warp,
            total: w.mesh * mesh_loss
                + w.centerline * cl_loss
                + w.modal * modal
                + w.rotation * rot
                + w.warp * warp,
        };
    }

    /// Gradient of the weighted total loss at `state`; entries of inactive
    /// parameter groups are zero. Nearest-neighbor matchings are held fixed
    /// at the current assignment (the standard subgradient choice).
    fn backward(
        &self,
        state: &FitState,
        data: &FrameData,
        fwd: &ForwardPass,
        scratch: &Scratch,
        active: ActiveSet,
        warm: bool,
    ) -> ParamGrads {
        let n = fwd.x_out.len();
        let k = state.control_points.len();
        let m = self.model.n_modes();
        let w = &state.loss_weights;
        let mut grads = ParamGrads::zeros(m, k);

        // d(total)/d(x_out).
        let mut g_out = vec![[0.0; 3]; n];
        let q = data.contour_points.len() as f64;
        let mesh_coef = 2.0 * w.mesh / q;
        for (s, &i) in data.contour_points.iter().zip(&fwd.mesh_match) {
            let i = i as usize;
            let d = math::sub(fwd.x_out[i], *s);
            g_out[i] = math::add(g_out[i], math::scale(d, mesh_coef));
        }

        let ps = data.cl_slices.len() as f64;
        let cl_coef = 2.0 * w.centerline / ps;
        let mut g_cl = vec![[0.0; 3]; fwd.cl_mesh.len()];
        for (s, &i) in data.cl_slices.iter().zip(&fwd.cl_match) {
            let i = i as usize;
            let d = math::sub(fwd.cl_mesh[i], *s);
            g_cl[i] = math::add(g_cl[i], math::scale(d, cl_coef));
        }
        // Pull back through the fixed centerline operator and the ring
        // centroid means.
        let n_rings = self.model.topology.n_rings;
        let ppr = self.model.topology.pts_per_ring;
        let mut g_centroid = vec![[0.0; 3]; n_rings];
        for (row, g) in self.cl_weights.iter().zip(&g_cl) {
            if *g == [0.0; 3] {
                continue;
            }
            for (r, weight) in row.iter().enumerate() {
                g_centroid[r] = math::add(g_centroid[r], math::scale(*g, *weight));
            }
        }
        let inv_ppr = 1.0 / ppr as f64;
        for r in 0..n_rings {
            let gc = math::scale(g_centroid[r], inv_ppr);
            if gc == [0.0; 3] {
                continue;
            }
            for i in r * ppr..(r + 1) * ppr {
                g_out[i] = math::add(g_out[i], gc);
            }
        }

        // Warp backward: x_out = y + Σ_k w_k·r_k(y) + linᵀ ỹ.
        let mut g_y = if fwd.warp_evaluated {
            let anchors: Vec<Vec3> = state
                .control_points
                .iter()
                .zip(&state.control_offsets)
                .map(|(c, d)| math::add(*c, *d))
                .collect();
            let lin = &state.rbf_linear;
            let mut g_y = vec![[0.0; 3]; n];
            for (i, y) in fwd.x_trans.iter().enumerate() {
                let g = g_out[i];
                if active.warp {
                    // Affine-tail gradient.
                    for p in 0..3 {
                        grads.rbf_linear[p][0] += y[p] * g[0];
                        grads.rbf_linear[p][1] += y[p] * g[1];
                        grads.rbf_linear[p][2] += y[p] * g[2];
                    }
                    grads.rbf_linear[3] = math::add(grads.rbf_linear[3], g);
                }
                // Chain through the affine tail into y.
                let mut gy = [
                    g[0] + lin[0][0] * g[0] + lin[0][1] * g[1] + lin[0][2] * g[2],
                    g[1] + lin[1][0] * g[0] + lin[1][1] * g[1] + lin[1][2] * g[2],
                    g[2] + lin[2][0] * g[0] + lin[2][1] * g[1] + lin[2][2] * g[2],
                ];
                let row = &scratch.radii[i * k..(i + 1) * k];
                for (j, (a, weight)) in anchors.iter().zip(&state.rbf_weights).enumerate() {
                    let r = row[j];
                    if active.warp {
                        grads.rbf_weights[j] =
                            math::add(grads.rbf_weights[j], math::scale(g, r));
                    }
                    if r < 1e-12 {
                        continue;
                    }
                    let u = math::scale(math::sub(*y, *a), 1.0 / r);
                    let gw = math::dot(g, *weight);
                    if gw != 0.0 {
                        gy = math::add(gy, math::scale(u, gw));
                        if active.warp {
                            grads.control_offsets[j] =
                                math::sub(grads.control_offsets[j], math::scale(u, gw));
                        }
                    }
                }
                g_y[i] = gy;
            }
            g_y
        } else {
            g_out
        };

        // Warp magnitude regularizer.
        if active.warp {
            let warp_coef = 2.0 * w.warp / k as f64;
            for (gd, dc) in grads.control_offsets.iter_mut().zip(&state.control_offsets) {
                *gd = math::add(*gd, math::scale(*dc, warp_coef));
            }
        } else {
            grads.control_offsets.iter_mut().for_each(|g| *g = [0.0; 3]);
            grads.rbf_weights.iter_mut().for_each(|g| *g = [0.0; 3]);
            grads.rbf_linear = [[0.0; 3]; 4];
        }

        if warm {
            return grads;
        }

        // Similarity backward: y = psi·z + offset, z = x_pca · R.
        let (rot, rot_deriv) = ops::rotation_with_derivatives(state.euler);
        if active.offset {
            for g in &g_y {
                grads.offset = math::add(grads.offset, *g);
            }
        }
        if active.psi {
            grads.psi = fwd
                .z
                .iter()
                .zip(&g_y)
                .map(|(z, g)| math::dot(*z, *g))
                .sum();
        }
        if active.rotation {
            let mut g_r = [[0.0; 3]; 3];
            for (x, g) in fwd.x_pca.iter().zip(&g_y) {
                for p in 0..3 {
                    g_r[p][0] += x[p] * g[0];
                    g_r[p][1] += x[p] * g[1];
                    g_r[p][2] += x[p] * g[2];
                }
            }
            for axis in 0..3 {
                let mut acc = 0.0;
                for p in 0..3 {
                    for qq in 0..3 {
                        acc += g_r[p][qq] * rot_deriv[axis][p][qq];
                    }
                }
                grads.euler[axis] = state.psi * acc + 2.0 * w.rotation * state.euler[axis] / 3.0;
            }
        }

        if active.amplitudes || active.delta {
            let rot_t = math::mat3_transpose(&rot);
            for g in g_y.iter_mut() {
                *g = math::scale(math::mat3_apply_row(*g, &rot_t), state.psi);
            }
            let mode_dots: Vec<f64> = self
                .model
                .modes
                .iter()
                .map(|mode| {
                    mode.iter()
                        .zip(&g_y)
                        .map(|(phi, g)| math::dot(*phi, *g))
                        .sum()
                })
                .collect();
            if active.amplitudes {
                let modal_coef = 2.0 * w.modal / m.max(1) as f64;
                for (i, gd) in grads.amplitudes.iter_mut().enumerate() {
                    *gd = state.delta * self.model.sigmas[i] * mode_dots[i]
                        + modal_coef * state.amplitudes[i];
                }
            }
            if active.delta {
                grads.delta = mode_dots
                    .iter()
                    .enumerate()
                    .map(|(i, d)| state.amplitudes[i] * self.model.sigmas[i] * d)
                    .sum();
            }
        }

        grads
    }

    /// Loss and gradient of the first-frame chain at an arbitrary state.
    pub fn loss_and_grad(
        &self,
        state: &FitState,
        data: &FrameData,
        active: ActiveSet,
    ) -> (LossBreakdown, ParamGrads) {
        let mut scratch = Scratch::new();
        let mut fwd = self.forward(state, &mut scratch, active.warp, None);
        self.match_and_losses(state, data, &mut fwd);
        let grads = self.backward(state, data, &fwd, &scratch, active, false);
        (fwd.losses, grads)
    }

    /// Loss only, first-frame chain.
    pub fn loss(&self, state: &FitState, data: &FrameData) -> LossBreakdown {
        let mut scratch = Scratch::new();
        let mut fwd = self.forward(state, &mut scratch, false, None);
        self.match_and_losses(state, data, &mut fwd);
        fwd.losses
    }

    fn make_adam(&self) -> Adam {
        let mut adam = Adam::new(self.config.learning_rate);
        adam.set_lr_scale(Block::RbfWeights, self.warp_weight_scale);
        adam.set_lr_scale(Block::RbfLinear, self.warp_linear_scale);
        adam
    }

    fn adam_step(&self, adam: &mut Adam, state: &mut FitState, grads: &ParamGrads, active: ActiveSet) {
        if active.amplitudes {
            adam.step(Block::Amplitudes, &mut state.amplitudes, &grads.amplitudes);
        }
        if active.delta {
            let mut p = [state.delta];
            adam.step(Block::Delta, &mut p, &[grads.delta]);
            state.delta = p[0];
        }
        if active.psi {
            let mut p = [state.psi];
            adam.step(Block::Psi, &mut p, &[grads.psi]);
            state.psi = p[0];
        }
        if active.rotation {
            adam.step(Block::Euler, &mut state.euler, &grads.euler);
        }
        if active.offset {
            adam.step(Block::Offset, &mut state.offset, &grads.offset);
        }
        if active.warp {
            adam.step(
                Block::ControlOffsets,
                state.control_offsets.as_flattened_mut(),
                grads.control_offsets.as_flattened(),
            );
            adam.step(
                Block::RbfWeights,
                state.rbf_weights.as_flattened_mut(),
                grads.rbf_weights.as_flattened(),
            );
            adam.step(
                Block::RbfLinear,
                state.rbf_linear.as_flattened_mut(),
                grads.rbf_linear.as_flattened(),
            );
        }
    }
}

/// Result of the first-frame fit.
#[derive(Debug, Clone)]
pub struct Frame0Fit {
    pub state: FitState,
    pub mesh: TubeMesh,
    pub final_losses: LossBreakdown,
    pub trace: Vec<EpochTrace>,
}

/// Fits the first frame: 300 epochs (by default) under the four-stage
/// activation schedule, starting from the neutral state. Deterministic for
/// fixed inputs and configuration.
pub fn fit_frame0(
    model: &ShapeModel,
    contours: &[SliceContour],
    config: &FitConfig,
) -> core::result::Result<Frame0Fit, FitFailure> {
    let ctx = FitContext::new(model, contours, config.clone())?;
    let data = ctx.frame_data(contours)?;
    let mut state = ctx.initial_state();
    let mut adam = ctx.make_adam();
    let mut scratch = Scratch::new();
    let mut trace = Vec::with_capacity(ctx.config.schedule.total_epochs());

    run_stage_epochs(&ctx, &data, &mut state, &mut adam, &mut scratch, &mut trace, 0).map_err(
        |error| FitFailure {
            error,
            trace: trace.clone(),
        },
    )?;

    let mut fwd = ctx.forward(&state, &mut scratch, false, None);
    ctx.match_and_losses(&state, &data, &mut fwd);
    let mesh = ctx.output_mesh(&fwd.x_out).map_err(FitFailure::from)?;
    Ok(Frame0Fit {
        state,
        mesh,
        final_losses: fwd.losses,
        trace,
    })
}

fn run_stage_epochs(
    ctx: &FitContext,
    data: &FrameData,
    state: &mut FitState,
    adam: &mut Adam,
    scratch: &mut Scratch,
    trace: &mut Vec<EpochTrace>,
    frame: usize,
) -> Result<()> {
    let schedule = ctx.config.schedule;
    for epoch in 0..schedule.total_epochs() {
        if schedule.enters_warp_stage(epoch) {
            state.rbf_weights.iter_mut().for_each(|w| *w = [0.0; 3]);
            state.rbf_linear = [[0.0; 3]; 4];
            adam.reset_block(Block::RbfWeights);
            adam.reset_block(Block::RbfLinear);
        }
        let active = schedule.active_set(epoch);
        let mut fwd = ctx.forward(state, scratch, active.warp, None);
        ctx.match_and_losses(state, data, &mut fwd);
        trace.push(EpochTrace {
            frame,
            epoch,
            losses: fwd.losses,
        });
        if !fwd.losses.is_finite() {
            return Err(Error::NonFinite { epoch, frame });
        }
        let grads = ctx.backward(state, data, &fwd, scratch, active, false);
        if !grads.all_finite() {
            return Err(Error::NonFinite { epoch, frame });
        }
        ctx.adam_step(adam, state, &grads, active);
        if !state.all_finite() {
            return Err(Error::NonFinite { epoch, frame });
        }
        state.epoch += 1;
    }
    Ok(())
}

/// Fits a full frame sequence: the first frame through the staged schedule,
/// every further frame by `warm_epochs` warp-only epochs applied on top of
/// the previous frame's fitted nodes (fresh anchor offsets and kernel
/// weights per frame).
pub fn fit_sequence(
    model: &ShapeModel,
    slices: &SliceSet,
    config: &FitConfig,
) -> core::result::Result<FitResult, FitFailure> {
    let frame0 = fit_frame0(model, &slices.frames[0], config)?;
    let ctx = FitContext::new(model, &slices.frames[0], config.clone())?;
    let mut trace = frame0.trace;
    let mut meshes = vec![frame0.mesh];
    let mut final_losses = vec![frame0.final_losses];
    let mut scratch = Scratch::new();

    let warm_active = ActiveSet {
        warp: true,
        ..Default::default()
    };
    let mut carry_state = frame0.state;
    for frame in 1..slices.n_frames() {
        let data = ctx
            .frame_data(&slices.frames[frame])
            .map_err(|error| FitFailure {
                error,
                trace: trace.clone(),
            })?;
        // Previous frame's fitted nodes in context coordinates.
        let base: Vec<Vec3> = meshes[frame - 1]
            .nodes
            .iter()
            .map(|p| math::sub(*p, ctx.data_shift))
            .collect();

        let mut state = carry_state.clone();
        state.control_offsets.iter_mut().for_each(|d| *d = [0.0; 3]);
        state.rbf_weights.iter_mut().for_each(|w| *w = [0.0; 3]);
        state.rbf_linear = [[0.0; 3]; 4];
        let mut adam = ctx.make_adam();

        let mut abort: Option<Error> = None;
        for epoch in 0..ctx.config.warm_epochs {
            let mut fwd = ctx.forward(&state, &mut scratch, true, Some(&base));
            ctx.match_and_losses(&state, &data, &mut fwd);
            trace.push(EpochTrace {
                frame,
                epoch,
                losses: fwd.losses,
            });
            if !fwd.losses.is_finite() {
                abort = Some(Error::NonFinite { epoch, frame });
                break;
            }
            let grads = ctx.backward(&state, &data, &fwd, &scratch, warm_active, true);
            if !grads.all_finite() {
                abort = Some(Error::NonFinite { epoch, frame });
                break;
            }
            ctx.adam_step(&mut adam, &mut state, &grads, warm_active);
            if !state.all_finite() {
                abort = Some(Error::NonFinite { epoch, frame });
                break;
            }
        }
        if let Some(error) = abort {
            return Err(FitFailure { error, trace });
        }

        let mut fwd = ctx.forward(&state, &mut scratch, true, Some(&base));
        ctx.match_and_losses(&state, &data, &mut fwd);
        let mesh = ctx.output_mesh(&fwd.x_out).map_err(|error| FitFailure {
            error,
            trace: trace.clone(),
        })?;
        meshes.push(mesh);
        final_losses.push(fwd.losses);
        carry_state = state;
    }

    let centerlines = meshes
        .iter()
        .map(|mesh| centerline_from_mesh(mesh, config.mesh_centerline_points))
        .collect::<Result<Vec<_>>>()
        .map_err(|error| FitFailure {
            error,
            trace: trace.clone(),
        })?;

    Ok(FitResult {
        meshes,
        centerlines,
        final_losses,
        trace,
    })
}
