//! PCA statistical shape model over topology-consistent tube meshes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::{self, fp, rng, Vec3};
use crate::mesh::TubeMesh;
use crate::Result;

/// Shared mesh topology of a shape model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Topology {
    pub n_rings: usize,
    pub pts_per_ring: usize,
    pub cells: Vec<[u32; 3]>,
}

/// Linear point-distribution model: mean shape plus orthonormal deformation
/// modes with per-mode standard deviations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShapeModel {
    /// Mean node coordinates, mm.
    pub mean: Vec<Vec3>,
    /// Unit-norm deformation modes, mode-major, each of length `mean.len()`.
    pub modes: Vec<Vec<Vec3>>,
    /// Per-mode standard deviation of training scores, mm.
    pub sigmas: Vec<f64>,
    /// Fraction of total training variance captured per mode.
    pub explained_variance_ratio: Vec<f64>,
    pub topology: Topology,
}

impl ShapeModel {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.mean.len()
    }

    /// Evaluates the model: `X = mean + delta · Σ_m a_m σ_m Φ_m`.
    pub fn reconstruct(&self, amplitudes: &[f64], delta: f64) -> Vec<Vec3> {
        assert_eq!(amplitudes.len(), self.n_modes(), "amplitude count");
        let mut out = self.mean.clone();
        for (m, mode) in self.modes.iter().enumerate() {
            let w = delta * amplitudes[m] * self.sigmas[m];
            if w == 0.0 {
                continue;
            }
            for (o, phi) in out.iter_mut().zip(mode) {
                *o = math::add(*o, math::scale(*phi, w));
            }
        }
        out
    }

    /// Projects a node array onto the modes, returning amplitudes such that
    /// `reconstruct(a, 1.0)` is the least-squares approximation of `nodes`.
    pub fn project(&self, nodes: &[Vec3]) -> Vec<f64> {
        assert_eq!(nodes.len(), self.n_nodes(), "node count");
        self.modes
            .iter()
            .zip(&self.sigmas)
            .map(|(mode, sigma)| {
                let mut dot = 0.0;
                for ((p, m), mode_v) in nodes.iter().zip(&self.mean).zip(mode) {
                    dot += math::dot(math::sub(*p, *m), *mode_v);
                }
                dot / sigma
            })
            .collect()
    }

    /// Wraps reconstructed nodes into a mesh with the model topology.
    pub fn mesh_from_nodes(&self, nodes: Vec<Vec3>) -> Result<TubeMesh> {
        TubeMesh::new(
            self.topology.n_rings,
            self.topology.pts_per_ring,
            nodes,
            self.topology.cells.clone(),
        )
    }

    pub fn mean_mesh(&self) -> Result<TubeMesh> {
        self.mesh_from_nodes(self.mean.clone())
    }

    /// Draws a shape with i.i.d. `Normal(0, sigma_scale²)` amplitudes.
    /// Deterministic per seed.
    pub fn sample_shape(&self, seed: u64, sigma_scale: f64) -> Result<TubeMesh> {
        let mut rng = rng::chacha(seed);
        let amplitudes: Vec<f64> = (0..self.n_modes())
            .map(|_| sigma_scale * rng::normal(&mut rng))
            .collect();
        self.mesh_from_nodes(self.reconstruct(&amplitudes, 1.0))
    }
}

/// Outcome of a model build, including the rank warning state.
#[derive(Debug, Clone)]
pub struct BuildReport {
    pub model: ShapeModel,
    /// True when fewer independent directions existed than requested and the
    /// mode count was truncated.
    pub rank_deficient: bool,
    /// Non-trivial eigenvalue count of the training Gram matrix.
    pub usable_modes: usize,
}

/// Builds a PCA model from topology-identical meshes.
///
/// Uses the Gram-matrix (snapshot) eigendecomposition: for `n` shapes of `3N`
/// coordinates the covariance eigenproblem reduces to the `n x n` Gram matrix
/// of centered flattened shapes. Mode standard deviations use the
/// `(n - 1)`-denominator sample convention.
pub fn build_model(dataset: &[TubeMesh], n_modes: usize) -> Result<BuildReport> {
    if dataset.len() < 2 {
        return Err(Error::InvalidParameter(alloc::format!(
            "need >= 2 training shapes, got {}",
            dataset.len()
        )));
    }
    let first = &dataset[0];
    for mesh in dataset.iter().skip(1) {
        if !mesh.same_topology(first) {
            return Err(Error::TopologyMismatch);
        }
    }
    let n = dataset.len();
    let n_nodes = first.nodes.len();
    if n_modes > (n - 1).min(3 * n_nodes) {
        return Err(Error::InvalidParameter(alloc::format!(
            "n_modes = {n_modes} exceeds the rank bound {}",
            (n - 1).min(3 * n_nodes)
        )));
    }

    let mut mean = vec![[0.0; 3]; n_nodes];
    for mesh in dataset {
        for (m, p) in mean.iter_mut().zip(&mesh.nodes) {
            *m = math::add(*m, *p);
        }
    }
    for m in mean.iter_mut() {
        *m = math::scale(*m, 1.0 / n as f64);
    }

    // Centered data rows (kept as Vec3 arrays; dot products flatten).
    let centered: Vec<Vec<Vec3>> = dataset
        .iter()
        .map(|mesh| {
            mesh.nodes
                .iter()
                .zip(&mean)
                .map(|(p, m)| math::sub(*p, *m))
                .collect()
        })
        .collect();

    let flat_dot = |a: &[Vec3], b: &[Vec3]| -> f64 {
        a.iter().zip(b).map(|(x, y)| math::dot(*x, *y)).sum()
    };

    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let g = flat_dot(&centered[i], &centered[j]);
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }

    let (eigenvalues, eigenvectors) = math::eigh_symmetric(&gram);
    let total_variance: f64 = eigenvalues.iter().filter(|&&l| l > 0.0).sum();
    // Rank threshold relative to the raw coordinate scale, so that numerical
    // crumbs of a zero-variance dataset do not count as modes.
    let coordinate_scale: f64 = dataset
        .iter()
        .map(|mesh| mesh.nodes.iter().map(|p| math::norm_sq(*p)).sum::<f64>())
        .sum();
    let scale_tol = (1e-12 * total_variance).max(1e-24 * coordinate_scale).max(1e-300);
    let usable = eigenvalues.iter().filter(|&&l| l > scale_tol).count();
    let kept = n_modes.min(usable);
    let rank_deficient = kept < n_modes;
    if rank_deficient {
        log::warn!("rank-deficient training set: {kept} of {n_modes} requested modes usable");
    }

    let mut modes = Vec::with_capacity(kept);
    let mut sigmas = Vec::with_capacity(kept);
    let mut evr = Vec::with_capacity(kept);
    for m in 0..kept {
        let lambda = eigenvalues[m];
        // Mode = Dᵀ q / sqrt(λ); unit norm by construction.
        let q = &eigenvectors[m];
        let mut mode = vec![[0.0; 3]; n_nodes];
        for (row, &weight) in centered.iter().zip(q.iter()) {
            for (out, d) in mode.iter_mut().zip(row) {
                *out = math::add(*out, math::scale(*d, weight));
            }
        }
        let inv = 1.0 / fp::sqrt(lambda);
        for v in mode.iter_mut() {
            *v = math::scale(*v, inv);
        }
        modes.push(mode);
        sigmas.push(fp::sqrt(lambda / (n - 1) as f64));
        evr.push(if total_variance > 0.0 {
            lambda / total_variance
        } else {
            0.0
        });
    }

    let model = ShapeModel {
        mean,
        modes,
        sigmas,
        explained_variance_ratio: evr,
        topology: Topology {
            n_rings: first.n_rings,
            pts_per_ring: first.pts_per_ring,
            cells: first.cells.clone(),
        },
    };
    Ok(BuildReport {
        model,
        rank_deficient,
        usable_modes: usable,
    })
}
