//! Adam optimizer over named parameter blocks.
//!
//! Blocks are stepped independently; a block skipped in an epoch keeps its
//! moments and step count, mirroring optimizers that only update parameters
//! which received a gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::fp;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Amplitudes,
    Delta,
    Psi,
    Euler,
    Offset,
    ControlOffsets,
    RbfWeights,
    RbfLinear,
}

const N_BLOCKS: usize = 8;

impl Block {
    fn index(self) -> usize {
        match self {
            Block::Amplitudes => 0,
            Block::Delta => 1,
            Block::Psi => 2,
            Block::Euler => 3,
            Block::Offset => 4,
            Block::ControlOffsets => 5,
            Block::RbfWeights => 6,
            Block::RbfLinear => 7,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct BlockState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

/// Adam state for every parameter block of one fit.
#[derive(Debug, Clone)]
pub struct Adam {
    base_lr: f64,
    /// Per-block learning-rate multiplier.
    lr_scale: [f64; N_BLOCKS],
    blocks: [BlockState; N_BLOCKS],
}

impl Adam {
    pub fn new(base_lr: f64) -> Self {
        Self {
            base_lr,
            lr_scale: [1.0; N_BLOCKS],
            blocks: Default::default(),
        }
    }

    /// Scales the effective learning rate of one block.
    pub fn set_lr_scale(&mut self, block: Block, scale: f64) {
        self.lr_scale[block.index()] = scale;
    }

    /// Drops moments and step count of a block (used when its parameters are
    /// re-initialized).
    pub fn reset_block(&mut self, block: Block) {
        self.blocks[block.index()] = BlockState::default();
    }

    /// One Adam update of a parameter slice.
    pub fn step(&mut self, block: Block, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        let lr = self.base_lr * self.lr_scale[block.index()];
        let state = &mut self.blocks[block.index()];
        if state.m.len() != params.len() {
            state.m = vec![0.0; params.len()];
            state.v = vec![0.0; params.len()];
            state.step = 0;
        }
        state.step += 1;
        let t = state.step as i32;
        let bc1 = 1.0 - fp::powi(BETA1, t);
        let bc2 = 1.0 - fp::powi(BETA2, t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (fp::sqrt(v_hat) + EPSILON);
        }
    }
}
