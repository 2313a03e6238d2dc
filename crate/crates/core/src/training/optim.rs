use crate::error::{ensure_dims, Result};

/// Classical momentum: `v' = μ·v − η·g`, `θ' = θ + v'`.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    ensure_dims("gradient length", params.len(), grads.len())?;
    ensure_dims("velocity length", params.len(), velocity.len())?;
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    Ok(())
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grads);
    if norm <= max_norm {
        return norm;
    }
    let original = grads.to_vec();
    let mut scale = max_norm / norm;
    loop {
        for (g, o) in grads.iter_mut().zip(&original) {
            *g = o * scale;
        }
        if l2_norm(grads) <= max_norm {
            return norm;
        }
        // rounding left us a hair above the cap
        scale = f64::from_bits(scale.to_bits() - 1);
    }
}

/// Momentum SGD with global-norm clipping and its own velocity buffer.
#[derive(Debug, Clone)]
pub struct MomentumSgd {
    pub lr: f64,
    pub momentum: f64,
    pub clip: f64,
    velocity: Vec<f64>,
}

impl MomentumSgd {
    pub fn new(n_params: usize, lr: f64, momentum: f64, clip: f64) -> Self {
        Self {
            lr,
            momentum,
            clip,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut [f64], grads: &mut [f64]) -> Result<()> {
        clip_global_norm(grads, self.clip);
        sgd_momentum_step(params, grads, &mut self.velocity, self.lr, self.momentum)
    }
}
