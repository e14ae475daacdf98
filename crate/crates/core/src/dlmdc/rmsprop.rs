//! RMSprop: `v ← d·v + (1 − d)·g²`, `w ← w − lr·g / (√v + ε)`, elementwise.

use super::mlp::{Gradients, Layer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmspropParams {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

fn step_slice(w: &mut [f64], g: &[f64], v: &mut [f64], p: &RmspropParams) {
    for ((w, &g), v) in w.iter_mut().zip(g).zip(v) {
        *v = p.decay * *v + (1.0 - p.decay) * g * g;
        *w -= p.learning_rate * g / (v.sqrt() + p.epsilon);
    }
}

/// One update of every tensor in `params`. `state` holds the running mean
/// square and has the same shapes as `params`.
pub fn rmsprop_step(params: &mut [Layer], grads: &Gradients, state: &mut Gradients, p: &RmspropParams) {
    for ((layer, g), v) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        step_slice(&mut layer.weights, &g.weights, &mut v.weights, p);
        step_slice(&mut layer.biases, &g.biases, &mut v.biases, p);
    }
}
