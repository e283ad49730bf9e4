use crate::error::{Error, Result};

/// Squared-gradient accumulators for `W` (row-major) and θ.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub w: Vec<f64>,
    pub theta: Vec<f64>,
}

impl AdaGradState {
    pub fn new(w_len: usize, theta_len: usize) -> Self {
        Self {
            w: vec![0.0; w_len],
            theta: vec![0.0; theta_len],
        }
    }
}

/// One AdaGrad descent step, per coordinate:
/// `accum += g²; param −= lr · g / (sqrt(accum) + eps)`.
pub fn adagrad_step(
    params: &mut [f64],
    grads: &[f64],
    accum: &mut [f64],
    learning_rate: f64,
    epsilon: f64,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::shape(params.len(), grads.len(), "gradient"));
    }
    if accum.len() != params.len() {
        return Err(Error::shape(params.len(), accum.len(), "accumulator"));
    }
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(accum.iter_mut()) {
        if g == 0.0 {
            continue;
        }
        *a += g * g;
        *p -= learning_rate * g / (a.sqrt() + epsilon);
    }
    Ok(())
}
