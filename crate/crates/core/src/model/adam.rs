// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Params;

/// Bias-corrected Adam with one moment pair per parameter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub first: Params<T>,
    pub second: Params<T>,
    pub step: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Params<T>, learning_rate: T, beta1: T, beta2: T, epsilon: T) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// Applies one update. Gradients are checked for shape and finiteness
    /// before anything is modified.
    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) -> Result<()> {
        params.check_same_shape(grads)?;
        params.check_same_shape(&self.first)?;
        for (name, g) in grads.blocks() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    param: format!("{name}[{i}]"),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let one = T::one();
        let correction1 = one - self.beta1.powi(t);
        let correction2 = one - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);

        let p_blocks = params.blocks_mut();
        let g_blocks = grads.blocks();
        let m_blocks = self.first.blocks_mut();
        let v_blocks = self.second.blocks_mut();
        for (((p, g), m), v) in p_blocks
            .into_iter()
            .zip(g_blocks)
            .zip(m_blocks)
            .zip(v_blocks)
        {
            for (((p, &g), m), v) in
                p.1.iter_mut()
                    .zip(g.1)
                    .zip(m.1.iter_mut())
                    .zip(v.1.iter_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
