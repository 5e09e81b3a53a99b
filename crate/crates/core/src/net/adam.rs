//! ADAM optimizer with bias correction. One state tracks a fixed ordered
//! list of parameter tensors; callers must pass tensors in the same order
//! on every step.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct MomentPair {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// First/second-moment accumulators plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    slots: Vec<MomentPair>,
}

impl AdamState {
    /// Standard hyperparameters: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new() -> Self {
        Self::with_hyperparams(0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            epsilon,
            t: 0,
            slots: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update: p -= eta * m_hat / (sqrt(v_hat) + eps), with moments
    /// initialized lazily from the first call's tensor shapes.
    pub fn step(&mut self, eta: f64, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "adam step",
                format!("{} gradient tensors", params.len()),
                format!("{}", grads.len()),
            ));
        }
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| MomentPair {
                    m: vec![0.0; p.len()],
                    v: vec![0.0; p.len()],
                })
                .collect();
        } else if self.slots.len() != params.len() {
            return Err(Error::shape(
                "adam step",
                format!("{} tensors (as on first step)", self.slots.len()),
                format!("{}", params.len()),
            ));
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);

        for (idx, ((param, grad), slot)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.slots.iter_mut())
            .enumerate()
        {
            if param.len() != grad.len() || param.len() != slot.m.len() {
                return Err(Error::shape(
                    format!("adam tensor {idx}"),
                    format!("len {}", slot.m.len()),
                    format!("param {} / grad {}", param.len(), grad.len()),
                ));
            }
            for (((p, &g), m), v) in param
                .iter_mut()
                .zip(grad.iter())
                .zip(slot.m.iter_mut())
                .zip(slot.v.iter_mut())
            {
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!("gradient for adam tensor {idx}")));
                }
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= eta * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::new();
        let mut p = vec![1.5, -2.0, 0.25];
        let g = vec![0.0; 3];
        state.step(0.1, &mut [&mut p], &[&g]).unwrap();
        assert_eq!(p, vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        // p=1, g=1, eta=0.1: bias-corrected m_hat = v_hat = 1, so the
        // update is eta / (1 + eps) and the result sits just above 0.9.
        let mut state = AdamState::new();
        let mut p = vec![1.0];
        let g = vec![1.0];
        state.step(0.1, &mut [&mut p], &[&g]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-8, "got {}", p[0]);
    }

    #[test]
    fn deterministic_across_identical_runs() {
        let run = || {
            let mut state = AdamState::new();
            let mut p = vec![0.3, -0.7];
            for step in 0..50 {
                let g = vec![0.1 * (step as f64).sin(), -0.2];
                state.step(1e-2, &mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut state = AdamState::new();
        let mut p = vec![1.0];
        let g = vec![f64::NAN];
        let err = state.step(0.1, &mut [&mut p], &[&g]).unwrap_err();
        assert!(err.to_string().contains("tensor 0"));
    }

    #[test]
    fn tensor_count_must_match_first_step() {
        let mut state = AdamState::new();
        let mut p1 = vec![1.0];
        let mut p2 = vec![2.0];
        let g = vec![0.5];
        state.step(0.1, &mut [&mut p1], &[&g]).unwrap();
        assert!(state
            .step(0.1, &mut [&mut p1, &mut p2], &[&g, &g])
            .is_err());
    }
}
