use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam moments for one parameter group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    #[serde(skip)]
    pub first_moment: Vec<Tensor>,
    #[serde(skip)]
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zero moments shaped like `params`, with the usual 0.9 / 0.999 / 1e-8 constants.
    pub fn new(params: &[Tensor]) -> Self {
        Self::with_betas(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &[Tensor], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One bias-corrected Adam update over a parameter group.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::dim(
            "adam_step",
            format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.first_moment.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if !p.same_shape(g) || !p.same_shape(&state.first_moment[i]) {
            return Err(Error::dim(
                "adam_step",
                format!(
                    "param {i}: {:?}, grad {:?}, moment {:?}",
                    p.shape(),
                    g.shape(),
                    state.first_moment[i].shape()
                ),
            ));
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mv = b1 * *mv + (1.0 - b1) * gv;
            *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_or_zero_lr_leaves_params() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0, 3.5])];
        let before = p.clone();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::zeros(&[3])], &mut st, 0.1).unwrap();
        assert_eq!(p, before);
        adam_step(
            &mut p,
            &[Tensor::vector(vec![0.3, -1.0, 2.0])],
            &mut st,
            0.0,
        )
        .unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step_count, 2);
    }

    #[test]
    fn single_step_matches_hand_computation() {
        // m = 0.1·0.5 = 0.05, v = 0.001·0.25 = 0.00025
        // m̂ = 0.05 / 0.1 = 0.5, v̂ = 0.00025 / 0.001 = 0.25
        // p = 1 − 0.1 · 0.5 / (0.5 + 1e-8)
        let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::scalar(0.5)], &mut st, 0.1).unwrap();
        assert!((p[0].item() - expected).abs() < 1e-15);
        assert!((p[0].item() - 0.900_000_002).abs() < 1e-12);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(&p);
        let err = adam_step(&mut p, &[Tensor::zeros(&[3])], &mut st, 0.1).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert_eq!(st.step_count, 0);
    }
}
