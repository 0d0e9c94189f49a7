//! Supervised, consistency and self-training objectives built on the tape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of the supervised terms.
    pub alpha: f64,
    /// Weight of source consistency.
    pub beta: f64,
    /// Weight of target self-training.
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::contract(format!(
                    "loss weight {name} must be finite and >= 0, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Scalar values of the loss terms for one step. Terms absent from the graph
/// are reported as zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub sup_rel: f64,
    pub sup_abs: f64,
    pub cons_s: f64,
    pub cons_t: f64,
    /// Extra supervised terms (labeled target videos, optional source absolute
    /// supervision), weighted by alpha.
    pub sup_extra: f64,
    pub total: f64,
}

impl StepLosses {
    /// The weighted total recomputed from the parts.
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.alpha * (self.sup_rel + self.sup_abs + self.sup_extra)
            + w.beta * self.cons_s
            + w.gamma * self.cons_t
    }
}

/// Graph handles of the individual terms; `None` marks a deleted term.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossTerms {
    pub sup_rel: Option<Var>,
    pub sup_abs: Option<Var>,
    pub cons_s: Option<Var>,
    pub cons_t: Option<Var>,
    pub sup_extra: Option<Var>,
}

impl LossTerms {
    pub fn values(&self, g: &Graph, total: Var) -> StepLosses {
        let v = |t: Option<Var>| t.map_or(0.0, |v| g.value(v).item());
        StepLosses {
            sup_rel: v(self.sup_rel),
            sup_abs: v(self.sup_abs),
            cons_s: v(self.cons_s),
            cons_t: v(self.cons_t),
            sup_extra: v(self.sup_extra),
            total: g.value(total).item(),
        }
    }

    /// First term whose value is NaN or infinite.
    pub fn first_non_finite(&self, g: &Graph) -> Option<(&'static str, f64)> {
        [
            ("sup_rel", self.sup_rel),
            ("sup_abs", self.sup_abs),
            ("cons_s", self.cons_s),
            ("cons_t", self.cons_t),
            ("sup_extra", self.sup_extra),
        ]
        .into_iter()
        .filter_map(|(n, v)| v.map(|v| (n, g.value(v).item())))
        .find(|(_, x)| !x.is_finite())
    }
}

fn check_len(op: &'static str, g: &Graph, v: Var, n: usize) -> Result<()> {
    let m = g.value(v).numel();
    if g.value(v).rank() != 1 || m != n {
        return Err(Error::dim(
            op,
            format!("prediction {:?} vs {n} targets", g.value(v).shape()),
        ));
    }
    Ok(())
}

/// `(1/B) Σ (Δŷ − (y_S − y_E))²`.
pub fn loss_sup_rel(
    g: &mut Graph,
    delta_hat: Var,
    y_source: &[f64],
    y_exemplar: &[f64],
) -> Result<Var> {
    if y_source.len() != y_exemplar.len() {
        return Err(Error::dim(
            "loss_sup_rel",
            format!(
                "{} source vs {} exemplar labels",
                y_source.len(),
                y_exemplar.len()
            ),
        ));
    }
    check_len("loss_sup_rel", g, delta_hat, y_source.len())?;
    let diff = y_source
        .iter()
        .zip(y_exemplar)
        .map(|(s, e)| s - e)
        .collect();
    let t = g.constant(Tensor::vector(diff));
    g.mse(delta_hat, t)
}

/// `(1/B) Σ (ŷ_abs − y)²` against fixed labels.
pub fn loss_sup_abs(g: &mut Graph, y_hat: Var, y: &[f64]) -> Result<Var> {
    check_len("loss_sup_abs", g, y_hat, y.len())?;
    let t = g.constant(Tensor::vector(y.to_vec()));
    g.mse(y_hat, t)
}

/// Source consistency; gradients reach both arguments.
pub fn loss_cons_source(g: &mut Graph, recon: Var, abs: Var) -> Result<Var> {
    g.mse(recon, abs)
}

/// Target self-training: the absolute prediction acts as a pseudo-label. With
/// `stopgrad` it is detached so no gradient flows back through it.
pub fn loss_cons_target(g: &mut Graph, recon: Var, abs: Var, stopgrad: bool) -> Result<Var> {
    let pseudo = if stopgrad { g.detach(abs) } else { abs };
    g.mse(recon, pseudo)
}

/// `α·(sup_rel + sup_abs + sup_extra) + β·cons_s + γ·cons_t`.
///
/// Terms that are absent or carry a zero weight are left out of the graph
/// entirely, so they contribute no gradient at all.
pub fn total_loss(g: &mut Graph, terms: &LossTerms, w: &LossWeights) -> Result<Var> {
    w.validate()?;
    let weighted = [
        (w.alpha, terms.sup_rel),
        (w.alpha, terms.sup_abs),
        (w.alpha, terms.sup_extra),
        (w.beta, terms.cons_s),
        (w.gamma, terms.cons_t),
    ];
    let parts: Vec<(f64, Var)> = weighted
        .into_iter()
        .filter_map(|(wt, v)| v.filter(|_| wt != 0.0).map(|v| (wt, v)))
        .collect();
    g.weighted_sum(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_param(g: &mut Graph, v: &[f64]) -> Var {
        g.param(Tensor::vector(v.to_vec()))
    }

    #[test]
    fn sup_rel_examples() {
        let mut g = Graph::new();
        let d = vec_param(&mut g, &[3.0, -1.0]);
        let l = loss_sup_rel(&mut g, d, &[10.0, 7.0], &[7.0, 8.0]).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        let d = vec_param(&mut g, &[0.0]);
        let l = loss_sup_rel(&mut g, d, &[10.0], &[7.0]).unwrap();
        assert_eq!(g.value(l).item(), 9.0);
        assert!(loss_sup_rel(&mut g, d, &[10.0, 1.0], &[7.0]).is_err());
        assert!(loss_sup_rel(&mut g, d, &[10.0, 1.0], &[7.0, 2.0]).is_err());
    }

    #[test]
    fn sup_abs_examples() {
        let mut g = Graph::new();
        let p = vec_param(&mut g, &[6.0]);
        let l = loss_sup_abs(&mut g, p, &[30.0]).unwrap();
        assert_eq!(g.value(l).item(), 576.0);
        let l = loss_sup_abs(&mut g, p, &[6.0]).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        assert!(matches!(
            loss_sup_abs(&mut g, p, &[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn consistency_examples() {
        let mut g = Graph::new();
        let r = vec_param(&mut g, &[22.0]);
        let a = vec_param(&mut g, &[20.0]);
        let l = loss_cons_source(&mut g, r, a).unwrap();
        assert_eq!(g.value(l).item(), 4.0);
        g.backward(l).unwrap();
        assert_eq!(g.grad(r).unwrap().data(), &[4.0]);
        assert_eq!(g.grad(a).unwrap().data(), &[-4.0]);

        let mut g = Graph::new();
        let r = vec_param(&mut g, &[22.0]);
        let a = vec_param(&mut g, &[20.0]);
        let l = loss_cons_target(&mut g, r, a, true).unwrap();
        assert_eq!(g.value(l).item(), 4.0);
        g.backward(l).unwrap();
        assert_eq!(g.grad(r).unwrap().data(), &[4.0]);
        assert_eq!(g.grad(a).unwrap().data(), &[0.0]);

        let l = loss_cons_target(&mut g, r, r, true).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
    }

    #[test]
    fn total_of_unit_weights() {
        let mut g = Graph::new();
        let t: Vec<Var> = (1..=4).map(|i| g.param(Tensor::scalar(i as f64))).collect();
        let terms = LossTerms {
            sup_rel: Some(t[0]),
            sup_abs: Some(t[1]),
            cons_s: Some(t[2]),
            cons_t: Some(t[3]),
            sup_extra: None,
        };
        let total = total_loss(&mut g, &terms, &LossWeights::default()).unwrap();
        assert_eq!(g.value(total).item(), 10.0);
        let parts = terms.values(&g, total);
        assert_eq!(parts.weighted_total(&LossWeights::default()), parts.total);
    }

    #[test]
    fn zero_weights_give_zero_and_no_grads() {
        let mut g = Graph::new();
        let t: Vec<Var> = (1..=4).map(|i| g.param(Tensor::scalar(i as f64))).collect();
        let terms = LossTerms {
            sup_rel: Some(t[0]),
            sup_abs: Some(t[1]),
            cons_s: Some(t[2]),
            cons_t: Some(t[3]),
            sup_extra: None,
        };
        let w = LossWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        };
        let total = total_loss(&mut g, &terms, &w).unwrap();
        assert_eq!(g.value(total).item(), 0.0);
        g.backward(total).unwrap();
        for v in t {
            assert_eq!(g.grad(v).unwrap().item(), 0.0);
        }
    }

    #[test]
    fn negative_weight_rejected() {
        let mut g = Graph::new();
        let w = LossWeights {
            alpha: 1.0,
            beta: -0.5,
            gamma: 1.0,
        };
        assert!(matches!(
            total_loss(&mut g, &LossTerms::default(), &w),
            Err(Error::Contract(_))
        ));
    }
}
