//! A minimal differentiable mixture-of-experts model.
//!
//! Experts are linear maps from features to class logits and the routing
//! weights mix those logits linearly before a softmax. The model exposes
//! exactly the surface the re-routing strategies need: `forward`,
//! `predict`, `loss`, and the analytic gradient of the loss with respect
//! to the routing weights. Because the logits are linear in `r` and
//! cross-entropy is convex in the logits, the loss is convex in `r`.

use crate::error::{Error, Result};
use crate::types::{Label, ModelInput, RoutingWeights};

/// Floor applied to the predicted probability of the true class before
/// taking the log, keeping the loss finite under saturation.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// One expert: a `C x D` weight matrix (row-major) and a `C` bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Expert {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Expert {
    pub fn new(weight: Vec<f64>, bias: Vec<f64>, feature_dim: usize) -> Result<Self> {
        let class_count = bias.len();
        if class_count == 0 || feature_dim == 0 {
            return Err(Error::invalid(
                "expert needs at least one class and one feature",
            ));
        }
        if weight.len() != class_count * feature_dim {
            return Err(Error::invalid(format!(
                "expert weight has {} entries, expected {} ({} classes x {} features)",
                weight.len(),
                class_count * feature_dim,
                class_count,
                feature_dim
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("expert parameters must be finite"));
        }
        Ok(Expert { weight, bias })
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

/// The frozen bank of experts. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertBank {
    experts: Vec<Expert>,
    feature_dim: usize,
    class_count: usize,
}

impl ExpertBank {
    pub fn new(experts: Vec<Expert>, feature_dim: usize) -> Result<Self> {
        if experts.len() < 2 {
            return Err(Error::invalid(format!(
                "expert bank needs at least 2 experts, got {}",
                experts.len()
            )));
        }
        let class_count = experts[0].bias.len();
        for (j, e) in experts.iter().enumerate() {
            if e.bias.len() != class_count || e.weight.len() != class_count * feature_dim {
                return Err(Error::invalid(format!("expert {j} has inconsistent shape")));
            }
        }
        Ok(ExpertBank {
            experts,
            feature_dim,
            class_count,
        })
    }

    pub fn expert_count(&self) -> usize {
        self.experts.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    fn check_input(&self, x: &ModelInput) -> Result<()> {
        if x.features.len() != self.feature_dim {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {}",
                x.features.len(),
                self.feature_dim
            )));
        }
        Ok(())
    }

    fn check_weights(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.experts.len() {
            return Err(Error::invalid(format!(
                "routing weights cover {} experts, model has {}",
                r.len(),
                self.experts.len()
            )));
        }
        Ok(())
    }

    /// Per-expert class logits `W_j x + b_j`.
    pub fn expert_logits(&self, x: &ModelInput) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        Ok(self
            .experts
            .iter()
            .map(|e| {
                (0..self.class_count)
                    .map(|c| {
                        let row = &e.weight[c * self.feature_dim..(c + 1) * self.feature_dim];
                        e.bias[c] + dot(row, &x.features)
                    })
                    .collect()
            })
            .collect())
    }

    /// Class probabilities `softmax(sum_j r_j * expert_logits_j)`.
    pub fn forward(&self, x: &ModelInput, r: &RoutingWeights) -> Result<Vec<f64>> {
        self.check_weights(r.as_slice())?;
        let logits = self.expert_logits(x)?;
        Ok(softmax(&mix_logits(&logits, r.as_slice())))
    }

    /// Argmax class of `forward`; ties break toward the lower class id.
    pub fn predict(&self, x: &ModelInput, r: &RoutingWeights) -> Result<Label> {
        let p = self.forward(x, r)?;
        Ok(Label(argmax(&p)))
    }

    /// Cross-entropy `-log p_y`, clamped at [`PROBABILITY_FLOOR`].
    pub fn loss(&self, x: &ModelInput, r: &RoutingWeights, y: Label) -> Result<f64> {
        self.check_weights(r.as_slice())?;
        self.loss_raw(x, r.as_slice(), y)
    }

    /// Analytic gradient of the loss with respect to the routing weights:
    /// component `j` is `<p - onehot(y), expert_logits_j>`.
    pub fn loss_grad_r(&self, x: &ModelInput, r: &RoutingWeights, y: Label) -> Result<Vec<f64>> {
        self.check_weights(r.as_slice())?;
        Ok(self.loss_and_grad_raw(x, r.as_slice(), y)?.1)
    }

    /// Loss at an arbitrary (possibly off-simplex) weight vector. The loss
    /// is defined on all of R^E; gradient checks difference it along
    /// coordinate directions that leave the simplex.
    pub fn loss_raw(&self, x: &ModelInput, r: &[f64], y: Label) -> Result<f64> {
        self.check_weights(r)?;
        if y.0 >= self.class_count {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                y.0, self.class_count
            )));
        }
        let logits = self.expert_logits(x)?;
        let p = softmax(&mix_logits(&logits, r));
        Ok(-(p[y.0].max(PROBABILITY_FLOOR)).ln())
    }

    /// Loss and gradient from a single pass; the shared expert logits make
    /// the pair no more expensive than the gradient alone.
    pub fn loss_and_grad_raw(
        &self,
        x: &ModelInput,
        r: &[f64],
        y: Label,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_weights(r)?;
        if y.0 >= self.class_count {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                y.0, self.class_count
            )));
        }
        let logits = self.expert_logits(x)?;
        let p = softmax(&mix_logits(&logits, r));
        let loss = -(p[y.0].max(PROBABILITY_FLOOR)).ln();
        let grad = (0..self.experts.len())
            .map(|j| {
                (0..self.class_count)
                    .map(|c| (p[c] - if c == y.0 { 1.0 } else { 0.0 }) * logits[j][c])
                    .sum()
            })
            .collect();
        Ok((loss, grad))
    }
}

/// The trained router: initial routing weights via `softmax(R x + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Router {
    weight: Vec<f64>,
    bias: Vec<f64>,
    feature_dim: usize,
}

impl Router {
    pub fn new(weight: Vec<f64>, bias: Vec<f64>, feature_dim: usize) -> Result<Self> {
        let expert_count = bias.len();
        if expert_count < 2 {
            return Err(Error::invalid(format!(
                "router needs at least 2 experts, got {expert_count}"
            )));
        }
        if weight.len() != expert_count * feature_dim {
            return Err(Error::invalid(format!(
                "router weight has {} entries, expected {}",
                weight.len(),
                expert_count * feature_dim
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("router parameters must be finite"));
        }
        Ok(Router {
            weight,
            bias,
            feature_dim,
        })
    }

    pub fn expert_count(&self) -> usize {
        self.bias.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Initial routing weights for an input.
    pub fn route(&self, x: &ModelInput) -> Result<RoutingWeights> {
        if x.features.len() != self.feature_dim {
            return Err(Error::invalid(format!(
                "input has {} features, router expects {}",
                x.features.len(),
                self.feature_dim
            )));
        }
        let logits: Vec<f64> = (0..self.bias.len())
            .map(|e| {
                let row = &self.weight[e * self.feature_dim..(e + 1) * self.feature_dim];
                self.bias[e] + dot(row, &x.features)
            })
            .collect();
        RoutingWeights::new(softmax(&logits))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax; the result is renormalized so it sums to 1
/// at working precision.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn mix_logits(logits: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let class_count = logits[0].len();
    let mut mixed = vec![0.0; class_count];
    for (j, z) in logits.iter().enumerate() {
        for c in 0..class_count {
            mixed[c] += r[j] * z[c];
        }
    }
    mixed
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_stream, RngStream, Seed};
    use crate::simplex;
    use num::{BigRational, FromPrimitive, ToPrimitive};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_bank(rng: &mut RngStream, e: usize, c: usize, d: usize, scale: f64) -> ExpertBank {
        let experts = (0..e)
            .map(|_| {
                let w: Vec<f64> = (0..c * d)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt())
                    .collect();
                let b: Vec<f64> = (0..c)
                    .map(|_| 0.5 * scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Expert::new(w, b, d).unwrap()
            })
            .collect();
        ExpertBank::new(experts, d).unwrap()
    }

    fn random_input(rng: &mut RngStream, d: usize) -> ModelInput {
        ModelInput::new(
            (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
            0,
        )
        .unwrap()
    }

    fn random_simplex(rng: &mut RngStream, n: usize) -> RoutingWeights {
        let e: Vec<f64> = (0..n)
            .map(|_| -(rng.random::<f64>().max(1e-12)).ln())
            .collect();
        let s: f64 = e.iter().sum();
        simplex::project(&e.iter().map(|x| x / s).collect::<Vec<_>>()).unwrap()
    }

    /// Independently coded reference: mix logits with explicit loops, then
    /// an explicitly written softmax without the shared helper.
    fn forward_oracle(bank: &ExpertBank, x: &ModelInput, r: &[f64]) -> Vec<f64> {
        let d = bank.feature_dim();
        let c_n = bank.class_count();
        let mut mixed = vec![0.0; c_n];
        for (j, expert) in bank.experts().iter().enumerate() {
            for (c, m) in mixed.iter_mut().enumerate() {
                let mut z = expert.bias()[c];
                for k in 0..d {
                    z += expert.weight()[c * d + k] * x.features[k];
                }
                *m += r[j] * z;
            }
        }
        let m = mixed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = mixed.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = out.iter().sum();
        for p in &mut out {
            *p /= s;
        }
        out
    }

    #[test]
    fn expert_logits_at_origin_are_biases() {
        let mut rng = rng_stream(Seed(31), 0);
        let bank = random_bank(&mut rng, 3, 4, 5, 2.0);
        let x = ModelInput::new(vec![0.0; 5], 0).unwrap();
        let logits = bank.expert_logits(&x).unwrap();
        for (j, z) in logits.iter().enumerate() {
            assert_eq!(z.as_slice(), bank.experts()[j].bias());
        }
    }

    #[test]
    fn expert_logits_identity_map() {
        // W = I, b = 0 reproduces the input.
        let w = vec![1.0, 0.0, 0.0, 1.0];
        let experts = vec![
            Expert::new(w.clone(), vec![0.0, 0.0], 2).unwrap(),
            Expert::new(w, vec![0.0, 0.0], 2).unwrap(),
        ];
        let bank = ExpertBank::new(experts, 2).unwrap();
        let x = ModelInput::new(vec![1.0, 2.0], 0).unwrap();
        let logits = bank.expert_logits(&x).unwrap();
        assert_eq!(logits[0], vec![1.0, 2.0]);
    }

    #[test]
    fn expert_logits_match_exact_rational_arithmetic() {
        let mut rng = rng_stream(Seed(32), 0);
        let bank = random_bank(&mut rng, 4, 3, 8, 3.0);
        for _ in 0..50 {
            let x = random_input(&mut rng, 8);
            let logits = bank.expert_logits(&x).unwrap();
            for (j, expert) in bank.experts().iter().enumerate() {
                for (c, &got) in logits[j].iter().enumerate() {
                    let mut acc = BigRational::from_f64(expert.bias()[c]).unwrap();
                    for k in 0..8 {
                        acc += BigRational::from_f64(expert.weight()[c * 8 + k]).unwrap()
                            * BigRational::from_f64(x.features[k]).unwrap();
                    }
                    let want = acc.to_f64().unwrap();
                    assert!(
                        (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                        "expert {j} class {c}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn expert_logits_reject_dimension_mismatch() {
        let mut rng = rng_stream(Seed(33), 0);
        let bank = random_bank(&mut rng, 2, 2, 4, 1.0);
        let x = ModelInput::new(vec![0.0; 3], 0).unwrap();
        assert!(bank.expert_logits(&x).is_err());
    }

    #[test]
    fn forward_at_simplex_vertex_uses_single_expert() {
        let mut rng = rng_stream(Seed(34), 0);
        let bank = random_bank(&mut rng, 3, 4, 6, 2.0);
        let x = random_input(&mut rng, 6);
        let r = RoutingWeights::one_hot(3, 1).unwrap();
        let p = bank.forward(&x, &r).unwrap();
        let logits = bank.expert_logits(&x).unwrap();
        let want = softmax(&logits[1]);
        for (a, b) in p.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_with_identical_experts_ignores_weights() {
        let mut rng = rng_stream(Seed(35), 0);
        let proto = random_bank(&mut rng, 2, 3, 4, 2.0);
        let e = proto.experts()[0].clone();
        let bank = ExpertBank::new(vec![e.clone(), e], 4).unwrap();
        let x = random_input(&mut rng, 4);
        let p1 = bank
            .forward(&x, &RoutingWeights::new(vec![0.3, 0.7]).unwrap())
            .unwrap();
        let p2 = bank
            .forward(&x, &RoutingWeights::one_hot(2, 0).unwrap())
            .unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_reimplementation_oracle() {
        let mut rng = rng_stream(Seed(36), 0);
        for _ in 0..200 {
            let bank = random_bank(&mut rng, 5, 4, 7, 4.0);
            let x = random_input(&mut rng, 7);
            let r = random_simplex(&mut rng, 5);
            let got = bank.forward(&x, &r).unwrap();
            let want = forward_oracle(&bank, &x, r.as_slice());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
            let sum: f64 = got.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn forward_is_shift_invariant_in_logits() {
        let mut rng = rng_stream(Seed(37), 0);
        let bank = random_bank(&mut rng, 3, 4, 5, 2.0);
        let shifted_experts: Vec<Expert> = bank
            .experts()
            .iter()
            .map(|e| {
                let bias: Vec<f64> = e.bias().iter().map(|b| b + 11.25).collect();
                Expert::new(e.weight().to_vec(), bias, 5).unwrap()
            })
            .collect();
        let shifted = ExpertBank::new(shifted_experts, 5).unwrap();
        let x = random_input(&mut rng, 5);
        let r = random_simplex(&mut rng, 3);
        let p1 = bank.forward(&x, &r).unwrap();
        let p2 = shifted.forward(&x, &r).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_matches_argmax_oracle() {
        let mut rng = rng_stream(Seed(38), 0);
        for _ in 0..200 {
            let bank = random_bank(&mut rng, 4, 5, 6, 3.0);
            let x = random_input(&mut rng, 6);
            let r = random_simplex(&mut rng, 4);
            let p = bank.forward(&x, &r).unwrap();
            let mut best = 0;
            for c in 1..p.len() {
                if p[c] > p[best] {
                    best = c;
                }
            }
            assert_eq!(bank.predict(&x, &r).unwrap(), Label(best));
        }
    }

    #[test]
    fn predict_breaks_ties_toward_lower_class() {
        // All-zero parameters give exactly uniform probabilities.
        let experts = vec![
            Expert::new(vec![0.0; 6], vec![0.0, 0.0], 3).unwrap(),
            Expert::new(vec![0.0; 6], vec![0.0, 0.0], 3).unwrap(),
        ];
        let bank = ExpertBank::new(experts, 3).unwrap();
        let x = ModelInput::new(vec![1.0, 2.0, 3.0], 0).unwrap();
        let r = RoutingWeights::uniform(2).unwrap();
        assert_eq!(bank.predict(&x, &r).unwrap(), Label(0));
    }

    #[test]
    fn loss_is_zero_at_saturated_correct_prediction() {
        let experts = vec![
            Expert::new(vec![0.0; 8], vec![800.0, 0.0, 0.0, 0.0], 2).unwrap(),
            Expert::new(vec![0.0; 8], vec![800.0, 0.0, 0.0, 0.0], 2).unwrap(),
        ];
        let bank = ExpertBank::new(experts, 2).unwrap();
        let x = ModelInput::new(vec![0.0, 0.0], 0).unwrap();
        let r = RoutingWeights::uniform(2).unwrap();
        assert_eq!(bank.loss(&x, &r, Label(0)).unwrap(), 0.0);
    }

    #[test]
    fn loss_of_uniform_prediction_is_log_class_count() {
        let experts = vec![
            Expert::new(vec![0.0; 8], vec![0.0; 4], 2).unwrap(),
            Expert::new(vec![0.0; 8], vec![0.0; 4], 2).unwrap(),
        ];
        let bank = ExpertBank::new(experts, 2).unwrap();
        let x = ModelInput::new(vec![1.0, -1.0], 0).unwrap();
        let r = RoutingWeights::uniform(2).unwrap();
        let loss = bank.loss(&x, &r, Label(2)).unwrap();
        assert!((loss - (4.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_is_clamped_under_saturation() {
        let experts = vec![
            Expert::new(vec![0.0; 8], vec![800.0, 0.0, 0.0, 0.0], 2).unwrap(),
            Expert::new(vec![0.0; 8], vec![800.0, 0.0, 0.0, 0.0], 2).unwrap(),
        ];
        let bank = ExpertBank::new(experts, 2).unwrap();
        let x = ModelInput::new(vec![0.0, 0.0], 0).unwrap();
        let r = RoutingWeights::uniform(2).unwrap();
        let loss = bank.loss(&x, &r, Label(1)).unwrap();
        assert!(loss.is_finite());
        assert_eq!(loss, -(PROBABILITY_FLOOR).ln());
    }

    #[test]
    fn loss_matches_reimplementation_oracle() {
        let mut rng = rng_stream(Seed(39), 0);
        for _ in 0..200 {
            let bank = random_bank(&mut rng, 4, 4, 5, 3.0);
            let x = random_input(&mut rng, 5);
            let r = random_simplex(&mut rng, 4);
            let y = Label(rng.random_range(0..4));
            let got = bank.loss(&x, &r, y).unwrap();
            let p = forward_oracle(&bank, &x, r.as_slice());
            let want = -(p[y.0].max(1e-300)).ln();
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_is_zero_at_saturated_fit() {
        let experts = vec![
            Expert::new(vec![0.0; 8], vec![800.0, 0.0, 0.0, 0.0], 2).unwrap(),
            Expert::new(vec![0.0; 8], vec![800.0, 0.0, 0.0, 0.0], 2).unwrap(),
        ];
        let bank = ExpertBank::new(experts, 2).unwrap();
        let x = ModelInput::new(vec![0.0, 0.0], 0).unwrap();
        let r = RoutingWeights::uniform(2).unwrap();
        let g = bank.loss_grad_r(&x, &r, Label(0)).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn identical_experts_get_identical_gradient_components() {
        let mut rng = rng_stream(Seed(40), 0);
        let proto = random_bank(&mut rng, 2, 3, 4, 2.0);
        let e = proto.experts()[0].clone();
        let bank = ExpertBank::new(vec![e.clone(), e], 4).unwrap();
        let x = random_input(&mut rng, 4);
        let r = RoutingWeights::new(vec![0.2, 0.8]).unwrap();
        let g = bank.loss_grad_r(&x, &r, Label(1)).unwrap();
        assert!((g[0] - g[1]).abs() < 1e-12);
    }

    /// Central finite differences with h = 1e-6, compared at 1e-5 relative
    /// tolerance (denominator floored at 1 so near-zero components compare
    /// absolutely).
    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = rng_stream(Seed(41), 0);
        let h = 1e-6;
        for _ in 0..1000 {
            let e = rng.random_range(2..=6usize);
            let c = rng.random_range(2..=5usize);
            let d = rng.random_range(2..=16usize);
            let bank = random_bank(&mut rng, e, c, d, 6.0);
            let x = random_input(&mut rng, d);
            let r = random_simplex(&mut rng, e);
            let y = Label(rng.random_range(0..c));
            let g = bank.loss_grad_r(&x, &r, y).unwrap();
            for j in 0..e {
                let mut plus = r.as_slice().to_vec();
                plus[j] += h;
                let mut minus = r.as_slice().to_vec();
                minus[j] -= h;
                let fd = (bank.loss_raw(&x, &plus, y).unwrap()
                    - bank.loss_raw(&x, &minus, y).unwrap())
                    / (2.0 * h);
                let denom = g[j].abs().max(fd.abs()).max(1.0);
                assert!(
                    (g[j] - fd).abs() / denom <= 1e-5,
                    "component {j}: analytic {} vs fd {fd}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn loss_is_midpoint_convex_in_routing_weights() {
        let mut rng = rng_stream(Seed(42), 0);
        for _ in 0..500 {
            let bank = random_bank(&mut rng, 4, 4, 6, 5.0);
            let x = random_input(&mut rng, 6);
            let y = Label(rng.random_range(0..4));
            let a = random_simplex(&mut rng, 4);
            let b = random_simplex(&mut rng, 4);
            let mid = simplex::interpolate(&a, &b, 0.5).unwrap();
            let lm = bank.loss(&x, &mid, y).unwrap();
            let la = bank.loss(&x, &a, y).unwrap();
            let lb = bank.loss(&x, &b, y).unwrap();
            assert!(lm <= 0.5 * (la + lb) + 1e-9, "midpoint {lm} vs {la}, {lb}");
        }
    }

    #[test]
    fn route_of_zero_router_is_uniform() {
        let router = Router::new(vec![0.0; 12], vec![0.0; 4], 3).unwrap();
        let x = ModelInput::new(vec![1.0, -2.0, 0.5], 0).unwrap();
        let w = router.route(&x).unwrap();
        for &v in w.as_slice() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn route_saturates_with_large_bias() {
        let router = Router::new(vec![0.0; 8], vec![100.0, 0.0, 0.0, 0.0], 2).unwrap();
        let x = ModelInput::new(vec![0.3, 0.3], 0).unwrap();
        let w = router.route(&x).unwrap();
        assert!(w.as_slice()[0] > 1.0 - 1e-9);
    }

    #[test]
    fn route_matches_reimplementation_oracle() {
        let mut rng = rng_stream(Seed(43), 0);
        for _ in 0..200 {
            let e = rng.random_range(2..=6usize);
            let d = rng.random_range(1..=8usize);
            let weight: Vec<f64> = (0..e * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let bias: Vec<f64> = (0..e).map(|_| rng.random_range(-2.0..2.0)).collect();
            let router = Router::new(weight.clone(), bias.clone(), d).unwrap();
            let x = random_input(&mut rng, d);
            let got = router.route(&x).unwrap();
            let mut logits = vec![0.0; e];
            for j in 0..e {
                logits[j] = bias[j];
                for k in 0..d {
                    logits[j] += weight[j * d + k] * x.features[k];
                }
            }
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
            let s: f64 = exps.iter().sum();
            for (a, b) in got.as_slice().iter().zip(exps.iter().map(|v| v / s)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn route_rejects_dimension_mismatch() {
        let router = Router::new(vec![0.0; 8], vec![0.0; 4], 2).unwrap();
        let x = ModelInput::new(vec![1.0], 0).unwrap();
        assert!(router.route(&x).is_err());
    }
}
