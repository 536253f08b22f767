//! The autoregressive like-vector model.
//!
//! A user's like vector `t` is modelled item by item under an ordering of
//! the items. The hidden state after a prefix of the ordering is
//!
//! ```text
//! h = g(b + sum_{j in prefix, t_j = 1} c_j W[:, j] + sum_{j in prefix, t_j = 0} c_j A[:, j])
//! ```
//!
//! and the next item is liked with probability `sigmoid(d_i + V[i, :] . h)`.
//! Training minimises the confidence-weighted negative log-likelihood of the
//! items after a random split point, all sharing the prefix hidden state.

use ndarray::{Array1, Array2, Zip};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::UserFeedback;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPSILON, 1 - EPSILON]` before any log.
pub const EPSILON: f64 = 1e-12;

/// `logit(1 - EPSILON)`; clamping the logit to this bound is the same
/// as clamping the probability.
fn logit_limit() -> f64 {
    ((1.0 - EPSILON) / EPSILON).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(format!("unknown activation '{other}' (expected tanh or identity)")),
        }
    }
}

/// Model parameters. `w` and `a` are `H x M`, `v` is `M x H`, `b` has
/// length `H` and `d` length `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct NadeModel {
    /// Like-path input connections.
    pub w: Array2<f64>,
    /// Dislike-path input connections.
    pub a: Array2<f64>,
    /// Output connections.
    pub v: Array2<f64>,
    /// Hidden bias.
    pub b: Array1<f64>,
    /// Output bias.
    pub d: Array1<f64>,
    pub activation: Activation,
}

impl NadeModel {
    /// `w`, `a`, `v` uniform on `[-init_scale, init_scale]` (drawn in that
    /// order, row-major), biases zero.
    pub fn init(items: usize, hidden: usize, activation: Activation, seed: u64, init_scale: f64) -> Self {
        assert!(
            items >= 1 && hidden >= 1,
            "model needs at least one item and one hidden unit"
        );
        let mut rng = crate::seeded_rng(seed);
        let mut draw =
            |rows, cols| Array2::from_shape_simple_fn((rows, cols), || (2.0 * rng.random::<f64>() - 1.0) * init_scale);
        let w = draw(hidden, items);
        let a = draw(hidden, items);
        let v = draw(items, hidden);
        Self {
            w,
            a,
            v,
            b: Array1::zeros(hidden),
            d: Array1::zeros(items),
            activation,
        }
    }

    pub fn zeros(items: usize, hidden: usize, activation: Activation) -> Self {
        Self::init(items, hidden, activation, 0, 0.0)
    }

    pub fn n_items(&self) -> usize {
        self.d.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.b.len()
    }

    /// Checks shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let (m, h) = (self.n_items(), self.n_hidden());
        if m == 0 || h == 0 {
            return Err(Error::validation("model has zero items or hidden units"));
        }
        if self.w.dim() != (h, m) || self.a.dim() != (h, m) || self.v.dim() != (m, h) {
            return Err(Error::validation(format!(
                "inconsistent shapes: W {:?}, A {:?}, V {:?}, b {}, d {}",
                self.w.dim(),
                self.a.dim(),
                self.v.dim(),
                h,
                m
            )));
        }
        let finite = |x: &f64| x.is_finite();
        if !(self.w.iter().all(finite)
            && self.a.iter().all(finite)
            && self.v.iter().all(finite)
            && self.b.iter().all(finite)
            && self.d.iter().all(finite))
        {
            return Err(Error::validation("model has non-finite parameters"));
        }
        Ok(())
    }

    fn check_feedback(&self, feedback: &UserFeedback) {
        assert_eq!(
            feedback.len(),
            self.n_items(),
            "feedback covers {} items, model {}",
            feedback.len(),
            self.n_items()
        );
    }

    /// Adds `c_j` times the like or dislike column of `item` to `acc`.
    fn accumulate_input(&self, acc: &mut Array1<f64>, feedback: &UserFeedback, item: usize) {
        let c = feedback.confidence(item);
        let column = if feedback.like(item) {
            self.w.column(item)
        } else {
            self.a.column(item)
        };
        acc.scaled_add(c, &column);
    }

    /// Hidden pre-activation after conditioning on `items`.
    pub fn pre_activation(&self, feedback: &UserFeedback, items: &[usize]) -> Array1<f64> {
        self.check_feedback(feedback);
        let mut acc = self.b.clone();
        for &j in items {
            self.accumulate_input(&mut acc, feedback, j);
        }
        acc
    }

    /// Hidden state after conditioning on an arbitrary set of items. With
    /// every item in `items` this is the prediction-time hidden state.
    pub fn hidden_for_items(&self, feedback: &UserFeedback, items: &[usize]) -> Array1<f64> {
        let act = self.activation;
        self.pre_activation(feedback, items).mapv_into(|x| act.apply(x))
    }

    /// Hidden state for the input part of `ordering`.
    pub fn hidden_prefix(&self, feedback: &UserFeedback, ordering: &ItemOrdering) -> Array1<f64> {
        assert_eq!(ordering.len(), self.n_items(), "ordering does not match model size");
        self.hidden_for_items(feedback, ordering.prefix())
    }

    /// Unclamped output logit `d_i + V[i, :] . h`.
    pub fn logit(&self, h: &Array1<f64>, item: usize) -> f64 {
        assert_eq!(h.len(), self.n_hidden(), "hidden vector has wrong length");
        self.d[item] + self.v.row(item).dot(h)
    }

    /// `P(t_item = 1 | h)`, clamped to `[EPSILON, 1 - EPSILON]`.
    pub fn conditional(&self, h: &Array1<f64>, item: usize) -> f64 {
        clamped_probability(self.logit(h, item))
    }

    /// Hidden state conditioned on the whole feedback vector.
    pub fn hidden_full(&self, feedback: &UserFeedback) -> Array1<f64> {
        self.check_feedback(feedback);
        let all: Vec<usize> = (0..self.n_items()).collect();
        self.hidden_for_items(feedback, &all)
    }

    /// Output logits for every item given the full feedback vector.
    pub fn logits_all(&self, feedback: &UserFeedback) -> Array1<f64> {
        let h = self.hidden_full(feedback);
        &self.d + &self.v.dot(&h)
    }

    /// Like probabilities for every item given the full feedback vector.
    pub fn predict_all(&self, feedback: &UserFeedback) -> Vec<f64> {
        self.logits_all(feedback)
            .iter()
            .map(|&z| clamped_probability(z))
            .collect()
    }

    /// Weighted negative log-likelihood of the whole like vector under
    /// `perm`, each item conditioned on the ones before it.
    pub fn full_nll(&self, feedback: &UserFeedback, perm: &[usize]) -> f64 {
        self.check_feedback(feedback);
        assert!(is_permutation(perm, self.n_items()), "not a permutation of the items");
        let mut pre = self.b.clone();
        let mut total = 0.0;
        for &item in perm {
            let h = pre.mapv(|x| self.activation.apply(x));
            let z = clamp_logit(self.logit(&h, item));
            total += feedback.confidence(item) * neg_log_prob(z, feedback.like(item));
            self.accumulate_input(&mut pre, feedback, item);
        }
        total
    }

    /// Ordered loss and its exact gradient:
    ///
    /// `C = M / (M - i + 1) * sum_{j >= i} -c_{o_j} log p(t_{o_j} | o_{<i})`
    ///
    /// where `i` is the ordering's split. Weight decay is not included.
    pub fn ordered_loss_grad(&self, feedback: &UserFeedback, ordering: &ItemOrdering) -> LossGrad {
        let mut grads = Gradients::zeros(self.n_items(), self.n_hidden());
        let value = self.accumulate_loss_grad(feedback, ordering, &mut grads);
        LossGrad { value, grads }
    }

    /// Adds the ordered-loss gradient into `grads` and returns the loss.
    pub fn accumulate_loss_grad(&self, feedback: &UserFeedback, ordering: &ItemOrdering, grads: &mut Gradients) -> f64 {
        let m = self.n_items();
        assert_eq!(ordering.len(), m, "ordering does not match model size");
        assert_eq!(grads.d.len(), m, "gradient buffer does not match model");
        assert_eq!(grads.b.len(), self.n_hidden(), "gradient buffer does not match model");
        let prefix = ordering.prefix();
        let targets = ordering.targets();
        let scale = m as f64 / targets.len() as f64;

        let h = self.hidden_for_items(feedback, prefix);
        let mut dh = Array1::<f64>::zeros(self.n_hidden());
        let mut loss = 0.0;
        let limit = logit_limit();
        for &item in targets {
            let z = self.logit(&h, item);
            let liked = feedback.like(item);
            let c = feedback.confidence(item);
            loss += c * neg_log_prob(clamp_logit(z), liked);
            if z.abs() >= limit {
                // clamped region: the loss is flat in z
                continue;
            }
            let dz = scale * c * (sigmoid(z) - if liked { 1.0 } else { 0.0 });
            grads.d[item] += dz;
            grads.v.row_mut(item).scaled_add(dz, &h);
            dh.scaled_add(dz, &self.v.row(item));
        }

        let act = self.activation;
        let mut dpre = dh;
        Zip::from(&mut dpre)
            .and(&h)
            .for_each(|g, &y| *g *= act.derivative_from_output(y));
        grads.b += &dpre;
        for &j in prefix {
            let c = feedback.confidence(j);
            let mut column = if feedback.like(j) {
                grads.w.column_mut(j)
            } else {
                grads.a.column_mut(j)
            };
            column.scaled_add(c, &dpre);
        }
        scale * loss
    }

    /// Applies `theta -= lr * (grad + decay * theta)` with decay on the
    /// connection matrices only.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64, weight_decay: f64) {
        let step = |param: &mut Array2<f64>, grad: &Array2<f64>| {
            Zip::from(param).and(grad).for_each(|p, &g| {
                *p -= learning_rate * (g + weight_decay * *p);
            });
        };
        step(&mut self.w, &grads.w);
        step(&mut self.a, &grads.a);
        step(&mut self.v, &grads.v);
        self.b.scaled_add(-learning_rate, &grads.b);
        self.d.scaled_add(-learning_rate, &grads.d);
    }
}

/// Gradient buffers with the same shapes as [`NadeModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Array2<f64>,
    pub a: Array2<f64>,
    pub v: Array2<f64>,
    pub b: Array1<f64>,
    pub d: Array1<f64>,
}

impl Gradients {
    pub fn zeros(items: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((hidden, items)),
            a: Array2::zeros((hidden, items)),
            v: Array2::zeros((items, hidden)),
            b: Array1::zeros(hidden),
            d: Array1::zeros(items),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.w += &other.w;
        self.a += &other.a;
        self.v += &other.v;
        self.b += &other.b;
        self.d += &other.d;
    }

    pub fn scale(&mut self, factor: f64) {
        self.w *= factor;
        self.a *= factor;
        self.v *= factor;
        self.b *= factor;
        self.d *= factor;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grads: Gradients,
}

/// A permutation of the items together with a 1-based split point: the
/// first `split - 1` items are input, the rest are prediction targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemOrdering {
    perm: Vec<usize>,
    split: usize,
}

impl ItemOrdering {
    pub fn new(perm: Vec<usize>, split: usize) -> Result<Self> {
        let m = perm.len();
        if !is_permutation(&perm, m) {
            return Err(Error::validation("ordering is not a permutation of 0..M"));
        }
        if split < 1 || split > m {
            return Err(Error::validation(format!("split {split} outside 1..={m}")));
        }
        Ok(Self { perm, split })
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn prefix(&self) -> &[usize] {
        &self.perm[..self.split - 1]
    }

    pub fn targets(&self) -> &[usize] {
        &self.perm[self.split - 1..]
    }
}

/// A uniform random permutation (shuffled first) and a uniform split in
/// `1..=items`.
pub fn sample_ordering<R: Rng + ?Sized>(items: usize, rng: &mut R) -> ItemOrdering {
    assert!(items >= 1, "cannot order zero items");
    let mut perm: Vec<usize> = (0..items).collect();
    perm.shuffle(rng);
    let split = rng.random_range(1..=items);
    ItemOrdering { perm, split }
}

fn is_permutation(perm: &[usize], m: usize) -> bool {
    if perm.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    for &i in perm {
        if i >= m || std::mem::replace(&mut seen[i], true) {
            return false;
        }
    }
    true
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clamped_probability(z: f64) -> f64 {
    sigmoid(z).clamp(EPSILON, 1.0 - EPSILON)
}

fn clamp_logit(z: f64) -> f64 {
    let limit = logit_limit();
    z.clamp(-limit, limit)
}

/// `-log p(t)` for logit `z`, via a stable softplus.
fn neg_log_prob(z: f64, liked: bool) -> f64 {
    let x = if liked { -z } else { z };
    softplus(x)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Row sums of a matrix, i.e. `matrix . 1`.
pub fn row_sums(matrix: &Array2<f64>) -> Array1<f64> {
    matrix.sum_axis(ndarray::Axis(1))
}
