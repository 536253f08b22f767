//! Reference computations shared by the integration tests.
//!
//! Everything here is written with plain loops over scalars and does not
//! call the library's forward pass, loss or solvers, so it can serve as an
//! independent check on them.

#![allow(dead_code, clippy::needless_range_loop)]

use implicit_nade::model::{Activation, ItemOrdering, NadeModel};
use implicit_nade::{Gradients, UserFeedback};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Tanh => x.tanh(),
        Activation::Identity => x,
    }
}

/// Hidden state after conditioning on `items`, scalar by scalar.
pub fn ref_hidden(model: &NadeModel, fb: &UserFeedback, items: &[usize]) -> Vec<f64> {
    let h = model.n_hidden();
    (0..h)
        .map(|k| {
            let mut s = model.b[k];
            for &j in items {
                let c = fb.confidences()[j];
                if fb.likes()[j] {
                    s += c * model.w[[k, j]];
                } else {
                    s += c * model.a[[k, j]];
                }
            }
            act(model.activation, s)
        })
        .collect()
}

pub fn ref_prob(model: &NadeModel, hidden: &[f64], item: usize) -> f64 {
    let mut z = model.d[item];
    for (k, hk) in hidden.iter().enumerate() {
        z += model.v[[item, k]] * hk;
    }
    let p = 1.0 / (1.0 + (-z).exp());
    p.clamp(1e-12, 1.0 - 1e-12)
}

/// `M / (M - i + 1) * sum over targets of -c log p(t | prefix)`.
pub fn ref_ordered_loss(model: &NadeModel, fb: &UserFeedback, ord: &ItemOrdering) -> f64 {
    let m = model.n_items() as f64;
    let hidden = ref_hidden(model, fb, ord.prefix());
    let mut total = 0.0;
    for &j in ord.targets() {
        let p = ref_prob(model, &hidden, j);
        let pt = if fb.likes()[j] { p } else { 1.0 - p };
        total -= fb.confidences()[j] * pt.ln();
    }
    m / ord.targets().len() as f64 * total
}

/// Chain-rule weighted NLL, recomputing every prefix from scratch.
pub fn ref_full_nll(model: &NadeModel, fb: &UserFeedback, perm: &[usize]) -> f64 {
    let mut total = 0.0;
    for (pos, &j) in perm.iter().enumerate() {
        let hidden = ref_hidden(model, fb, &perm[..pos]);
        let p = ref_prob(model, &hidden, j);
        let pt = if fb.likes()[j] { p } else { 1.0 - p };
        total -= fb.confidences()[j] * pt.ln();
    }
    total
}

/// Every parameter as a mutable slice, in a fixed order.
pub fn param_slices(model: &mut NadeModel) -> Vec<(&'static str, &mut [f64])> {
    vec![
        ("W", model.w.as_slice_mut().unwrap()),
        ("A", model.a.as_slice_mut().unwrap()),
        ("V", model.v.as_slice_mut().unwrap()),
        ("b", model.b.as_slice_mut().unwrap()),
        ("d", model.d.as_slice_mut().unwrap()),
    ]
}

pub fn grad_slices(g: &Gradients) -> Vec<(&'static str, &[f64])> {
    vec![
        ("W", g.w.as_slice().unwrap()),
        ("A", g.a.as_slice().unwrap()),
        ("V", g.v.as_slice().unwrap()),
        ("b", g.b.as_slice().unwrap()),
        ("d", g.d.as_slice().unwrap()),
    ]
}

/// Central finite differences of `loss` with respect to every parameter,
/// laid out like [`grad_slices`].
pub fn fd_gradient<F>(model: &NadeModel, step: f64, loss: F) -> Vec<Vec<f64>>
where
    F: Fn(&NadeModel) -> f64,
{
    let mut probe = model.clone();
    let sizes: Vec<usize> = param_slices(&mut probe).iter().map(|(_, s)| s.len()).collect();
    let mut out = Vec::new();
    for (block, &n) in sizes.iter().enumerate() {
        let mut g = vec![0.0; n];
        for (idx, gi) in g.iter_mut().enumerate() {
            let orig = param_slices(&mut probe)[block].1[idx];
            param_slices(&mut probe)[block].1[idx] = orig + step;
            let up = loss(&probe);
            param_slices(&mut probe)[block].1[idx] = orig - step;
            let down = loss(&probe);
            param_slices(&mut probe)[block].1[idx] = orig;
            *gi = (up - down) / (2.0 * step);
        }
        out.push(g);
    }
    out
}

/// Five-point stencil, fourth order. With a larger step its roundoff is far
/// below that of [`fd_gradient`], so it can arbitrate coordinates that sit
/// under the central-difference noise floor.
pub fn fd5_gradient<F>(model: &NadeModel, step: f64, loss: F) -> Vec<Vec<f64>>
where
    F: Fn(&NadeModel) -> f64,
{
    let mut probe = model.clone();
    let sizes: Vec<usize> = param_slices(&mut probe).iter().map(|(_, s)| s.len()).collect();
    let mut out = Vec::new();
    for (block, &n) in sizes.iter().enumerate() {
        let mut g = vec![0.0; n];
        for (idx, gi) in g.iter_mut().enumerate() {
            let orig = param_slices(&mut probe)[block].1[idx];
            let mut at = |off: f64| {
                param_slices(&mut probe)[block].1[idx] = orig + off;
                loss(&probe)
            };
            let (p2, p1, m1, m2) = (at(2.0 * step), at(step), at(-step), at(-2.0 * step));
            param_slices(&mut probe)[block].1[idx] = orig;
            *gi = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * step);
        }
        out.push(g);
    }
    out
}

pub const FD5_STEP: f64 = 1e-3;

/// Outcome of comparing one analytic gradient against the numeric oracles.
pub struct GradCheck {
    /// Largest error seen (relative, or noise-floored as described below).
    pub worst: f64,
    pub coordinates: usize,
    /// Coordinates below the central-difference noise floor; these were also
    /// checked against the five-point stencil.
    pub floored: usize,
    pub failure: Option<String>,
}

/// Every coordinate must agree with central differences at [`FD_STEP`] to
/// relative error `tol`. Coordinates too small for central differences to
/// resolve must in addition agree with the five-point stencil to `tol`.
pub fn check_gradient_coords(model: &NadeModel, fb: &UserFeedback, ord: &ItemOrdering, tol: f64) -> GradCheck {
    let lg = model.ordered_loss_grad(fb, ord);
    let f = |m: &NadeModel| ref_ordered_loss(m, fb, ord);
    let central = fd_gradient(model, FD_STEP, f);
    let five = fd5_gradient(model, FD5_STEP, f);
    let floor = fd_noise(lg.value) / tol;
    let floor5 = 10.0 * f64::EPSILON * lg.value.abs().max(1.0) / FD5_STEP / tol;
    let mut out = GradCheck {
        worst: 0.0,
        coordinates: 0,
        floored: 0,
        failure: None,
    };
    for (((name, a), n), n5) in grad_slices(&lg.grads).into_iter().zip(&central).zip(&five) {
        for (k, ((&ai, &ni), &fi)) in a.iter().zip(n).zip(n5).enumerate() {
            out.coordinates += 1;
            let e = rel_err_floor(ai, ni, floor);
            let mut bad = e > tol;
            if ai.abs().max(ni.abs()) < floor {
                out.floored += 1;
                bad |= rel_err_floor(ai, fi, floor5) > tol;
            }
            out.worst = out.worst.max(e);
            if bad && out.failure.is_none() {
                out.failure = Some(format!(
                    "{name}[{k}]: analytic {ai:e}, central {ni:e}, five-point {fi:e}"
                ));
            }
        }
    }
    out
}

/// Absolute error a central difference with [`FD_STEP`] cannot resolve:
/// ten times its roundoff, `eps * |loss| / step`.
pub fn fd_noise(loss: f64) -> f64 {
    10.0 * f64::EPSILON * loss.abs().max(1.0) / FD_STEP
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn random_model<R: Rng>(rng: &mut R, m: usize, h: usize, scale: f64, activation: Activation) -> NadeModel {
    let mut model = NadeModel::zeros(m, h, activation);
    for (_, s) in param_slices(&mut model) {
        for x in s.iter_mut() {
            *x = (2.0 * rng.random::<f64>() - 1.0) * scale;
        }
    }
    model
}

/// Random likes; liked items get confidence in `[1, 1 + max_extra]`,
/// unliked ones 1 unless `noisy_unliked`.
pub fn random_feedback<R: Rng>(rng: &mut R, m: usize, max_extra: f64, noisy_unliked: bool) -> UserFeedback {
    let likes: Vec<bool> = (0..m).map(|_| rng.random_bool(0.4)).collect();
    let conf = likes
        .iter()
        .map(|&t| {
            if t || noisy_unliked {
                1.0 + max_extra * rng.random::<f64>()
            } else {
                1.0
            }
        })
        .collect();
    UserFeedback::new(likes, conf).unwrap()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Percentile of every stored count by direct double loop:
/// `#{v : count(v) <= count(u)} / #{v : count(v) > 0}` per item.
pub fn brute_relative(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    let users = counts.len();
    let items = counts.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; items]; users];
    for i in 0..items {
        for u in 0..users {
            let cu = counts[u][i];
            if cu == 0 {
                continue;
            }
            let mut watchers = 0usize;
            let mut at_most = 0usize;
            for v in 0..users {
                let cv = counts[v][i];
                if cv > 0 {
                    watchers += 1;
                    if cv <= cu {
                        at_most += 1;
                    }
                }
            }
            out[u][i] = at_most as f64 / watchers as f64;
        }
    }
    out
}

/// Dense weighted ridge solve for one row: sums over every column of the
/// other side explicitly, then Gaussian elimination with partial pivoting.
pub fn naive_weighted_solve(targets: &[f64], weights: &[f64], fixed: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let k = fixed[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (j, f) in fixed.iter().enumerate() {
        for p in 0..k {
            for q in 0..k {
                a[p][q] += weights[j] * f[p] * f[q];
            }
            a[p][k] += weights[j] * targets[j] * f[p];
        }
    }
    for p in 0..k {
        a[p][p] += lambda;
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for row in 0..k {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=k {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..k).map(|p| a[p][k] / a[p][p]).collect()
}

/// Objective of a factorization evaluated over every (user, item) pair.
pub fn naive_objective(t: &[Vec<f64>], c: &[Vec<f64>], x: &[Vec<f64>], y: &[Vec<f64>], lambda: f64) -> f64 {
    let mut total = 0.0;
    for (u, xu) in x.iter().enumerate() {
        for (i, yi) in y.iter().enumerate() {
            let p: f64 = xu.iter().zip(yi).map(|(a, b)| a * b).sum();
            total += c[u][i] * (t[u][i] - p).powi(2);
        }
    }
    let norms: f64 = x.iter().chain(y).flatten().map(|v| v * v).sum();
    total + lambda * norms
}
