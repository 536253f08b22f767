//! Confidence-weighted matrix factorization solved by alternating least
//! squares.
//!
//! Minimises
//!
//! ```text
//! sum_{u,i} c_ui (t_ui - x_u . y_i)^2 + lambda (sum_u |x_u|^2 + sum_i |y_i|^2)
//! ```
//!
//! with `t` and `c` taken from relative ratings exactly as for the neural
//! model. Every unobserved pair has `c = 1`, so each row solve uses a shared
//! Gram matrix plus a correction from the row's observed entries only.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::data::RelativeRatingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImfConfig {
    pub alpha: f64,
    pub factors: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ImfConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            factors: 256,
            lambda: 0.1,
            iterations: 15,
            seed: 0,
        }
    }
}

impl ImfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::validation(format!(
                "alpha {} must be finite and >= 0",
                self.alpha
            )));
        }
        if self.factors == 0 {
            return Err(Error::validation("factor count must be positive"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::validation(format!(
                "lambda {} must be positive for the normal equations to be solvable",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be positive"));
        }
        Ok(())
    }
}

/// User factors `x` (`U x F`) and item factors `y` (`M x F`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImfModel {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub lambda: f64,
    pub alpha: f64,
}

impl ImfModel {
    /// Item factors uniform on `[-0.01, 0.01]`, user factors zero (they are
    /// solved first).
    pub fn init(users: usize, items: usize, config: &ImfConfig) -> Self {
        let mut rng = crate::seeded_rng(config.seed);
        let y = Array2::from_shape_simple_fn((items, config.factors), || (2.0 * rng.random::<f64>() - 1.0) * 0.01);
        Self {
            x: Array2::zeros((users, config.factors)),
            y,
            lambda: config.lambda,
            alpha: config.alpha,
        }
    }

    pub fn n_users(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.y.nrows()
    }

    pub fn factors(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.ncols() != self.y.ncols() || self.x.ncols() == 0 {
            return Err(Error::validation("user and item factors disagree on F or F = 0"));
        }
        if !self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
            || !self.lambda.is_finite()
            || !self.alpha.is_finite()
        {
            return Err(Error::validation("non-finite factor or hyperparameter"));
        }
        Ok(())
    }

    /// Re-solves every user row with item factors fixed.
    pub fn solve_users(&mut self, table: &RelativeRatingTable) {
        self.x = solve_side(table.rows(), self.y.view(), self.lambda, self.alpha);
    }

    /// Re-solves every item row with user factors fixed.
    pub fn solve_items(&mut self, table: &RelativeRatingTable) {
        let cols = table.columns();
        self.y = solve_side(&cols, self.x.view(), self.lambda, self.alpha);
    }

    /// The weighted objective, using `sum_all p^2 = <X'X, Y'Y>` plus sparse
    /// corrections for observed pairs.
    pub fn objective(&self, table: &RelativeRatingTable) -> f64 {
        let xtx = self.x.t().dot(&self.x);
        let yty = self.y.t().dot(&self.y);
        let mut total: f64 = (&xtx * &yty).sum();
        for (u, row) in table.rows().iter().enumerate() {
            let xu = self.x.row(u);
            for &(i, r) in row {
                let p = xu.dot(&self.y.row(i));
                let c = 1.0 + self.alpha * r;
                total += c * (1.0 - p) * (1.0 - p) - p * p;
            }
        }
        let norms = self.x.iter().chain(self.y.iter()).map(|v| v * v).sum::<f64>();
        total + self.lambda * norms
    }
}

/// Solves `(G + lambda I + sum_obs (c - 1) f f') z = sum_obs c f` for every
/// row, where `G = F'F` over the fixed side.
fn solve_side(rows: &[Vec<(usize, f64)>], fixed: ArrayView2<f64>, lambda: f64, alpha: f64) -> Array2<f64> {
    let k = fixed.ncols();
    let gram = fixed.t().dot(&fixed);
    let mut base = DMatrix::<f64>::from_fn(k, k, |r, c| gram[[r, c]]);
    for j in 0..k {
        base[(j, j)] += lambda;
    }
    let solved: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|row| {
            let mut lhs = base.clone();
            let mut rhs = DVector::<f64>::zeros(k);
            for &(idx, r) in row {
                let c = 1.0 + alpha * r;
                let f = fixed.row(idx);
                for p in 0..k {
                    rhs[p] += c * f[p];
                    let fp = (c - 1.0) * f[p];
                    for q in 0..k {
                        lhs[(p, q)] += fp * f[q];
                    }
                }
            }
            let chol = lhs
                .cholesky()
                .expect("lambda > 0 keeps the normal equations positive definite");
            chol.solve(&rhs).iter().copied().collect()
        })
        .collect();
    let mut out = Array2::zeros((rows.len(), k));
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(solved) {
        dst.assign(&ndarray::Array1::from(src));
    }
    out
}

/// Alternates user and item solves for `config.iterations` rounds and returns
/// the model with the objective after every round.
pub fn imf_train(train: &RelativeRatingTable, config: &ImfConfig) -> Result<(ImfModel, Vec<f64>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::validation("training table is empty"));
    }
    let mut model = ImfModel::init(train.n_users(), train.n_items(), config);
    let mut trace = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        model.solve_users(train);
        model.solve_items(train);
        let obj = model.objective(train);
        log::debug!("imf iteration {}: objective {obj:.6}", it + 1);
        trace.push(obj);
    }
    Ok((model, trace))
}

/// Raw inner-product scores `Y x_u` for every item.
pub fn imf_predict(model: &ImfModel, user: usize) -> Vec<f64> {
    assert!(user < model.n_users(), "user {user} out of range");
    model.y.dot(&model.x.row(user)).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::IdIndex;
    use ndarray::array;

    fn table(rows: Vec<Vec<(usize, f64)>>, items: usize) -> RelativeRatingTable {
        let users = IdIndex::from_ids((0..rows.len()).map(|u| format!("u{u}")));
        let items = IdIndex::from_ids((0..items).map(|i| format!("i{i}")));
        RelativeRatingTable::from_rows(users, items, rows).unwrap()
    }

    #[test]
    fn predict_is_inner_product() {
        let model = ImfModel {
            x: array![[2.0], [0.0]],
            y: array![[1.0], [-1.0]],
            lambda: 0.1,
            alpha: 1.0,
        };
        assert_eq!(imf_predict(&model, 0), vec![2.0, -2.0]);
        assert_eq!(imf_predict(&model, 1), vec![0.0, 0.0]);
    }

    #[test]
    #[should_panic]
    fn predict_out_of_range_panics() {
        let model = ImfModel {
            x: array![[1.0]],
            y: array![[1.0]],
            lambda: 0.1,
            alpha: 1.0,
        };
        imf_predict(&model, 3);
    }

    #[test]
    fn unwatched_item_with_zero_alpha_gets_zero_factors() {
        let t = table(vec![vec![(0, 0.5)], vec![(0, 1.0)]], 2);
        let cfg = ImfConfig {
            alpha: 0.0,
            factors: 3,
            iterations: 2,
            ..ImfConfig::default()
        };
        let (model, _) = imf_train(&t, &cfg).unwrap();
        assert!(model.y.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_zero_lambda_and_empty_table() {
        let t = table(vec![vec![(0, 0.5)]], 1);
        let cfg = ImfConfig {
            lambda: 0.0,
            ..ImfConfig::default()
        };
        assert!(matches!(imf_train(&t, &cfg), Err(Error::Validation(_))));
        let empty = table(vec![vec![]], 1);
        assert!(imf_train(&empty, &ImfConfig::default()).is_err());
    }

    #[test]
    fn objective_trace_decreases() {
        let rows = vec![
            vec![(0, 1.0), (2, 0.5)],
            vec![(1, 0.5), (2, 1.0)],
            vec![(0, 0.5), (3, 1.0)],
        ];
        let t = table(rows, 4);
        let cfg = ImfConfig {
            alpha: 5.0,
            factors: 2,
            iterations: 8,
            ..ImfConfig::default()
        };
        let (_, trace) = imf_train(&t, &cfg).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{trace:?}");
        }
    }
}
