#![allow(clippy::needless_range_loop)]

mod common;

use common::{naive_objective, naive_weighted_solve};
use implicit_nade::imf::{imf_predict, imf_train, ImfConfig, ImfModel};
use implicit_nade::{seeded_rng, IdIndex, RelativeRatingTable};
use ndarray::Array2;
use rand::Rng;

fn random_table<R: Rng>(rng: &mut R, users: usize, items: usize) -> RelativeRatingTable {
    let rows = (0..users)
        .map(|_| {
            (0..items)
                .filter_map(|i| {
                    if rng.random_bool(0.45) {
                        Some((i, rng.random_range(0.05..=1.0)))
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    RelativeRatingTable::from_rows(
        IdIndex::from_ids((0..users).map(|u| format!("u{u}"))),
        IdIndex::from_ids((0..items).map(|i| format!("i{i}"))),
        rows,
    )
    .unwrap()
}

/// Dense targets and confidences indexed `[user][item]`.
fn dense(table: &RelativeRatingTable, alpha: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (u, m) = (table.n_users(), table.n_items());
    let mut t = vec![vec![0.0; m]; u];
    let mut c = vec![vec![1.0; m]; u];
    for (user, row) in table.rows().iter().enumerate() {
        for &(i, r) in row {
            t[user][i] = 1.0;
            c[user][i] = 1.0 + alpha * r;
        }
    }
    (t, c)
}

fn rows_of(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn transpose(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..v[0].len()).map(|j| v.iter().map(|r| r[j]).collect()).collect()
}

fn random_model<R: Rng>(rng: &mut R, users: usize, items: usize, f: usize, alpha: f64) -> ImfModel {
    ImfModel {
        x: Array2::from_shape_simple_fn((users, f), || rng.random_range(-1.0..1.0)),
        y: Array2::from_shape_simple_fn((items, f), || rng.random_range(-1.0..1.0)),
        lambda: rng.random_range(0.01..1.0),
        alpha,
    }
}

#[test]
fn gram_solves_match_dense_solves() {
    let mut rng = seeded_rng(40);
    for _ in 0..20 {
        let (nu, nm, f) = (
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=4),
        );
        let alpha = rng.random_range(0.0..50.0);
        let table = random_table(&mut rng, nu, nm);
        let (t, c) = dense(&table, alpha);
        let mut model = random_model(&mut rng, nu, nm, f, alpha);

        let ys = rows_of(&model.y);
        model.solve_users(&table);
        for u in 0..nu {
            let want = naive_weighted_solve(&t[u], &c[u], &ys, model.lambda);
            for k in 0..f {
                assert!((model.x[[u, k]] - want[k]).abs() <= 1e-8, "user {u}");
            }
        }

        let xs = rows_of(&model.x);
        let (tt, ct) = (transpose(&t), transpose(&c));
        model.solve_items(&table);
        for i in 0..nm {
            let want = naive_weighted_solve(&tt[i], &ct[i], &xs, model.lambda);
            for k in 0..f {
                assert!((model.y[[i, k]] - want[k]).abs() <= 1e-8, "item {i}");
            }
        }

        let naive = naive_objective(&t, &c, &rows_of(&model.x), &rows_of(&model.y), model.lambda);
        let fast = model.objective(&table);
        assert!((naive - fast).abs() <= 1e-8 * naive.abs().max(1.0), "{naive} vs {fast}");
    }
}

#[test]
fn objective_never_rises_per_half_sweep() {
    let mut rng = seeded_rng(41);
    for _ in 0..20 {
        let (nu, nm, f) = (
            rng.random_range(2..=8),
            rng.random_range(2..=8),
            rng.random_range(1..=3),
        );
        let alpha = rng.random_range(0.0..100.0);
        let table = random_table(&mut rng, nu, nm);
        let mut model = random_model(&mut rng, nu, nm, f, alpha);
        let mut prev = model.objective(&table);
        for _ in 0..10 {
            model.solve_users(&table);
            let now = model.objective(&table);
            assert!(now <= prev + 1e-9, "user sweep raised {prev} -> {now}");
            prev = now;
            model.solve_items(&table);
            let now = model.objective(&table);
            assert!(now <= prev + 1e-9, "item sweep raised {prev} -> {now}");
            prev = now;
        }
    }
}

#[test]
fn two_by_two_scalar_solve() {
    // counts give ratings u0: (1.0, -), u1: (0.5, 1.0)
    let table = RelativeRatingTable::from_rows(
        IdIndex::from_ids(["a", "b"]),
        IdIndex::from_ids(["x", "y"]),
        vec![vec![(0, 1.0)], vec![(0, 0.5), (1, 1.0)]],
    )
    .unwrap();
    let cfg = ImfConfig {
        alpha: 2.0,
        factors: 1,
        lambda: 0.5,
        iterations: 1,
        seed: 13,
    };
    let init = ImfModel::init(2, 2, &cfg);
    let (y0, y1) = (init.y[[0, 0]], init.y[[1, 0]]);
    let c = [[3.0, 1.0], [2.0, 3.0]];
    let t = [[1.0, 0.0], [1.0, 1.0]];
    let y = [y0, y1];
    // (sum_i c y^2 + lambda) x = sum_i c t y
    let x: Vec<f64> = (0..2)
        .map(|u| {
            let num: f64 = (0..2).map(|i| c[u][i] * t[u][i] * y[i]).sum();
            let den: f64 = (0..2).map(|i| c[u][i] * y[i] * y[i]).sum::<f64>() + 0.5;
            num / den
        })
        .collect();
    let y_new: Vec<f64> = (0..2)
        .map(|i| {
            let num: f64 = (0..2).map(|u| c[u][i] * t[u][i] * x[u]).sum();
            let den: f64 = (0..2).map(|u| c[u][i] * x[u] * x[u]).sum::<f64>() + 0.5;
            num / den
        })
        .collect();

    let (model, trace) = imf_train(&table, &cfg).unwrap();
    assert_eq!(trace.len(), 1);
    for u in 0..2 {
        assert!((model.x[[u, 0]] - x[u]).abs() < 1e-12);
    }
    for i in 0..2 {
        assert!((model.y[[i, 0]] - y_new[i]).abs() < 1e-12);
    }
}

#[test]
fn zero_alpha_empty_column_gives_zero_item() {
    let table = RelativeRatingTable::from_rows(
        IdIndex::from_ids(["a", "b"]),
        IdIndex::from_ids(["x", "y", "z"]),
        vec![vec![(0, 0.4)], vec![(1, 1.0)]],
    )
    .unwrap();
    let cfg = ImfConfig {
        alpha: 0.0,
        factors: 3,
        iterations: 2,
        ..ImfConfig::default()
    };
    let (model, _) = imf_train(&table, &cfg).unwrap();
    assert!(model.y.row(2).iter().all(|&v| v == 0.0));
}

#[test]
fn training_is_deterministic_and_trace_falls() {
    let mut rng = seeded_rng(42);
    let table = random_table(&mut rng, 30, 20);
    let cfg = ImfConfig {
        alpha: 10.0,
        factors: 5,
        iterations: 8,
        seed: 3,
        ..ImfConfig::default()
    };
    let (a, ta) = imf_train(&table, &cfg).unwrap();
    let (b, tb) = imf_train(&table, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert!(ta.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{ta:?}");
}

#[test]
fn predictions_are_inner_products() {
    let model = ImfModel {
        x: ndarray::array![[2.0], [0.0]],
        y: ndarray::array![[1.0], [-1.0]],
        lambda: 0.1,
        alpha: 1.0,
    };
    assert_eq!(imf_predict(&model, 0), vec![2.0, -2.0]);
    assert_eq!(imf_predict(&model, 1), vec![0.0, 0.0]);
}
