//! Latent-factor watch-count generator.
//!
//! Users and items get standard normal factors; an item also gets a
//! popularity offset. A pair's affinity is
//! `a_ui = x_u . y_i / sqrt(F) + pop_i` and its watch count is
//! `Poisson(exp(sharpness * a_ui + base))`, with `base` chosen by bisection
//! so that the expected share of non-zero pairs equals the requested
//! density.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::data::InteractionTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub factors: usize,
    /// Expected fraction of (user, item) pairs with a non-zero count.
    pub density: f64,
    pub seed: u64,
    /// Scale of the affinity inside the Poisson rate.
    pub sharpness: f64,
    /// Standard deviation of the item popularity offsets.
    pub popularity_spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 500,
            items: 200,
            factors: 4,
            density: 0.1,
            seed: 0,
            sharpness: 3.0,
            popularity_spread: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.factors == 0 {
            return Err(Error::validation("factor count must be positive"));
        }
        if !(0.0..1.0).contains(&self.density) {
            return Err(Error::validation(format!("density {} outside [0, 1)", self.density)));
        }
        if !(self.sharpness.is_finite() && self.sharpness >= 0.0) {
            return Err(Error::validation("sharpness must be finite and >= 0"));
        }
        if !(self.popularity_spread.is_finite() && self.popularity_spread >= 0.0) {
            return Err(Error::validation("popularity spread must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Generated counts plus the planted affinities (`U x M`).
#[derive(Debug, Clone)]
pub struct SynthData {
    pub table: InteractionTable,
    pub affinity: Array2<f64>,
}

/// Draws a dataset. User ids are `u<index>`, item ids `i<index>`; only
/// pairs with a positive count are stored.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let (nu, nm, f) = (config.users, config.items, config.factors);
    let mut rng = crate::seeded_rng(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let xs = Array2::from_shape_simple_fn((nu, f), || normal.sample(&mut rng));
    let ys = Array2::from_shape_simple_fn((nm, f), || normal.sample(&mut rng));
    let pop: Vec<f64> = (0..nm)
        .map(|_| config.popularity_spread * normal.sample(&mut rng))
        .collect();

    let mut affinity = xs.dot(&ys.t()) / (f as f64).sqrt();
    for mut row in affinity.rows_mut() {
        for (a, p) in row.iter_mut().zip(&pop) {
            *a += p;
        }
    }

    let mut triples: Vec<(String, String, u64)> = Vec::new();
    if config.density > 0.0 && nu > 0 && nm > 0 {
        let scaled: Vec<f64> = affinity.iter().map(|a| config.sharpness * a).collect();
        let base = calibrate_base(&scaled, config.density);
        for u in 0..nu {
            for i in 0..nm {
                let rate = (scaled[u * nm + i] + base).exp();
                let count = sample_poisson(&mut rng, rate);
                if count > 0 {
                    triples.push((format!("u{u}"), format!("i{i}"), count));
                }
            }
        }
    }
    let table = InteractionTable::from_triples(triples.iter().map(|(u, i, c)| (u.as_str(), i.as_str(), *c)));
    Ok(SynthData { table, affinity })
}

fn sample_poisson<R: Rng>(rng: &mut R, rate: f64) -> u64 {
    if rate <= 0.0 || !rate.is_finite() {
        return 0;
    }
    Poisson::new(rate).expect("positive finite rate").sample(rng) as u64
}

/// Finds `base` with `mean_k (1 - exp(-exp(s_k + base))) = density`.
fn calibrate_base(scaled: &[f64], density: f64) -> f64 {
    let share = |base: f64| scaled.iter().map(|s| -(-(s + base).exp()).exp_m1()).sum::<f64>() / scaled.len() as f64;
    let (mut lo, mut hi) = (-60.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if share(mid) < density {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
