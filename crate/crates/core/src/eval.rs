//! Percentile ranks and mean percentage ranking (MPR).
//!
//! For every user with held-out items, candidates are ranked by score; the
//! top candidate sits at 0% and the bottom one at 100%. MPR is the mean of
//! held-out percentiles weighted by the held-out relative ratings. A random
//! ranking has expected MPR 50%; lower is better.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_feedback, IdIndex, RelativeRatingTable, UserFeedback};
use crate::error::{Error, Result};

/// Percentiles of `targets` among `candidates`, ranked by `scores` (indexed
/// by item). Position `p` of `n` maps to `100 p / (n - 1)`; tied items get
/// the mean percentile of their block. A lone candidate is at 0%.
///
/// Panics if a target is not a candidate.
pub fn percentile_ranks(scores: &[f64], candidates: &[usize], targets: &[usize]) -> Vec<(usize, f64)> {
    let n = candidates.len();
    let mut ranked: Vec<usize> = candidates.to_vec();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let denom = n.saturating_sub(1).max(1) as f64;

    let mut percentile = std::collections::HashMap::with_capacity(targets.len());
    let wanted: std::collections::HashSet<usize> = targets.iter().copied().collect();
    let mut start = 0;
    while start < n {
        let s = scores[ranked[start]];
        let mut end = start;
        while end + 1 < n && scores[ranked[end + 1]].total_cmp(&s).is_eq() {
            end += 1;
        }
        let mean = 100.0 * (start + end) as f64 / 2.0 / denom;
        for &item in &ranked[start..=end] {
            if wanted.contains(&item) {
                percentile.insert(item, mean);
            }
        }
        start = end + 1;
    }
    targets
        .iter()
        .map(|&t| {
            let p = *percentile
                .get(&t)
                .unwrap_or_else(|| panic!("target item {t} is not a candidate"));
            (t, p)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Drop the user's training-observed items from the candidate list.
    pub exclude_train_items: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            exclude_train_items: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub user: usize,
    pub item: usize,
    pub percentile_rank: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub records: Vec<RankRecord>,
    pub mpr: f64,
    /// Users that contributed at least one record.
    pub n_users: usize,
    /// Users with held-out items but no candidates.
    pub n_skipped: usize,
}

/// Machine-readable report summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mpr: f64,
    pub n_users: usize,
    pub n_pairs: usize,
    pub n_skipped: usize,
}

impl RankResult {
    pub fn n_pairs(&self) -> usize {
        self.records.len()
    }

    pub fn summary(&self) -> EvalSummary {
        EvalSummary {
            mpr: self.mpr,
            n_users: self.n_users,
            n_pairs: self.n_pairs(),
            n_skipped: self.n_skipped,
        }
    }

    /// Writes `user_id,item_id,percentile_rank,weight` rows and an
    /// `MPR,<value>` footer.
    pub fn write_report<W: Write>(&self, users: &IdIndex, items: &IdIndex, mut out: W) -> Result<()> {
        writeln!(out, "user_id,item_id,percentile_rank,weight")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                users.id(r.user),
                items.id(r.item),
                r.percentile_rank,
                r.weight
            )?;
        }
        writeln!(out, "MPR,{}", self.mpr)?;
        out.flush()?;
        Ok(())
    }
}

/// A parsed report file.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<(String, String, f64, f64)>,
    pub mpr: f64,
}

pub fn read_report<R: BufRead>(source: R) -> Result<Report> {
    let mut rows = Vec::new();
    let mut mpr = None;
    for (n, line) in source.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        let f: Vec<&str> = line.trim().split(',').collect();
        if lineno == 1 && f.first() == Some(&"user_id") {
            continue;
        }
        if mpr.is_some() {
            return Err(Error::parse(lineno, "data after the MPR footer"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(lineno, format!("invalid number '{s}'")))
        };
        match f.as_slice() {
            ["MPR", v] => mpr = Some(num(v)?),
            [u, i, p, w] => rows.push((u.to_string(), i.to_string(), num(p)?, num(w)?)),
            _ => return Err(Error::parse(lineno, "expected 4 fields or the MPR footer")),
        }
    }
    let mpr = mpr.ok_or_else(|| Error::validation("report has no MPR footer"))?;
    Ok(Report { rows, mpr })
}

/// Evaluates `scorer` on the held-out half of a split.
///
/// For each user with held-out items the scorer receives the user index
/// and the feedback built from the user's training row at `alpha`; it must
/// return one score per item, higher meaning more preferred.
pub fn mpr<F>(
    scorer: F,
    train: &RelativeRatingTable,
    test: &RelativeRatingTable,
    alpha: f64,
    options: EvalOptions,
) -> Result<RankResult>
where
    F: Fn(usize, &UserFeedback) -> Vec<f64> + Sync,
{
    if test.is_empty() {
        return Err(Error::validation("test set is empty"));
    }
    if train.n_users() != test.n_users() || train.n_items() != test.n_items() {
        return Err(Error::validation("train and test tables use different id spaces"));
    }
    let m = train.n_items();
    let per_user: Vec<Result<Option<Vec<RankRecord>>>> = (0..test.n_users())
        .into_par_iter()
        .map(|u| {
            let held = test.row(u);
            if held.is_empty() {
                return Ok(Some(Vec::new()));
            }
            let fb = build_feedback(train.row(u), alpha, m)?;
            let candidates: Vec<usize> = if options.exclude_train_items {
                (0..m).filter(|&i| !fb.like(i)).collect()
            } else {
                (0..m).collect()
            };
            if candidates.is_empty() {
                return Ok(None);
            }
            let scores = scorer(u, &fb);
            assert_eq!(scores.len(), m, "scorer returned {} scores for {m} items", scores.len());
            let targets: Vec<usize> = held.iter().map(|&(i, _)| i).collect();
            let ranks = percentile_ranks(&scores, &candidates, &targets);
            Ok(Some(
                ranks
                    .into_iter()
                    .zip(held)
                    .map(|((item, percentile_rank), &(_, weight))| RankRecord {
                        user: u,
                        item,
                        percentile_rank,
                        weight,
                    })
                    .collect(),
            ))
        })
        .collect();

    let mut records = Vec::new();
    let (mut n_users, mut n_skipped) = (0, 0);
    for outcome in per_user {
        match outcome? {
            None => n_skipped += 1,
            Some(rs) if rs.is_empty() => {}
            Some(rs) => {
                n_users += 1;
                records.extend(rs);
            }
        }
    }
    if n_skipped > 0 {
        log::warn!("{n_skipped} users skipped: no candidate items");
    }
    if records.is_empty() {
        return Err(Error::validation("no held-out pair could be ranked"));
    }
    let mpr = weighted_mean(&records);
    Ok(RankResult {
        records,
        mpr,
        n_users,
        n_skipped,
    })
}

fn weighted_mean(records: &[RankRecord]) -> f64 {
    let (num, den) = records
        .iter()
        .fold((0.0, 0.0), |(n, d), r| (n + r.weight * r.percentile_rank, d + r.weight));
    num / den
}
