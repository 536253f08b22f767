//! Watch-log ingestion, relative ratings, like/confidence vectors and
//! hold-out splits.
//!
//! All tables keep one sparse row per user, sorted by item index. Ids are
//! mapped to contiguous indices in first-appearance order.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layout of a watch log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    /// `user_id,item_id`: one line per complete watch.
    EventPerLine,
    /// `user_id,item_id,count`: counts already summed.
    PreAggregated,
}

/// Bijection between opaque string ids and `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdIndex {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl IdIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = Self::new();
        for id in ids {
            index.get_or_insert(&id.into());
        }
        index
    }

    pub fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&idx) = self.lookup.get(id) {
            return idx;
        }
        let idx = self.ids.len();
        self.ids.push(id.to_owned());
        self.lookup.insert(id.to_owned(), idx);
        idx
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Aggregated watch counts. Stored counts are strictly positive; an absent
/// entry means the user never watched the item.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionTable {
    pub users: IdIndex,
    pub items: IdIndex,
    rows: Vec<Vec<(usize, u64)>>,
}

impl InteractionTable {
    /// Builds a table from `(user, item, count)` triples, summing duplicates
    /// and dropping zero counts after registering their ids.
    pub fn from_triples<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, u64)>,
    {
        let mut builder = TableBuilder::default();
        for (user, item, count) in triples {
            builder.add(user, item, count);
        }
        builder.finish()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn row(&self, user: usize) -> &[(usize, u64)] {
        &self.rows[user]
    }

    pub fn rows(&self) -> &[Vec<(usize, u64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn count(&self, user: usize, item: usize) -> u64 {
        lookup(&self.rows[user], item).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// Writes the pre-aggregated `user_id,item_id,count` format.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for (user, row) in self.rows.iter().enumerate() {
            for &(item, count) in row {
                writeln!(out, "{},{},{}", self.users.id(user), self.items.id(item), count)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Default)]
struct TableBuilder {
    users: IdIndex,
    items: IdIndex,
    rows: Vec<HashMap<usize, u64>>,
}

impl TableBuilder {
    fn add(&mut self, user: &str, item: &str, count: u64) {
        let u = self.users.get_or_insert(user);
        let i = self.items.get_or_insert(item);
        if u == self.rows.len() {
            self.rows.push(HashMap::new());
        }
        if count > 0 {
            *self.rows[u].entry(i).or_insert(0) += count;
        }
    }

    fn finish(self) -> InteractionTable {
        let rows = self
            .rows
            .into_iter()
            .map(|row| {
                let mut row: Vec<_> = row.into_iter().collect();
                row.sort_unstable_by_key(|&(i, _)| i);
                row
            })
            .collect();
        InteractionTable {
            users: self.users,
            items: self.items,
            rows,
        }
    }
}

fn lookup<T: Copy>(row: &[(usize, T)], item: usize) -> Option<T> {
    row.binary_search_by_key(&item, |&(i, _)| i).ok().map(|pos| row[pos].1)
}

/// Splits a data line into trimmed fields; `None` for blanks and comments.
fn fields(line: &str) -> Option<Vec<&str>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return None;
    }
    Some(line.split(',').map(str::trim).collect())
}

fn check_ids(lineno: usize, user: &str, item: &str) -> Result<()> {
    if user.is_empty() || item.is_empty() {
        return Err(Error::parse(lineno, "empty user or item id"));
    }
    Ok(())
}

/// Reads a watch log and aggregates it into per-user counts.
pub fn ingest<R: BufRead>(source: R, format: LogFormat) -> Result<InteractionTable> {
    let mut builder = TableBuilder::default();
    for (n, line) in source.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        let Some(f) = fields(&line) else { continue };
        match format {
            LogFormat::EventPerLine => {
                if f.len() != 2 {
                    return Err(Error::parse(
                        lineno,
                        format!("expected 'user_id,item_id', got {} fields", f.len()),
                    ));
                }
                check_ids(lineno, f[0], f[1])?;
                builder.add(f[0], f[1], 1);
            }
            LogFormat::PreAggregated => {
                if f.len() != 3 {
                    return Err(Error::parse(
                        lineno,
                        format!("expected 'user_id,item_id,count', got {} fields", f.len()),
                    ));
                }
                check_ids(lineno, f[0], f[1])?;
                let count = parse_count(lineno, f[2])?;
                builder.add(f[0], f[1], count);
            }
        }
    }
    Ok(builder.finish())
}

fn parse_count(lineno: usize, raw: &str) -> Result<u64> {
    if let Some(rest) = raw.strip_prefix('-') {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::validation(format!("line {lineno}: negative count {raw}")));
        }
    }
    if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::parse(lineno, format!("invalid count '{raw}'")));
    }
    raw.parse()
        .map_err(|_| Error::parse(lineno, format!("count '{raw}' out of range")))
}

/// Sparse real-valued ratings over the same id spaces as an
/// [`InteractionTable`]. Used both for relative ratings and for the held-out
/// half of a split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelativeRatingTable {
    pub users: IdIndex,
    pub items: IdIndex,
    rows: Vec<Vec<(usize, f64)>>,
}

impl RelativeRatingTable {
    /// Builds a table from per-user rows. Rows are sorted; zero entries are
    /// dropped; values must lie in `[0, 1]`.
    pub fn from_rows(users: IdIndex, items: IdIndex, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != users.len() {
            return Err(Error::validation(format!(
                "{} rows for {} users",
                rows.len(),
                users.len()
            )));
        }
        let m = items.len();
        let mut clean = Vec::with_capacity(rows.len());
        for mut row in rows {
            for &(item, value) in &row {
                if item >= m {
                    return Err(Error::validation(format!("item index {item} out of range")));
                }
                check_rating(value)?;
            }
            row.retain(|&(_, v)| v > 0.0);
            row.sort_unstable_by_key(|&(i, _)| i);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::validation("duplicate item in a row"));
            }
            clean.push(row);
        }
        Ok(Self {
            users,
            items,
            rows: clean,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn row(&self, user: usize) -> &[(usize, f64)] {
        &self.rows[user]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    pub fn get(&self, user: usize, item: usize) -> f64 {
        lookup(&self.rows[user], item).unwrap_or(0.0)
    }

    /// Per-item lists of `(user, value)`, users ascending.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_items()];
        for (u, row) in self.rows.iter().enumerate() {
            for &(i, v) in row {
                cols[i].push((u, v));
            }
        }
        cols
    }

    /// Writes `user_id,item_id,relative_rating`. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for (user, row) in self.rows.iter().enumerate() {
            for &(item, value) in row {
                writeln!(out, "{},{},{}", self.users.id(user), self.items.id(item), value)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the `user_id,item_id,relative_rating` format. A rating of `0`
    /// registers the ids without storing an entry.
    pub fn read_from<R: BufRead>(source: R) -> Result<Self> {
        Self::read_with_index(source, IdIndex::new(), IdIndex::new())
    }

    /// Like [`read_from`](Self::read_from), but extends existing id maps so
    /// that a second file (a test half) shares indices with the first.
    pub fn read_with_index<R: BufRead>(source: R, users: IdIndex, items: IdIndex) -> Result<Self> {
        let mut users = users;
        let mut items = items;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); users.len()];
        for (n, line) in source.lines().enumerate() {
            let lineno = n + 1;
            let line = line?;
            let Some(f) = fields(&line) else { continue };
            if f.len() != 3 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 'user_id,item_id,rating', got {} fields", f.len()),
                ));
            }
            check_ids(lineno, f[0], f[1])?;
            let value: f64 = f[2]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid rating '{}'", f[2])))?;
            check_rating(value).map_err(|e| Error::validation(format!("line {lineno}: {e}")))?;
            let u = users.get_or_insert(f[0]);
            let i = items.get_or_insert(f[1]);
            if u == rows.len() {
                rows.push(Vec::new());
            }
            if value > 0.0 {
                rows[u].push((i, value));
            }
        }
        Self::from_rows(users, items, rows)
    }
}

fn check_rating(value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::validation(format!("rating {value} outside [0, 1]")));
    }
    Ok(())
}

/// Converts raw counts into per-item percentiles: the share of an item's
/// watchers whose count is at most this user's count (the user included).
pub fn relative_ratings(table: &InteractionTable) -> Result<RelativeRatingTable> {
    if table.is_empty() {
        return Err(Error::validation("interaction table is empty"));
    }
    let mut columns: Vec<Vec<(usize, u64)>> = vec![Vec::new(); table.n_items()];
    for (u, row) in table.rows().iter().enumerate() {
        for &(i, c) in row {
            columns[i].push((u, c));
        }
    }
    // Items are independent; collect keeps item order.
    let rated: Vec<Vec<(usize, f64)>> = columns
        .par_iter()
        .map(|col| {
            let mut sorted: Vec<u64> = col.iter().map(|&(_, c)| c).collect();
            sorted.sort_unstable();
            let n = sorted.len() as f64;
            col.iter()
                .map(|&(u, c)| {
                    let at_most = sorted.partition_point(|&x| x <= c);
                    (u, at_most as f64 / n)
                })
                .collect()
        })
        .collect();
    let mut rows = vec![Vec::new(); table.n_users()];
    for (i, col) in rated.into_iter().enumerate() {
        for (u, r) in col {
            rows[u].push((i, r));
        }
    }
    RelativeRatingTable::from_rows(table.users.clone(), table.items.clone(), rows)
}

/// One user's like vector `t`, confidence vector `c` and the observed
/// (liked) items.
#[derive(Debug, Clone, PartialEq)]
pub struct UserFeedback {
    likes: Vec<bool>,
    confidences: Vec<f64>,
    observed: Vec<usize>,
}

impl UserFeedback {
    /// Confidences must be finite and at least 1.
    pub fn new(likes: Vec<bool>, confidences: Vec<f64>) -> Result<Self> {
        if likes.len() != confidences.len() {
            return Err(Error::validation(format!(
                "{} likes but {} confidences",
                likes.len(),
                confidences.len()
            )));
        }
        if let Some(c) = confidences.iter().find(|c| !(c.is_finite() && **c >= 1.0)) {
            return Err(Error::validation(format!("confidence {c} is not a finite value >= 1")));
        }
        let observed = likes.iter().enumerate().filter_map(|(i, &t)| t.then_some(i)).collect();
        Ok(Self {
            likes,
            confidences,
            observed,
        })
    }

    /// No likes, unit confidence everywhere.
    pub fn cold(items: usize) -> Self {
        Self {
            likes: vec![false; items],
            confidences: vec![1.0; items],
            observed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.likes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.likes.is_empty()
    }

    pub fn likes(&self) -> &[bool] {
        &self.likes
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn like(&self, item: usize) -> bool {
        self.likes[item]
    }

    pub fn confidence(&self, item: usize) -> f64 {
        self.confidences[item]
    }

    /// Applies `perm` to item positions: entry `k` of the result is entry
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let likes = perm.iter().map(|&i| self.likes[i]).collect();
        let confidences = perm.iter().map(|&i| self.confidences[i]).collect();
        Self::new(likes, confidences).expect("permuting valid feedback")
    }
}

/// Binarizes a sparse rating row and attaches confidences `1 + alpha * r`.
pub fn build_feedback(ratings: &[(usize, f64)], alpha: f64, item_count: usize) -> Result<UserFeedback> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::validation(format!("alpha {alpha} must be finite and >= 0")));
    }
    let mut likes = vec![false; item_count];
    let mut confidences = vec![1.0; item_count];
    for &(item, r) in ratings {
        check_rating(r)?;
        if item >= item_count {
            return Err(Error::validation(format!("item index {item} outside 0..{item_count}")));
        }
        likes[item] = r > 0.0;
        confidences[item] = 1.0 + alpha * r;
    }
    UserFeedback::new(likes, confidences)
}

/// Feedback vectors for every user of a table.
pub fn feedback_rows(table: &RelativeRatingTable, alpha: f64) -> Result<Vec<UserFeedback>> {
    table
        .rows()
        .iter()
        .map(|row| build_feedback(row, alpha, table.n_items()))
        .collect()
}

/// Train/test halves sharing one pair of id maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: RelativeRatingTable,
    pub test: RelativeRatingTable,
    pub fraction: f64,
    pub seed: u64,
}

/// Metadata written next to split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub fraction: f64,
    pub seed: u64,
    pub n_users: usize,
    pub n_items: usize,
    pub train_entries: usize,
    pub test_entries: usize,
}

impl SplitPair {
    pub fn meta(&self) -> SplitMeta {
        SplitMeta {
            fraction: self.fraction,
            seed: self.seed,
            n_users: self.train.n_users(),
            n_items: self.train.n_items(),
            train_entries: self.train.nnz(),
            test_entries: self.test.nnz(),
        }
    }

    /// Writes both halves. Held-out pairs also appear in the train file with
    /// rating `0`, so reading the train file alone reproduces the full id
    /// maps.
    pub fn write_to<W1: Write, W2: Write>(&self, mut train_out: W1, test_out: W2) -> Result<()> {
        let (users, items) = (&self.train.users, &self.train.items);
        for u in 0..users.len() {
            let mut merged: Vec<(usize, f64)> = self.train.row(u).to_vec();
            merged.extend(self.test.row(u).iter().map(|&(i, _)| (i, 0.0)));
            merged.sort_unstable_by_key(|&(i, _)| i);
            for (i, v) in merged {
                writeln!(train_out, "{},{},{}", users.id(u), items.id(i), v)?;
            }
        }
        train_out.flush()?;
        self.test.write_to(test_out)
    }

    /// Reads a pair written by [`write_to`](Self::write_to). Ids first seen
    /// in the test file are appended to the maps.
    pub fn read_from<R1: BufRead, R2: BufRead>(
        train_in: R1,
        test_in: R2,
    ) -> Result<(RelativeRatingTable, RelativeRatingTable)> {
        let train = RelativeRatingTable::read_from(train_in)?;
        let test = RelativeRatingTable::read_with_index(test_in, train.users.clone(), train.items.clone())?;
        let train = RelativeRatingTable::from_rows(
            test.users.clone(),
            test.items.clone(),
            pad_rows(train.rows, test.users.len()),
        )?;
        Ok((train, test))
    }
}

fn pad_rows(mut rows: Vec<Vec<(usize, f64)>>, n: usize) -> Vec<Vec<(usize, f64)>> {
    rows.resize(n, Vec::new());
    rows
}

/// Moves `ceil(fraction * n_u)` random entries of every user into the test
/// half. At least one entry per user stays in train, so users with a single
/// rating contribute nothing to test.
pub fn holdout_split(ratings: &RelativeRatingTable, fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::validation(format!("fraction {fraction} outside (0, 1)")));
    }
    let mut rng = crate::seeded_rng(seed);
    let mut train_rows = Vec::with_capacity(ratings.n_users());
    let mut test_rows = Vec::with_capacity(ratings.n_users());
    for row in ratings.rows() {
        let n = row.len();
        let held = if n < 2 {
            0
        } else {
            ((fraction * n as f64).ceil() as usize).min(n - 1)
        };
        let mut take = vec![false; n];
        for pos in rand::seq::index::sample(&mut rng, n, held) {
            take[pos] = true;
        }
        let (test, train): (Vec<_>, Vec<_>) = row.iter().zip(&take).partition(|(_, t)| **t);
        train_rows.push(train.into_iter().map(|(e, _)| *e).collect());
        test_rows.push(test.into_iter().map(|(e, _)| *e).collect());
    }
    Ok(SplitPair {
        train: RelativeRatingTable::from_rows(ratings.users.clone(), ratings.items.clone(), train_rows)?,
        test: RelativeRatingTable::from_rows(ratings.users.clone(), ratings.items.clone(), test_rows)?,
        fraction,
        seed,
    })
}
