//! Structure search guided by a bounded table of visited DAGs.
//!
//! The search keeps one row per visited structure. A row stores the
//! structure's score and, per operation already tried from it, the score
//! benefit that operation produced (or a permanent "failed" mark when it
//! was inapplicable). Each iteration either explores a uniformly random
//! untried-or-known-good operation or greedily replays the best known
//! one; applying an operation records its benefit on the predecessor row
//! and the opposite benefit for the inverse operation on the successor
//! row. The table is trimmed to a length bound by evicting the worst
//! scored rows, never the best row or the row the cursor sits on, and
//! with probability theta per iteration the cursor jumps back to the
//! best row. The best structure ever visited is the answer.

use crate::data::{DataError, Dataset};
use crate::graph::{operation_count, reverse_of, CanonicalKey, Dag, Operation};
use crate::rng::Rng;
use crate::scoring::{ScoreError, ScoreKind, Scorer};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Benefits are stored sparsely: an absent entry means "untried", value
/// zero; `f64::NEG_INFINITY` means the operation failed from this
/// structure and is never chosen again. Exact zeros are not stored.
#[derive(Clone, Debug)]
pub struct QRow {
    dag: Dag,
    score: f64,
    stamp: u64,
    benefits: BTreeMap<u32, f64>,
}

impl QRow {
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// Insertion stamp; older rows have smaller stamps.
    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    /// Stored benefit of an operation id, zero when untried.
    pub fn benefit(&self, op_id: u32) -> f64 {
        self.benefits.get(&op_id).copied().unwrap_or(0.0)
    }

    pub fn is_masked(&self, op_id: u32) -> bool {
        self.benefits.get(&op_id) == Some(&f64::NEG_INFINITY)
    }

    /// Stored entries (finite and masked), ascending by operation id.
    pub fn stored(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.benefits.iter().map(|(&id, &v)| (id, v))
    }

    fn set_benefit(&mut self, op_id: u32, value: f64) {
        if value == 0.0 {
            self.benefits.remove(&op_id);
        } else {
            self.benefits.insert(op_id, value);
        }
    }
}

/// f64 ordered by `total_cmp`, for the eviction index.
#[derive(Clone, Copy, Debug, PartialEq)]
struct ScoreOrd(f64);

impl Eq for ScoreOrd {}

impl PartialOrd for ScoreOrd {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScoreOrd {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Bounded table of visited structures, keyed by canonical form.
pub struct QTable {
    n_nodes: usize,
    max_length: usize,
    rows: HashMap<CanonicalKey, QRow>,
    // Ascending (score, stamp): the front is the eviction candidate.
    by_score: BTreeSet<(ScoreOrd, u64, CanonicalKey)>,
    best: CanonicalKey,
    cursor: CanonicalKey,
    next_stamp: u64,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("every operation from this structure has already failed")]
pub struct AllOperationsMasked;

impl QTable {
    /// Table containing only `dag`, which becomes both best row and
    /// cursor.
    pub fn new(max_length: usize, dag: Dag, score: f64) -> Self {
        assert!(max_length >= 1, "the table must be allowed at least one row");
        let key = dag.canonical_key();
        let row = QRow { dag: dag.clone(), score, stamp: 0, benefits: BTreeMap::new() };
        let mut rows = HashMap::new();
        rows.insert(key.clone(), row);
        let mut by_score = BTreeSet::new();
        by_score.insert((ScoreOrd(score), 0, key.clone()));
        QTable {
            n_nodes: dag.n_nodes(),
            max_length,
            rows,
            by_score,
            best: key.clone(),
            cursor: key,
            next_stamp: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn contains(&self, key: &CanonicalKey) -> bool {
        self.rows.contains_key(key)
    }

    pub fn row(&self, key: &CanonicalKey) -> Option<&QRow> {
        self.rows.get(key)
    }

    pub fn best_key(&self) -> &CanonicalKey {
        &self.best
    }

    pub fn cursor_key(&self) -> &CanonicalKey {
        &self.cursor
    }

    pub fn best_score(&self) -> f64 {
        self.rows[&self.best].score
    }

    /// Rows in insertion order (ascending stamp).
    pub fn rows_by_stamp(&self) -> Vec<(&CanonicalKey, &QRow)> {
        let mut out: Vec<_> = self.rows.iter().collect();
        out.sort_by_key(|(_, r)| r.stamp);
        out
    }

    /// Insert a structure not yet present, with untried benefits.
    pub fn insert_row(&mut self, dag: Dag, score: f64) -> CanonicalKey {
        assert_eq!(dag.n_nodes(), self.n_nodes, "table rows share one node set");
        let key = dag.canonical_key();
        assert!(!self.rows.contains_key(&key), "row already present");
        let stamp = self.next_stamp;
        self.next_stamp += 1;
        self.rows.insert(key.clone(), QRow { dag, score, stamp, benefits: BTreeMap::new() });
        self.by_score.insert((ScoreOrd(score), stamp, key.clone()));
        if score > self.rows[&self.best].score {
            self.best = key.clone();
        }
        key
    }

    pub fn set_cursor(&mut self, key: CanonicalKey) {
        assert!(self.rows.contains_key(&key), "cursor must point at a stored row");
        self.cursor = key;
    }

    /// Record a successful application of `op`, which moved the search
    /// from `predecessor` to `successor` with score change `delta`: the
    /// predecessor learns `delta` for `op`, the successor learns `-delta`
    /// for the inverse operation. Revisits overwrite both entries.
    pub fn record_success(
        &mut self,
        predecessor: &CanonicalKey,
        op: Operation,
        successor: &CanonicalKey,
        delta: f64,
    ) {
        let id = op.id(self.n_nodes);
        let rid = reverse_of(op).id(self.n_nodes);
        self.rows
            .get_mut(predecessor)
            .expect("predecessor row present")
            .set_benefit(id, delta);
        self.rows
            .get_mut(successor)
            .expect("successor row present")
            .set_benefit(rid, -delta);
    }

    /// Permanently mark `op` as failed from the row at `key`.
    pub fn record_mask(&mut self, key: &CanonicalKey, op: Operation) {
        let id = op.id(self.n_nodes);
        self.rows.get_mut(key).expect("masked row present").benefits.insert(id, f64::NEG_INFINITY);
    }

    /// Trim to the length bound: while the table holds at least
    /// `max_length` rows, evict the worst-scored one (oldest first on
    /// ties), except that the best row and the cursor row are never
    /// evicted. Returns how many rows were removed.
    pub fn evict_worst(&mut self) -> usize {
        let mut evicted = 0;
        while self.rows.len() >= self.max_length {
            let candidate = self
                .by_score
                .iter()
                .find(|(_, _, k)| *k != self.best && *k != self.cursor)
                .cloned();
            match candidate {
                Some(entry) => {
                    self.rows.remove(&entry.2);
                    self.by_score.remove(&entry);
                    evicted += 1;
                }
                None => break,
            }
        }
        evicted
    }
}

fn masked_ids(row: &QRow) -> Vec<u32> {
    row.benefits
        .iter()
        .filter(|(_, &v)| v == f64::NEG_INFINITY)
        .map(|(&id, _)| id)
        .collect()
}

/// The r-th smallest id not in `excluded` (which is ascending).
fn rank_skip(r: u64, excluded: &[u32]) -> u32 {
    let mut id = r;
    for &m in excluded {
        if (m as u64) <= id {
            id += 1;
        } else {
            break;
        }
    }
    id as u32
}

/// Pick the next operation to try from a row. With probability
/// `explore_probability` the choice is uniform over all operations not
/// marked failed; otherwise it is greedy: the stored operation of maximal
/// benefit, except that when every stored benefit is negative and untried
/// operations remain, the choice is uniform over the untried ones (their
/// benefit, zero, is the maximum). Ties among stored maxima break
/// uniformly. Never returns a masked operation.
pub fn choose_operation(
    row: &QRow,
    rng: &mut Rng,
    explore_probability: f64,
) -> Result<Operation, AllOperationsMasked> {
    let n = row.dag.n_nodes();
    let total = operation_count(n);
    let masked = masked_ids(row);
    if masked.len() as u64 == total {
        return Err(AllOperationsMasked);
    }
    let coin = rng.next_f64();
    let id = if coin < explore_probability {
        let r = rng.below(total - masked.len() as u64);
        rank_skip(r, &masked)
    } else {
        let max_finite = row
            .benefits
            .values()
            .filter(|v| v.is_finite())
            .fold(None::<f64>, |acc, &v| Some(acc.map_or(v, |m| m.max(v))));
        let n_absent = total - row.benefits.len() as u64;
        if n_absent > 0 && max_finite.is_none_or(|m| m < 0.0) {
            // Untried operations (benefit zero) are the argmax.
            let stored: Vec<u32> = row.benefits.keys().copied().collect();
            let r = rng.below(n_absent);
            rank_skip(r, &stored)
        } else {
            let m = max_finite.expect("all-masked handled above");
            let candidates: Vec<u32> = row
                .benefits
                .iter()
                .filter(|(_, &v)| v == m)
                .map(|(&id, _)| id)
                .collect();
            candidates[rng.below(candidates.len() as u64) as usize]
        }
    };
    Ok(Operation::from_id(n, id))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_iter: u64,
    pub max_length: usize,
    /// Per-iteration probability that the cursor jumps to the best row.
    pub theta: f64,
    /// Probability that an iteration explores instead of being greedy.
    pub explore_probability: f64,
    pub score: ScoreKind,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_iter: 100_000,
            max_length: 500,
            theta: 0.01,
            explore_probability: 0.5,
            score: ScoreKind::Bic,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.max_length < 1 {
            return Err(SearchError::Config("max_length must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(SearchError::Config(format!("theta {} outside [0, 1]", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.explore_probability) {
            return Err(SearchError::Config(format!(
                "explore probability {} outside [0, 1]",
                self.explore_probability
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchCounters {
    /// Iterations whose chosen operation applied successfully.
    pub applied: u64,
    /// Iterations whose chosen operation was inapplicable and got masked.
    pub rejected: u64,
    /// Rows evicted by trimming.
    pub evictions: u64,
    /// Cursor jumps to the best row (the theta draws that fired).
    pub transfers: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub best_score: f64,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best_dag: Dag,
    pub best_score: f64,
    pub trace: Vec<TracePoint>,
    pub counters: SearchCounters,
}

/// Run the search on `data`. Equivalent to [`run_with_observer`] with an
/// observer that does nothing.
pub fn run(data: &Dataset, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    run_with_observer(data, config, |_, _| {})
}

/// Run the search, calling `observer(iteration, table)` at the end of
/// every iteration (after trimming and any cursor jump). The trace
/// records the best score so far at iteration 0, every
/// max(1, max_iter/1000) iterations, and at the final iteration.
pub fn run_with_observer<F: FnMut(u64, &QTable)>(
    data: &Dataset,
    config: &SearchConfig,
    mut observer: F,
) -> Result<SearchResult, SearchError> {
    config.validate()?;
    let n = data.n_vars();
    if n < 2 {
        return Err(SearchError::Config("structure search needs at least two variables".into()));
    }
    let mut scorer = Scorer::new(config.score, data);
    let empty = Dag::empty(n);
    let initial_score = scorer.total_score(&empty)?;
    let mut table = QTable::new(config.max_length, empty, initial_score);
    let mut rng = Rng::new(config.seed);
    let interval = (config.max_iter / 1000).max(1);
    let mut trace = vec![TracePoint { iteration: 0, best_score: initial_score }];
    let mut counters = SearchCounters::default();

    for iteration in 1..=config.max_iter {
        let cursor = table.cursor_key().clone();
        match choose_operation(table.row(&cursor).unwrap(), &mut rng, config.explore_probability) {
            Err(AllOperationsMasked) => {
                // Dead row: everything from here has failed. Restart from
                // the best structure instead of spinning.
                let best = table.best_key().clone();
                table.set_cursor(best);
            }
            Ok(op) => {
                let dag = table.row(&cursor).unwrap().dag().clone();
                if dag.is_applicable(op) {
                    let delta = match scorer.delta_score(&dag, op) {
                        Ok(d) => d,
                        Err(ScoreError::Data(e)) => return Err(e.into()),
                        Err(ScoreError::NotApplicable(_)) => {
                            unreachable!("applicability was checked")
                        }
                    };
                    let next = dag.apply(op).expect("applicability was checked");
                    let key = next.canonical_key();
                    if !table.contains(&key) {
                        let score = scorer.total_score(&next)?;
                        table.insert_row(next, score);
                    }
                    table.record_success(&cursor, op, &key, delta);
                    table.set_cursor(key);
                    counters.applied += 1;
                } else {
                    table.record_mask(&cursor, op);
                    counters.rejected += 1;
                }
            }
        }
        counters.evictions += table.evict_worst() as u64;
        if rng.next_f64() < config.theta {
            let best = table.best_key().clone();
            table.set_cursor(best);
            counters.transfers += 1;
        }
        if iteration % interval == 0 || iteration == config.max_iter {
            trace.push(TracePoint { iteration, best_score: table.best_score() });
        }
        observer(iteration, &table);
    }

    let best = table.row(table.best_key()).unwrap();
    Ok(SearchResult {
        best_dag: best.dag().clone(),
        best_score: best.score(),
        trace,
        counters,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RowSnapshot {
    pub key: String,
    pub score: f64,
    pub stamp: u64,
    /// Finite stored benefits, ascending by operation id.
    pub benefits: Vec<(u32, f64)>,
    /// Failed operation ids, ascending.
    pub masked: Vec<u32>,
}

/// JSON-friendly image of a table (failed marks are listed separately
/// because infinities do not survive JSON). Rows are in insertion order.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TableSnapshot {
    pub version: u32,
    pub n_nodes: usize,
    pub max_length: usize,
    pub next_stamp: u64,
    pub cursor: String,
    pub best: String,
    pub rows: Vec<RowSnapshot>,
}

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SnapshotError {
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("'{0}' is not a canonical key for this node count")]
    BadKey(String),
    #[error("snapshot is inconsistent: {0}")]
    Inconsistent(String),
}

impl QTable {
    pub fn snapshot(&self) -> TableSnapshot {
        let rows = self
            .rows_by_stamp()
            .into_iter()
            .map(|(key, row)| RowSnapshot {
                key: key.to_hex(),
                score: row.score,
                stamp: row.stamp,
                benefits: row.stored().filter(|(_, v)| v.is_finite()).collect(),
                masked: masked_ids(row),
            })
            .collect();
        TableSnapshot {
            version: SNAPSHOT_VERSION,
            n_nodes: self.n_nodes,
            max_length: self.max_length,
            next_stamp: self.next_stamp,
            cursor: self.cursor.to_hex(),
            best: self.best.to_hex(),
            rows,
        }
    }

    pub fn from_snapshot(snap: &TableSnapshot) -> Result<QTable, SnapshotError> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(snap.version));
        }
        if snap.rows.is_empty() {
            return Err(SnapshotError::Inconsistent("a table always has a row".into()));
        }
        let decode = |hex: &str| -> Result<(CanonicalKey, Dag), SnapshotError> {
            let key = CanonicalKey::from_hex(hex)
                .ok_or_else(|| SnapshotError::BadKey(hex.to_string()))?;
            let dag = Dag::from_canonical_key(snap.n_nodes, &key)
                .ok_or_else(|| SnapshotError::BadKey(hex.to_string()))?;
            Ok((key, dag))
        };
        let total = operation_count(snap.n_nodes);
        let mut rows = HashMap::new();
        let mut by_score = BTreeSet::new();
        for r in &snap.rows {
            let (key, dag) = decode(&r.key)?;
            let mut benefits = BTreeMap::new();
            for &(id, v) in &r.benefits {
                if id as u64 >= total || !v.is_finite() || v == 0.0 {
                    return Err(SnapshotError::Inconsistent(format!(
                        "row {} stores a bad benefit ({id}, {v})",
                        r.key
                    )));
                }
                if benefits.insert(id, v).is_some() {
                    return Err(SnapshotError::Inconsistent(format!(
                        "row {} stores operation {id} twice",
                        r.key
                    )));
                }
            }
            for &id in &r.masked {
                if id as u64 >= total {
                    return Err(SnapshotError::Inconsistent(format!(
                        "row {} masks unknown operation {id}",
                        r.key
                    )));
                }
                if benefits.insert(id, f64::NEG_INFINITY).is_some() {
                    return Err(SnapshotError::Inconsistent(format!(
                        "row {} both stores and masks operation {id}",
                        r.key
                    )));
                }
            }
            if r.stamp >= snap.next_stamp {
                return Err(SnapshotError::Inconsistent(format!(
                    "row {} has stamp {} beyond next_stamp {}",
                    r.key, r.stamp, snap.next_stamp
                )));
            }
            if !by_score.insert((ScoreOrd(r.score), r.stamp, key.clone())) {
                return Err(SnapshotError::Inconsistent(format!("duplicate stamp {}", r.stamp)));
            }
            if rows.insert(key, QRow { dag, score: r.score, stamp: r.stamp, benefits }).is_some() {
                return Err(SnapshotError::Inconsistent(format!("duplicate row {}", r.key)));
            }
        }
        let cursor = CanonicalKey::from_hex(&snap.cursor)
            .filter(|k| rows.contains_key(k))
            .ok_or_else(|| SnapshotError::Inconsistent("cursor points nowhere".into()))?;
        let best = CanonicalKey::from_hex(&snap.best)
            .filter(|k| rows.contains_key(k))
            .ok_or_else(|| SnapshotError::Inconsistent("best points nowhere".into()))?;
        let true_best = by_score.iter().next_back().map(|(_, _, k)| k.clone()).unwrap();
        if rows[&best].score < rows[&true_best].score {
            return Err(SnapshotError::Inconsistent("best row is not maximal".into()));
        }
        Ok(QTable {
            n_nodes: snap.n_nodes,
            max_length: snap.max_length,
            rows,
            by_score,
            best,
            cursor,
            next_stamp: snap.next_stamp,
        })
    }
}
