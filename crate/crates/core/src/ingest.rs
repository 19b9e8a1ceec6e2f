//! Reshare event logs and their cascade-structured storage.
//!
//! Input is delimiter-separated text with a header naming the columns
//! `cascade_id`, `user_id`, `parent_user_id` and `timestamp` (any order, extra
//! columns ignored). An empty `parent_user_id` marks a cascade root. Lines
//! starting with `#` are comments.
//!
//! Node ids are opaque strings externally. Internally every id maps to a dense
//! index in `[0, N)`, assigned in lexicographic id order so the mapping does
//! not depend on row order. Cascades are kept sorted by id and each cascade's
//! events are sorted by timestamp, ties broken by input order.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::NodeIdx;

const NO_PARENT: NodeIdx = NodeIdx::MAX;

/// One raw row of an event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub cascade_id: String,
    pub user_id: String,
    pub parent_user_id: Option<String>,
    pub timestamp: i64,
}

/// A reshare event with interned node ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub user: NodeIdx,
    parent: NodeIdx,
    pub timestamp: i64,
}

impl Event {
    pub fn root(user: NodeIdx, timestamp: i64) -> Self {
        Event { user, parent: NO_PARENT, timestamp }
    }

    pub fn reshare(user: NodeIdx, parent: NodeIdx, timestamp: i64) -> Self {
        debug_assert_ne!(parent, NO_PARENT);
        Event { user, parent, timestamp }
    }

    #[inline]
    pub fn parent(&self) -> Option<NodeIdx> {
        (self.parent != NO_PARENT).then_some(self.parent)
    }

    #[inline]
    pub fn is_root(&self) -> bool {
        self.parent == NO_PARENT
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    pub id: String,
    pub events: Vec<Event>,
}

impl Cascade {
    /// Timestamp of the first root event, or of the earliest event when the
    /// cascade has no explicit root.
    pub fn root_time(&self) -> Option<i64> {
        self.events
            .iter()
            .find(|e| e.is_root())
            .or_else(|| self.events.first())
            .map(|e| e.timestamp)
    }

    /// The user of the first root event.
    pub fn seed(&self) -> Option<NodeIdx> {
        self.events.iter().find(|e| e.is_root()).map(|e| e.user)
    }

    /// Number of distinct users appearing in the cascade, as sharer or parent.
    pub fn participants(&self) -> usize {
        let mut seen = HashSet::with_capacity(self.events.len() + 1);
        for e in &self.events {
            seen.insert(e.user);
            if let Some(p) = e.parent() {
                seen.insert(p);
            }
        }
        seen.len()
    }

    /// Earliest timestamp at which each user shared in this cascade.
    pub(crate) fn first_share_times(&self) -> HashMap<NodeIdx, i64> {
        let mut first: HashMap<NodeIdx, i64> = HashMap::with_capacity(self.events.len());
        for e in &self.events {
            first
                .entry(e.user)
                .and_modify(|t| *t = (*t).min(e.timestamp))
                .or_insert(e.timestamp);
        }
        first
    }

    /// Whether a reshare happened no earlier than its parent's own share in
    /// this cascade. Parents with no event of their own are taken as consistent.
    pub(crate) fn is_time_consistent(e: &Event, first: &HashMap<NodeIdx, i64>) -> bool {
        match e.parent() {
            Some(p) => first.get(&p).is_none_or(|&tp| tp <= e.timestamp),
            None => true,
        }
    }
}

/// Bidirectional id <-> dense index mapping.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeTable {
    ids: Vec<String>,
    index: HashMap<String, NodeIdx>,
}

impl NodeTable {
    /// Builds a table from ids that must be strictly increasing.
    pub fn from_sorted(ids: Vec<String>) -> Result<Self> {
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("node ids must be unique and sorted"));
        }
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as NodeIdx))
            .collect();
        Ok(NodeTable { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, idx: NodeIdx) -> &str {
        &self.ids[idx as usize]
    }

    pub fn get(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Cascade-grouped events over a shared node table. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeStore {
    nodes: Arc<NodeTable>,
    cascades: Vec<Cascade>,
}

/// Row accounting from [`parse_events`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped_self_reshare: usize,
    pub dropped_bad_timestamp: usize,
    pub dropped_malformed: usize,
    pub dropped_duplicate: usize,
    /// Kept rows whose timestamp precedes their parent's share in the cascade.
    pub flagged_time_skew: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreSummary {
    pub n_cascades: usize,
    pub n_events: usize,
    pub n_users: usize,
    pub n_active_users: usize,
    pub time_range: Option<(i64, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
    Other(u8),
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
            Delimiter::Other(b) => b,
        }
    }

    /// Guesses from a file extension: `.tsv`/`.tab` are tab-separated.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => Delimiter::Tab,
            _ => Delimiter::Comma,
        }
    }
}

/// How [`split_periods`] places window boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodMode {
    #[default]
    EqualDuration,
    EqualCount,
}

impl std::str::FromStr for PeriodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal-duration" => Ok(PeriodMode::EqualDuration),
            "equal-count" => Ok(PeriodMode::EqualCount),
            _ => Err(Error::Unknown { kind: "period mode", name: s.to_owned() }),
        }
    }
}

impl CascadeStore {
    /// Assembles a store from already-interned cascades. Cascades are sorted by
    /// id and events stably sorted by timestamp.
    pub fn from_parts(nodes: Arc<NodeTable>, mut cascades: Vec<Cascade>) -> Result<Self> {
        let n = nodes.len() as NodeIdx;
        for c in &cascades {
            for e in &c.events {
                if e.user >= n || e.parent().is_some_and(|p| p >= n) {
                    return Err(Error::invalid(format!(
                        "cascade {} references a node outside the table",
                        c.id
                    )));
                }
            }
        }
        cascades.sort_by(|a, b| a.id.cmp(&b.id));
        if cascades.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::invalid("duplicate cascade id"));
        }
        for c in &mut cascades {
            c.events.sort_by_key(|e| e.timestamp);
        }
        Ok(CascadeStore { nodes, cascades })
    }

    /// Same node table, different cascades. Internal callers guarantee the
    /// store invariants.
    pub(crate) fn with_cascades(&self, cascades: Vec<Cascade>) -> Self {
        CascadeStore { nodes: Arc::clone(&self.nodes), cascades }
    }

    pub fn nodes(&self) -> &NodeTable {
        &self.nodes
    }

    pub fn node_table(&self) -> Arc<NodeTable> {
        Arc::clone(&self.nodes)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn cascades(&self) -> &[Cascade] {
        &self.cascades
    }

    pub fn n_cascades(&self) -> usize {
        self.cascades.len()
    }

    pub fn n_events(&self) -> usize {
        self.cascades.iter().map(|c| c.events.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cascades.is_empty()
    }

    pub fn time_range(&self) -> Option<(i64, i64)> {
        self.cascades
            .iter()
            .flat_map(|c| c.events.iter().map(|e| e.timestamp))
            .fold(None, |acc, t| match acc {
                None => Some((t, t)),
                Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
            })
    }

    pub fn summary(&self) -> StoreSummary {
        let mut active = vec![false; self.n_nodes()];
        for c in &self.cascades {
            for e in &c.events {
                active[e.user as usize] = true;
                if let Some(p) = e.parent() {
                    active[p as usize] = true;
                }
            }
        }
        StoreSummary {
            n_cascades: self.n_cascades(),
            n_events: self.n_events(),
            n_users: self.n_nodes(),
            n_active_users: active.iter().filter(|&&a| a).count(),
            time_range: self.time_range(),
        }
    }

    /// Iterates the store as raw records, cascade by cascade.
    pub fn records(&self) -> impl Iterator<Item = EventRecord> + '_ {
        self.cascades.iter().flat_map(move |c| {
            c.events.iter().map(move |e| EventRecord {
                cascade_id: c.id.clone(),
                user_id: self.nodes.id(e.user).to_owned(),
                parent_user_id: e.parent().map(|p| self.nodes.id(p).to_owned()),
                timestamp: e.timestamp,
            })
        })
    }
}

const COLUMNS: [&str; 4] = ["cascade_id", "user_id", "parent_user_id", "timestamp"];

/// Parses an event log. Invalid rows are dropped and counted; a missing
/// required column is fatal.
pub fn parse_events<R: Read>(source: R, delimiter: Delimiter) -> Result<(CascadeStore, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter.byte())
        .comment(Some(b'#'))
        .flexible(true)
        .has_headers(true)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let mut col = [0usize; 4];
    for (slot, name) in col.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(Error::MissingColumn(name))?;
    }

    let mut report = ParseReport::default();
    let mut user_ids: HashMap<String, u32> = HashMap::new();
    let mut cascade_ids: HashMap<String, u32> = HashMap::new();
    // (cascade, user, parent, timestamp) in provisional indices, input order.
    let mut rows: Vec<(u32, u32, u32, i64)> = Vec::new();
    let mut seen: HashSet<(u32, u32, u32, i64)> = HashSet::new();

    fn intern(map: &mut HashMap<String, u32>, key: &str) -> u32 {
        if let Some(&i) = map.get(key) {
            return i;
        }
        let i = map.len() as u32;
        map.insert(key.to_owned(), i);
        i
    }

    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        report.rows_read += 1;
        let field = |k: usize| record.get(col[k]).map(str::trim);
        let (Some(cascade), Some(user), Some(parent), Some(ts)) = (field(0), field(1), field(2), field(3))
        else {
            report.dropped_malformed += 1;
            continue;
        };
        if cascade.is_empty() || user.is_empty() {
            report.dropped_malformed += 1;
            continue;
        }
        let Ok(timestamp) = ts.parse::<i64>() else {
            report.dropped_bad_timestamp += 1;
            continue;
        };
        if parent == user {
            report.dropped_self_reshare += 1;
            continue;
        }
        let c = intern(&mut cascade_ids, cascade);
        let u = intern(&mut user_ids, user);
        let p = if parent.is_empty() {
            NO_PARENT
        } else {
            intern(&mut user_ids, parent)
        };
        if !seen.insert((c, u, p, timestamp)) {
            report.dropped_duplicate += 1;
            continue;
        }
        rows.push((c, u, p, timestamp));
    }
    drop(seen);
    report.rows_kept = rows.len();

    // Final node indices follow lexicographic id order.
    let mut ids: Vec<(String, u32)> = user_ids.into_iter().collect();
    ids.sort_unstable();
    let mut remap = vec![0 as NodeIdx; ids.len()];
    for (final_idx, (_, provisional)) in ids.iter().enumerate() {
        remap[*provisional as usize] = final_idx as NodeIdx;
    }
    let nodes = NodeTable::from_sorted(ids.into_iter().map(|(id, _)| id).collect())?;

    let mut cascade_names: Vec<String> = vec![String::new(); cascade_ids.len()];
    for (name, i) in cascade_ids {
        cascade_names[i as usize] = name;
    }
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); cascade_names.len()];
    for (c, u, p, t) in rows {
        let user = remap[u as usize];
        let parent = if p == NO_PARENT { NO_PARENT } else { remap[p as usize] };
        events[c as usize].push(Event { user, parent, timestamp: t });
    }
    let cascades = cascade_names
        .into_iter()
        .zip(events)
        .map(|(id, events)| Cascade { id, events })
        .collect();
    let store = CascadeStore::from_parts(Arc::new(nodes), cascades)?;

    for c in store.cascades() {
        let first = c.first_share_times();
        report.flagged_time_skew += c
            .events
            .iter()
            .filter(|e| !Cascade::is_time_consistent(e, &first))
            .count();
    }
    if report.flagged_time_skew > 0 {
        log::warn!("{} reshare rows precede their parent's share", report.flagged_time_skew);
    }
    Ok((store, report))
}

/// Writes the store in the format [`parse_events`] reads.
pub fn write_events<W: Write>(store: &CascadeStore, sink: W, delimiter: Delimiter) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter.byte())
        .from_writer(sink);
    writer.write_record(COLUMNS)?;
    for c in store.cascades() {
        for e in &c.events {
            let ts = e.timestamp.to_string();
            writer.write_record([
                c.id.as_str(),
                store.nodes.id(e.user),
                e.parent().map_or("", |p| store.nodes.id(p)),
                ts.as_str(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Splits events into `n` contiguous, non-overlapping time windows spanning
/// the store's full time range. Each event lands in exactly one window by its
/// own timestamp, so a cascade crossing a boundary is split into parts that
/// keep its id. Empty windows are allowed.
pub fn split_periods(store: &CascadeStore, n: usize, mode: PeriodMode) -> Result<Vec<CascadeStore>> {
    if n < 2 {
        return Err(Error::invalid(format!("period count must be >= 2, got {n}")));
    }
    let (t0, t1) = store
        .time_range()
        .ok_or_else(|| Error::Empty("store has no events to split".into()))?;
    let mut distinct: Vec<i64> = store
        .cascades()
        .iter()
        .flat_map(|c| c.events.iter().map(|e| e.timestamp))
        .collect();
    distinct.sort_unstable();
    let total_events = distinct.len();
    let count_bounds: Vec<i64> = (1..n)
        .map(|k| distinct[(k * total_events).div_ceil(n).min(total_events - 1)])
        .collect();
    distinct.dedup();
    if n > distinct.len() {
        return Err(Error::invalid(format!(
            "{n} periods requested but only {} distinct timestamps",
            distinct.len()
        )));
    }

    let span = (t1 as i128) - (t0 as i128) + 1;
    let window_of = |t: i64| -> usize {
        match mode {
            PeriodMode::EqualDuration => (((t as i128 - t0 as i128) * n as i128) / span) as usize,
            PeriodMode::EqualCount => count_bounds.partition_point(|&b| b <= t),
        }
    };

    let mut windows: Vec<Vec<Cascade>> = vec![Vec::new(); n];
    for c in store.cascades() {
        let mut parts: Vec<Vec<Event>> = vec![Vec::new(); n];
        for e in &c.events {
            parts[window_of(e.timestamp)].push(*e);
        }
        for (w, events) in parts.into_iter().enumerate() {
            if !events.is_empty() {
                windows[w].push(Cascade { id: c.id.clone(), events });
            }
        }
    }
    Ok(windows.into_iter().map(|cs| store.with_cascades(cs)).collect())
}

/// Splits whole cascades by root time: the first `ceil(train_fraction * C)`
/// cascades go to the training store. Root-time ties are broken by cascade id.
pub fn split_train_test(store: &CascadeStore, train_fraction: f64) -> Result<(CascadeStore, CascadeStore)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let total = store.n_cascades();
    if total < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: total });
    }
    let mut order: Vec<usize> = (0..total).collect();
    let cascades = store.cascades();
    order.sort_by(|&a, &b| {
        cascades[a]
            .root_time()
            .cmp(&cascades[b].root_time())
            .then_with(|| cascades[a].id.cmp(&cascades[b].id))
    });
    let n_train = ((train_fraction * total as f64) - 1e-9).ceil() as usize;
    let mut in_train = vec![false; total];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = cascades
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    Ok((
        store.with_cascades(train.into_iter().map(|(c, _)| c).collect()),
        store.with_cascades(test.into_iter().map(|(c, _)| c).collect()),
    ))
}
