//! Dyadic interaction data: ingestion of timestamped contact records and
//! reduction to per-dyad sufficient statistics over observation windows.
//!
//! A contact count per dyad is all the downstream likelihood needs, so a
//! [`DyadTable`] stores only the counts of the nonempty dyads; the (typically
//! enormous) set of empty dyads is represented by a single number.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed contact between two individuals in a given week.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteractionRecord {
    pub a: u32,
    pub b: u32,
    pub week: u32,
}

/// Half-open week range `[start_week, end_week)` of duration `T` weeks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    start_week: u32,
    end_week: u32,
}

impl ObservationWindow {
    pub fn new(start_week: u32, end_week: u32) -> Result<Self> {
        if end_week <= start_week {
            return Err(Error::InvalidParameter(format!(
                "observation window [{start_week}, {end_week}) has nonpositive duration"
            )));
        }
        Ok(Self { start_week, end_week })
    }

    pub fn start_week(&self) -> u32 {
        self.start_week
    }

    pub fn end_week(&self) -> u32 {
        self.end_week
    }

    /// Duration `T` in weeks.
    pub fn duration(&self) -> u32 {
        self.end_week - self.start_week
    }

    pub fn contains(&self, week: u32) -> bool {
        week >= self.start_week && week < self.end_week
    }
}

/// Canonical unordered pair of individuals (`i < j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadKey {
    i: u32,
    j: u32,
}

impl DyadKey {
    pub fn new(a: u32, b: u32) -> Result<Self> {
        if a == b {
            return Err(Error::Data(format!("self-dyad ({a}, {a}) is not allowed")));
        }
        Ok(Self { i: a.min(b), j: a.max(b) })
    }

    pub fn i(&self) -> u32 {
        self.i
    }

    pub fn j(&self) -> u32 {
        self.j
    }
}

/// Number of unordered dyads among `n` individuals: C(n, 2).
pub fn total_dyads(n: u32) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Per-dyad sufficient statistics over one observation window.
///
/// `n_empty + nonempty.len() == C(N, 2)` always holds; every stored count is
/// at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadTable {
    n_individuals: u32,
    window: ObservationWindow,
    nonempty: BTreeMap<DyadKey, u32>,
    n_empty: u64,
}

impl DyadTable {
    pub fn n(&self) -> u32 {
        self.n_individuals
    }

    pub fn window(&self) -> ObservationWindow {
        self.window
    }

    pub fn nonempty(&self) -> impl Iterator<Item = (DyadKey, u32)> + '_ {
        self.nonempty.iter().map(|(k, v)| (*k, *v))
    }

    pub fn nonempty_count(&self) -> u64 {
        self.nonempty.len() as u64
    }

    pub fn n_empty(&self) -> u64 {
        self.n_empty
    }

    pub fn total_dyads(&self) -> u64 {
        total_dyads(self.n_individuals)
    }

    /// Contact count for a dyad (zero when empty).
    pub fn count(&self, key: DyadKey) -> u32 {
        self.nonempty.get(&key).copied().unwrap_or(0)
    }

    pub fn is_nonempty(&self, key: DyadKey) -> bool {
        self.nonempty.contains_key(&key)
    }

    /// Fraction of dyads with at least one contact.
    pub fn density(&self) -> f64 {
        let total = self.total_dyads();
        if total == 0 {
            return 0.0;
        }
        self.nonempty_count() as f64 / total as f64
    }

    pub fn empty_proportion(&self) -> f64 {
        let total = self.total_dyads();
        if total == 0 {
            return 0.0;
        }
        self.n_empty as f64 / total as f64
    }

    /// Restrict the table to the given individuals, reindexed to `0..ids.len()`
    /// in the order supplied. Counts are preserved; emptiness is recomputed.
    pub fn subsample(&self, ids: &[u32]) -> Result<DyadTable> {
        let mut remap: HashMap<u32, u32> = HashMap::with_capacity(ids.len());
        for (new, &old) in ids.iter().enumerate() {
            if old >= self.n_individuals {
                return Err(Error::Data(format!("subsample id {old} out of range")));
            }
            if remap.insert(old, new as u32).is_some() {
                return Err(Error::Data(format!("duplicate subsample id {old}")));
            }
        }
        let n = ids.len() as u32;
        let mut nonempty = BTreeMap::new();
        for (key, y) in self.nonempty() {
            if let (Some(&i), Some(&j)) = (remap.get(&key.i()), remap.get(&key.j())) {
                nonempty.insert(DyadKey::new(i, j)?, y);
            }
        }
        let n_empty = total_dyads(n) - nonempty.len() as u64;
        Ok(DyadTable { n_individuals: n, window: self.window, nonempty, n_empty })
    }
}

/// How raw string identifiers are mapped onto dense indices `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdPolicy {
    /// Ids are numbered in order of first appearance in the stream.
    #[default]
    FirstSeen,
    /// Ids are numbered in lexicographic order.
    Sorted,
}

#[derive(Debug, Clone)]
pub struct IngestResult {
    pub records: Vec<InteractionRecord>,
    pub n_individuals: u32,
    /// Dense index -> original identifier.
    pub id_map: Vec<String>,
    /// Self-contacts are dropped but still register their identifier.
    pub dropped_self: u64,
    /// Rows filtered out because an endpoint is outside the id universe.
    pub dropped_outside: u64,
}

/// Read contact rows from CSV with header `caller_id,callee_id,week`.
///
/// Rows whose endpoints are not both inside `universe` (when given) are
/// dropped before any id is registered, so out-of-network individuals never
/// enter the index.
pub fn ingest_records<R: io::Read>(
    reader: R,
    policy: IdPolicy,
    universe: Option<&BTreeSet<String>>,
) -> Result<IngestResult> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);

    let mut rows: Vec<(String, String, u32)> = Vec::new();
    let mut dropped_outside = 0u64;
    for row in csv_reader.records() {
        let record = row.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() < 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let a = record[0].trim().to_owned();
        let b = record[1].trim().to_owned();
        let week: u32 = record[2].trim().parse().map_err(|e| Error::Parse {
            line,
            message: format!("bad week value {:?}: {e}", &record[2]),
        })?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::Parse { line, message: "empty identifier".into() });
        }
        if let Some(universe) = universe {
            if !universe.contains(&a) || !universe.contains(&b) {
                dropped_outside += 1;
                continue;
            }
        }
        rows.push((a, b, week));
    }
    if rows.is_empty() && dropped_outside == 0 {
        return Err(Error::Data("no interaction records in input".into()));
    }

    let mut id_map: Vec<String> = Vec::new();
    match policy {
        IdPolicy::FirstSeen => {
            let mut seen: std::collections::HashSet<&String> = std::collections::HashSet::new();
            for (a, b, _) in &rows {
                if seen.insert(a) {
                    id_map.push(a.clone());
                }
                if seen.insert(b) {
                    id_map.push(b.clone());
                }
            }
        }
        IdPolicy::Sorted => {
            let set: BTreeSet<&String> = rows.iter().flat_map(|(a, b, _)| [a, b]).collect();
            id_map = set.into_iter().cloned().collect();
        }
    }
    let index: HashMap<&String, u32> =
        id_map.iter().enumerate().map(|(i, s)| (s, i as u32)).collect();

    let mut records = Vec::with_capacity(rows.len());
    let mut dropped_self = 0u64;
    for (a, b, week) in &rows {
        if a == b {
            dropped_self += 1;
            continue;
        }
        records.push(InteractionRecord { a: index[a], b: index[b], week: *week });
    }

    Ok(IngestResult {
        records,
        n_individuals: id_map.len() as u32,
        id_map,
        dropped_self,
        dropped_outside,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse { line, message: e.to_string() }
}

/// Reduce records to per-dyad contact counts over `window`.
pub fn build_dyad_table(
    records: &[InteractionRecord],
    n: u32,
    window: ObservationWindow,
) -> Result<DyadTable> {
    let mut nonempty: BTreeMap<DyadKey, u32> = BTreeMap::new();
    for record in records {
        if record.a >= n || record.b >= n {
            return Err(Error::Data(format!(
                "record ({}, {}) outside id range 0..{n}",
                record.a, record.b
            )));
        }
        if !window.contains(record.week) {
            return Err(Error::Data(format!(
                "record week {} outside window [{}, {})",
                record.week,
                window.start_week(),
                window.end_week()
            )));
        }
        let key = DyadKey::new(record.a, record.b)?;
        *nonempty.entry(key).or_insert(0) += 1;
    }
    let n_empty = total_dyads(n) - nonempty.len() as u64;
    Ok(DyadTable { n_individuals: n, window, nonempty, n_empty })
}

/// Split records at `boundary_week` into consecutive calibration and holdout
/// tables over the same `n` individuals.
pub fn split_windows(
    records: &[InteractionRecord],
    n: u32,
    full: ObservationWindow,
    boundary_week: u32,
) -> Result<(DyadTable, DyadTable)> {
    if boundary_week <= full.start_week() || boundary_week >= full.end_week() {
        return Err(Error::Data(format!(
            "boundary week {boundary_week} not strictly inside [{}, {})",
            full.start_week(),
            full.end_week()
        )));
    }
    let calib_window = ObservationWindow::new(full.start_week(), boundary_week)?;
    let holdout_window = ObservationWindow::new(boundary_week, full.end_week())?;
    let (calib, holdout): (Vec<_>, Vec<_>) =
        records.iter().partition(|r| r.week < boundary_week);
    Ok((
        build_dyad_table(&calib, n, calib_window)?,
        build_dyad_table(&holdout, n, holdout_window)?,
    ))
}

/// Dyad-state transitions between a calibration and a holdout table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransitionCounts {
    pub nonempty_to_nonempty: u64,
    pub nonempty_to_empty: u64,
    pub empty_to_nonempty: u64,
    pub empty_to_empty: u64,
}

impl TransitionCounts {
    pub fn total(&self) -> u64 {
        self.nonempty_to_nonempty
            + self.nonempty_to_empty
            + self.empty_to_nonempty
            + self.empty_to_empty
    }
}

pub fn dyad_transition_counts(calib: &DyadTable, holdout: &DyadTable) -> Result<TransitionCounts> {
    if calib.n() != holdout.n() {
        return Err(Error::Data(format!(
            "transition counts need matching populations, got N={} vs N={}",
            calib.n(),
            holdout.n()
        )));
    }
    let both = calib.nonempty().filter(|(k, _)| holdout.is_nonempty(*k)).count() as u64;
    let nonempty_to_empty = calib.nonempty_count() - both;
    let empty_to_nonempty = holdout.nonempty_count() - both;
    let empty_to_empty =
        calib.total_dyads() - both - nonempty_to_empty - empty_to_nonempty;
    Ok(TransitionCounts {
        nonempty_to_nonempty: both,
        nonempty_to_empty,
        empty_to_nonempty,
        empty_to_empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(start: u32, end: u32) -> ObservationWindow {
        ObservationWindow::new(start, end).unwrap()
    }

    fn csv_input(rows: &[(&str, &str, u32)]) -> String {
        let mut s = String::from("caller_id,callee_id,week\n");
        for (a, b, w) in rows {
            s.push_str(&format!("{a},{b},{w}\n"));
        }
        s
    }

    #[test]
    fn ingest_minimal_pair() {
        let out = ingest_records(csv_input(&[("u", "v", 3)]).as_bytes(), IdPolicy::FirstSeen, None)
            .unwrap();
        assert_eq!(out.n_individuals, 2);
        assert_eq!(out.records, vec![InteractionRecord { a: 0, b: 1, week: 3 }]);
        assert_eq!(out.dropped_self, 0);
    }

    #[test]
    fn ingest_drops_self_contacts_but_registers_id() {
        let out = ingest_records(csv_input(&[("u", "u", 3)]).as_bytes(), IdPolicy::FirstSeen, None)
            .unwrap();
        assert_eq!(out.n_individuals, 1);
        assert!(out.records.is_empty());
        assert_eq!(out.dropped_self, 1);
    }

    #[test]
    fn ingest_sorted_policy_orders_ids() {
        let out = ingest_records(
            csv_input(&[("zeta", "alpha", 0), ("beta", "zeta", 1)]).as_bytes(),
            IdPolicy::Sorted,
            None,
        )
        .unwrap();
        assert_eq!(out.id_map, vec!["alpha", "beta", "zeta"]);
    }

    #[test]
    fn ingest_universe_filtering() {
        let universe: BTreeSet<String> = ["u", "v"].iter().map(|s| s.to_string()).collect();
        let out = ingest_records(
            csv_input(&[("u", "v", 0), ("u", "w", 1), ("w", "x", 2)]).as_bytes(),
            IdPolicy::FirstSeen,
            Some(&universe),
        )
        .unwrap();
        assert_eq!(out.n_individuals, 2);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.dropped_outside, 2);
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(
            ingest_records("caller_id,callee_id,week\n".as_bytes(), IdPolicy::FirstSeen, None),
            Err(Error::Data(_))
        ));
        let err = ingest_records(
            "caller_id,callee_id,week\nu,v,notaweek\n".as_bytes(),
            IdPolicy::FirstSeen,
            None,
        )
        .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dyad_count_for_full_population() {
        assert_eq!(total_dyads(4781), 11_426_590);
        assert_eq!(total_dyads(2), 1);
        assert_eq!(total_dyads(0), 0);
    }

    #[test]
    fn build_table_counts_and_empty_complement() {
        let records = vec![
            InteractionRecord { a: 0, b: 1, week: 0 },
            InteractionRecord { a: 1, b: 0, week: 5 },
            InteractionRecord { a: 0, b: 1, week: 20 },
        ];
        let table = build_dyad_table(&records, 3, window(0, 26)).unwrap();
        assert_eq!(table.count(DyadKey::new(0, 1).unwrap()), 3);
        assert_eq!(table.nonempty_count(), 1);
        assert_eq!(table.n_empty(), 2);
        assert_eq!(table.window().duration(), 26);
    }

    #[test]
    fn build_table_no_records() {
        let table = build_dyad_table(&[], 4, window(0, 10)).unwrap();
        assert_eq!(table.n_empty(), 6);
    }

    #[test]
    fn build_table_rejects_out_of_window() {
        let records = vec![InteractionRecord { a: 0, b: 1, week: 30 }];
        assert!(build_dyad_table(&records, 2, window(0, 26)).is_err());
    }

    #[test]
    fn split_windows_durations() {
        let records = vec![
            InteractionRecord { a: 0, b: 1, week: 0 },
            InteractionRecord { a: 0, b: 1, week: 51 },
        ];
        let (calib, holdout) = split_windows(&records, 2, window(0, 52), 26).unwrap();
        assert_eq!(calib.window().duration(), 26);
        assert_eq!(holdout.window().duration(), 26);
        let (calib, holdout) = split_windows(&records, 2, window(0, 52), 13).unwrap();
        assert_eq!(calib.window().duration(), 13);
        assert_eq!(holdout.window().duration(), 39);
        assert_eq!(calib.n(), holdout.n());
    }

    #[test]
    fn split_windows_empty_holdout() {
        let records: Vec<_> =
            (0..5).map(|w| InteractionRecord { a: 0, b: 1, week: w }).collect();
        let (_, holdout) = split_windows(&records, 3, window(0, 52), 26).unwrap();
        assert_eq!(holdout.nonempty_count(), 0);
        assert_eq!(holdout.n_empty(), 3);
    }

    #[test]
    fn split_windows_boundary_validation() {
        assert!(split_windows(&[], 2, window(0, 52), 0).is_err());
        assert!(split_windows(&[], 2, window(0, 52), 52).is_err());
        assert!(split_windows(&[], 2, window(0, 52), 60).is_err());
    }

    #[test]
    fn transitions_small_cases() {
        let w1 = window(0, 26);
        let w2 = window(26, 52);
        let rec = |a, b, week| InteractionRecord { a, b, week };
        let calib = build_dyad_table(&[rec(0, 1, 1)], 3, w1).unwrap();
        let holdout = build_dyad_table(&[rec(0, 1, 30)], 3, w2).unwrap();
        let t = dyad_transition_counts(&calib, &holdout).unwrap();
        assert_eq!(
            (t.nonempty_to_nonempty, t.nonempty_to_empty, t.empty_to_nonempty, t.empty_to_empty),
            (1, 0, 0, 2)
        );

        let holdout = build_dyad_table(&[rec(1, 2, 30)], 3, w2).unwrap();
        let t = dyad_transition_counts(&calib, &holdout).unwrap();
        assert_eq!(
            (t.nonempty_to_nonempty, t.nonempty_to_empty, t.empty_to_nonempty, t.empty_to_empty),
            (0, 1, 1, 1)
        );
    }

    #[test]
    fn transitions_full_scale_shape() {
        // Synthetic input shaped like the telecom panel: 12,617 calibration
        // dyads of which 7,559 persist, plus 5,461 fresh holdout dyads.
        let n = 4781u32;
        let mut pairs = Vec::new();
        'outer: for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
                if pairs.len() == 12_617 + 5_461 {
                    break 'outer;
                }
            }
        }
        let calib_records: Vec<_> = pairs[..12_617]
            .iter()
            .map(|&(a, b)| InteractionRecord { a, b, week: 0 })
            .collect();
        let mut holdout_pairs: Vec<_> = pairs[..7_559].to_vec();
        holdout_pairs.extend_from_slice(&pairs[12_617..]);
        let holdout_records: Vec<_> = holdout_pairs
            .iter()
            .map(|&(a, b)| InteractionRecord { a, b, week: 30 })
            .collect();

        let calib = build_dyad_table(&calib_records, n, window(0, 26)).unwrap();
        let holdout = build_dyad_table(&holdout_records, n, window(26, 52)).unwrap();
        assert_eq!(calib.n_empty(), 11_413_973);
        assert_eq!(holdout.nonempty_count(), 13_020);

        let t = dyad_transition_counts(&calib, &holdout).unwrap();
        assert_eq!(t.nonempty_to_nonempty, 7_559);
        assert_eq!(t.nonempty_to_empty, 5_058);
        assert_eq!(t.empty_to_nonempty, 5_461);
        assert_eq!(t.total(), 11_426_590);
    }

    #[test]
    fn transitions_mismatched_population() {
        let calib = build_dyad_table(&[], 3, window(0, 26)).unwrap();
        let holdout = build_dyad_table(&[], 4, window(26, 52)).unwrap();
        assert!(dyad_transition_counts(&calib, &holdout).is_err());
    }

    #[test]
    fn subsample_preserves_counts() {
        let rec = |a, b, week| InteractionRecord { a, b, week };
        let table =
            build_dyad_table(&[rec(0, 1, 0), rec(0, 1, 1), rec(2, 3, 2)], 4, window(0, 10))
                .unwrap();
        let sub = table.subsample(&[0, 1, 3]).unwrap();
        assert_eq!(sub.n(), 3);
        assert_eq!(sub.count(DyadKey::new(0, 1).unwrap()), 2);
        assert_eq!(sub.nonempty_count(), 1);
        assert_eq!(sub.n_empty(), 2);
    }

    proptest! {
        #[test]
        fn table_partition_identity(
            pairs in proptest::collection::vec((0u32..12, 0u32..12, 0u32..20), 0..60),
            n in 12u32..20,
        ) {
            let records: Vec<_> = pairs
                .iter()
                .filter(|(a, b, _)| a != b)
                .map(|&(a, b, week)| InteractionRecord { a, b, week })
                .collect();
            let table = build_dyad_table(&records, n, window(0, 20)).unwrap();
            prop_assert_eq!(table.n_empty() + table.nonempty_count(), total_dyads(n));
        }

        #[test]
        fn build_is_permutation_invariant(
            pairs in proptest::collection::vec((0u32..10, 0u32..10, 0u32..20), 1..40),
            swap in proptest::collection::vec((0usize..40, 0usize..40), 0..20),
        ) {
            let records: Vec<_> = pairs
                .iter()
                .filter(|(a, b, _)| a != b)
                .map(|&(a, b, week)| InteractionRecord { a, b, week })
                .collect();
            let mut shuffled = records.clone();
            for (x, y) in swap {
                if x < shuffled.len() && y < shuffled.len() {
                    shuffled.swap(x, y);
                }
            }
            let t1 = build_dyad_table(&records, 10, window(0, 20)).unwrap();
            let t2 = build_dyad_table(&shuffled, 10, window(0, 20)).unwrap();
            prop_assert_eq!(t1, t2);
        }

        #[test]
        fn split_counts_sum_to_full(
            pairs in proptest::collection::vec((0u32..8, 0u32..8, 0u32..20), 1..50),
        ) {
            let records: Vec<_> = pairs
                .iter()
                .filter(|(a, b, _)| a != b)
                .map(|&(a, b, week)| InteractionRecord { a, b, week })
                .collect();
            prop_assume!(!records.is_empty());
            let full = build_dyad_table(&records, 8, window(0, 20)).unwrap();
            let (calib, holdout) = split_windows(&records, 8, window(0, 20), 10).unwrap();
            for (key, y) in full.nonempty() {
                prop_assert_eq!(calib.count(key) + holdout.count(key), y);
            }
        }
    }
}
