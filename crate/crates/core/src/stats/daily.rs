use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::Result;
use crate::ingest::TransactionRecord;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DayStats {
    pub txn_count: u64,
    pub total_drops: u128,
    pub n_sources: usize,
    pub n_destinations: usize,
    pub n_users: usize,
}

/// Per-UTC-date activity, contiguous from the first to the last active date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DailySeries {
    pub days: BTreeMap<NaiveDate, DayStats>,
}

impl DailySeries {
    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn txn_counts(&self) -> Vec<f64> {
        self.days.values().map(|d| d.txn_count as f64).collect()
    }

    pub fn user_counts(&self) -> Vec<f64> {
        self.days.values().map(|d| d.n_users as f64).collect()
    }

    pub fn totals_xrp(&self) -> Vec<f64> {
        self.days.values().map(|d| crate::drops_to_xrp(d.total_drops)).collect()
    }

    pub fn total_drops(&self) -> u128 {
        self.days.values().map(|d| d.total_drops).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "txn_count", "total_drops", "n_sources", "n_destinations", "n_users"])?;
        for (date, d) in &self.days {
            w.write_record([
                date.to_string(),
                d.txn_count.to_string(),
                d.total_drops.to_string(),
                d.n_sources.to_string(),
                d.n_destinations.to_string(),
                d.n_users.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Default)]
struct DayAcc {
    txn_count: u64,
    total_drops: u128,
    sources: HashSet<u32>,
    destinations: HashSet<u32>,
}

/// Streaming builder for [`DailySeries`]; memory grows with distinct (day, account) pairs.
#[derive(Debug, Default)]
pub struct DailyAccumulator {
    ids: HashMap<Box<str>, u32>,
    names: Vec<Box<str>>,
    days: HashMap<NaiveDate, DayAcc>,
}

impl DailyAccumulator {
    fn intern(&mut self, account: &str) -> u32 {
        if let Some(&id) = self.ids.get(account) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(account.into());
        self.ids.insert(account.into(), id);
        id
    }

    pub fn push(&mut self, rec: &TransactionRecord) {
        let src = self.intern(&rec.source);
        let dst = self.intern(&rec.destination);
        let day = self.days.entry(rec.date()).or_default();
        day.txn_count += 1;
        day.total_drops += rec.amount_drops as u128;
        day.sources.insert(src);
        day.destinations.insert(dst);
    }

    /// Folds another partial aggregate into this one.
    pub fn merge(&mut self, other: DailyAccumulator) {
        let remap: Vec<u32> = other.names.iter().map(|n| self.intern(n)).collect();
        for (date, acc) in other.days {
            let day = self.days.entry(date).or_default();
            day.txn_count += acc.txn_count;
            day.total_drops += acc.total_drops;
            day.sources.extend(acc.sources.iter().map(|&i| remap[i as usize]));
            day.destinations.extend(acc.destinations.iter().map(|&i| remap[i as usize]));
        }
    }

    pub fn finish(&self) -> DailySeries {
        let mut days = BTreeMap::new();
        let (Some(first), Some(last)) = (self.days.keys().min(), self.days.keys().max()) else {
            return DailySeries { days };
        };
        for date in first.iter_days().take_while(|d| d <= last) {
            let stats = self.days.get(&date).map_or_else(DayStats::default, |acc| DayStats {
                txn_count: acc.txn_count,
                total_drops: acc.total_drops,
                n_sources: acc.sources.len(),
                n_destinations: acc.destinations.len(),
                n_users: acc.sources.union(&acc.destinations).count(),
            });
            days.insert(date, stats);
        }
        DailySeries { days }
    }
}

pub fn daily_aggregate<'a>(records: impl IntoIterator<Item = &'a TransactionRecord>) -> DailySeries {
    let mut acc = DailyAccumulator::default();
    records.into_iter().for_each(|r| acc.push(r));
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_timestamp, yearly_summary};

    fn r(t: &str, s: &str, d: &str, drops: u64) -> TransactionRecord {
        TransactionRecord::xrp(parse_timestamp(t).unwrap(), s, d, drops)
    }

    #[test]
    fn same_day_distinct_counts() {
        let s = daily_aggregate(&[r("2018-02-01T01:00:00Z", "a", "b", 5), r("2018-02-01T02:00:00Z", "a", "c", 7)]);
        let d = s.days.values().next().unwrap();
        assert_eq!(*d, DayStats { txn_count: 2, total_drops: 12, n_sources: 1, n_destinations: 2, n_users: 3 });
        let s = daily_aggregate(&[r("2018-02-01T01:00:00Z", "a", "b", 5), r("2018-02-01T02:00:00Z", "b", "a", 7)]);
        assert_eq!(s.days.values().next().unwrap().n_users, 2);
    }

    #[test]
    fn gaps_are_materialized() {
        let s = daily_aggregate(&[r("2018-02-01T01:00:00Z", "a", "b", 5), r("2018-02-04T02:00:00Z", "a", "c", 7)]);
        assert_eq!(s.len(), 4);
        assert_eq!(s.txn_counts(), vec![1.0, 0.0, 0.0, 1.0]);
        assert!(daily_aggregate(&[]).is_empty());
    }

    #[test]
    fn reconciles_with_yearly_totals_and_merges() {
        let records = crate::synth::gen_ledger(&crate::synth::SynthConfig {
            n_days: 400,
            txns_per_day: 20.0,
            ..Default::default()
        })
        .unwrap();
        let series = daily_aggregate(&records);
        let yearly = yearly_summary(&records);
        assert_eq!(series.total_drops(), yearly.overall.total_drops);
        let count: u64 = series.days.values().map(|d| d.txn_count).sum();
        assert_eq!(count, yearly.overall.txn_count);
        for d in series.days.values() {
            assert!(d.n_users <= d.n_sources + d.n_destinations);
        }

        let (left, right) = records.split_at(records.len() / 3);
        let mut a = DailyAccumulator::default();
        left.iter().for_each(|r| a.push(r));
        let mut b = DailyAccumulator::default();
        right.iter().for_each(|r| b.push(r));
        a.merge(b);
        assert_eq!(a.finish(), series);
    }
}
