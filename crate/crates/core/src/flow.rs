//! Daily inflow/outflow aggregation and the Flow Index.
//!
//! For an account with daily inflow series `f_in` and outflow series `f_out`,
//!
//! ```text
//! A = ( M_n(f_in / sum f_in)   * max(f_in)  / max(f_in ∪ f_out),
//!       M_n(f_out / sum f_out) * max(f_out) / max(f_in ∪ f_out) )
//! ```
//!
//! Each component is an effective number of significant transaction days in
//! that direction, discounted by how small that side's largest day is compared
//! to the largest day on either side. An empty side contributes 0.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::{modified_inverse_hh, normalize_amounts, DEFAULT_ORDER};
use crate::error::{Error, Result};
use crate::ingest::TransactionRecord;

/// Default Flow Index cutoff for node classification.
pub const DEFAULT_CUTOFF: f64 = 0.5;

/// Per-day totals in drops; days without flow are absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DailyFlowPair {
    pub inflow: BTreeMap<NaiveDate, u128>,
    pub outflow: BTreeMap<NaiveDate, u128>,
}

impl DailyFlowPair {
    pub fn add_inflow(&mut self, date: NaiveDate, drops: u128) {
        if drops > 0 {
            *self.inflow.entry(date).or_default() += drops;
        }
    }

    pub fn add_outflow(&mut self, date: NaiveDate, drops: u128) {
        if drops > 0 {
            *self.outflow.entry(date).or_default() += drops;
        }
    }

    pub fn max_inflow(&self) -> u128 {
        self.inflow.values().copied().max().unwrap_or(0)
    }

    pub fn max_outflow(&self) -> u128 {
        self.outflow.values().copied().max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.inflow.is_empty() && self.outflow.is_empty()
    }

    fn merge(&mut self, other: DailyFlowPair) {
        for (d, v) in other.inflow {
            self.add_inflow(d, v);
        }
        for (d, v) in other.outflow {
            self.add_outflow(d, v);
        }
    }
}

/// Sums one account's transactions per UTC date. Self-loops count on both sides.
pub fn build_daily_flows<'a>(records: impl IntoIterator<Item = &'a TransactionRecord>, account: &str) -> DailyFlowPair {
    let mut flows = DailyFlowPair::default();
    for rec in records {
        if rec.destination == account {
            flows.add_inflow(rec.date(), rec.amount_drops as u128);
        }
        if rec.source == account {
            flows.add_outflow(rec.date(), rec.amount_drops as u128);
        }
    }
    flows
}

/// Streaming all-accounts aggregation.
#[derive(Debug, Default)]
pub struct FlowBook {
    accounts: HashMap<String, DailyFlowPair>,
}

impl FlowBook {
    pub fn push(&mut self, rec: &TransactionRecord) {
        let date = rec.date();
        let drops = rec.amount_drops as u128;
        self.entry(&rec.destination).add_inflow(date, drops);
        self.entry(&rec.source).add_outflow(date, drops);
    }

    fn entry(&mut self, account: &str) -> &mut DailyFlowPair {
        if !self.accounts.contains_key(account) {
            self.accounts.insert(account.to_owned(), DailyFlowPair::default());
        }
        self.accounts.get_mut(account).expect("inserted above")
    }

    fn merge(mut self, other: FlowBook) -> FlowBook {
        let (mut big, small) = if self.accounts.len() >= other.accounts.len() {
            (std::mem::take(&mut self.accounts), other.accounts)
        } else {
            (other.accounts, std::mem::take(&mut self.accounts))
        };
        for (account, flows) in small {
            big.entry(account).or_default().merge(flows);
        }
        FlowBook { accounts: big }
    }

    pub fn finish(self) -> BTreeMap<String, DailyFlowPair> {
        self.accounts.into_iter().collect()
    }
}

/// Daily flows for every account appearing in `records`, built in parallel.
///
/// Integer sums make the result identical to calling [`build_daily_flows`]
/// once per account.
pub fn build_all_daily_flows(records: &[TransactionRecord]) -> BTreeMap<String, DailyFlowPair> {
    records
        .par_chunks(16_384)
        .map(|chunk| {
            let mut book = FlowBook::default();
            chunk.iter().for_each(|r| book.push(r));
            book
        })
        .reduce(FlowBook::default, FlowBook::merge)
        .finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowIndex {
    pub a_in: f64,
    pub a_out: f64,
}

fn side_index(series: &BTreeMap<NaiveDate, u128>, side_max: u128, joint_max: u128, n: u32) -> Result<f64> {
    if series.is_empty() {
        return Ok(0.0);
    }
    let values: Vec<u128> = series.values().copied().collect();
    let effective = modified_inverse_hh(&normalize_amounts(&values)?, n)?;
    let discount = if side_max == joint_max { 1.0 } else { side_max as f64 / joint_max as f64 };
    Ok(effective * discount)
}

pub fn flow_index(flows: &DailyFlowPair, n: u32) -> Result<FlowIndex> {
    if n < 2 {
        return Err(Error::domain("flow index needs order n >= 2"));
    }
    let (max_in, max_out) = (flows.max_inflow(), flows.max_outflow());
    let joint = max_in.max(max_out);
    Ok(FlowIndex {
        a_in: side_index(&flows.inflow, max_in, joint, n)?,
        a_out: side_index(&flows.outflow, max_out, joint, n)?,
    })
}

/// Flow Index at the default order.
pub fn default_flow_index(flows: &DailyFlowPair) -> FlowIndex {
    flow_index(flows, DEFAULT_ORDER).expect("default order is valid")
}

/// Position of a node in the walnut decomposition.
///
/// `Out` nodes are sinks (significant inflow, negligible outflow), `In` nodes
/// are sources, `Body` nodes are significant both ways and `Dormant` nodes
/// are significant in neither direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    In,
    Out,
    Body,
    Dormant,
}

impl NodeClass {
    pub const ALL: [NodeClass; 4] = [NodeClass::In, NodeClass::Out, NodeClass::Body, NodeClass::Dormant];

    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::In => "in",
            NodeClass::Out => "out",
            NodeClass::Body => "body",
            NodeClass::Dormant => "dormant",
        }
    }
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NodeClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Format(format!("unknown node class {s:?}")))
    }
}

pub fn classify_node(index: FlowIndex, cutoff: f64) -> NodeClass {
    match (index.a_in <= cutoff, index.a_out <= cutoff) {
        (false, true) => NodeClass::Out,
        (true, false) => NodeClass::In,
        (false, false) => NodeClass::Body,
        (true, true) => NodeClass::Dormant,
    }
}

/// One row of the exported Flow Index table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub account: String,
    pub a_in: f64,
    pub a_out: f64,
    pub class: NodeClass,
    pub max_in_drops: u128,
    pub max_out_drops: u128,
    pub n_days_in: usize,
    pub n_days_out: usize,
}

impl FlowRow {
    pub fn index(&self) -> FlowIndex {
        FlowIndex { a_in: self.a_in, a_out: self.a_out }
    }
}

/// Flow Index rows for every account, sorted by account id.
pub fn flow_table(flows: &BTreeMap<String, DailyFlowPair>, n: u32, cutoff: f64) -> Result<Vec<FlowRow>> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::domain(format!("cutoff {cutoff} must be positive")));
    }
    flows
        .par_iter()
        .map(|(account, f)| {
            let index = flow_index(f, n)?;
            Ok(FlowRow {
                account: account.clone(),
                a_in: index.a_in,
                a_out: index.a_out,
                class: classify_node(index, cutoff),
                max_in_drops: f.max_inflow(),
                max_out_drops: f.max_outflow(),
                n_days_in: f.inflow.len(),
                n_days_out: f.outflow.len(),
            })
        })
        .collect()
}

pub fn write_flow_table<W: Write>(writer: W, rows: &[FlowRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["account", "a_in", "a_out", "class", "max_in_drops", "max_out_drops", "n_days_in", "n_days_out"])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_flow_table<R: Read>(reader: R) -> Result<Vec<FlowRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_timestamp;
    use crate::DROPS_PER_XRP;
    use proptest::prelude::*;

    const XRP: u128 = DROPS_PER_XRP as u128;

    fn day(i: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    fn flows(inflow: &[(u32, u128)], outflow: &[(u32, u128)]) -> DailyFlowPair {
        let mut f = DailyFlowPair::default();
        inflow.iter().for_each(|&(d, v)| f.add_inflow(day(d), v));
        outflow.iter().for_each(|&(d, v)| f.add_outflow(day(d), v));
        f
    }

    #[test]
    fn same_day_transactions_merge() {
        let big = 100_000_000_000 * DROPS_PER_XRP;
        let records = [
            TransactionRecord::xrp(parse_timestamp("2017-08-01T10:00:00Z").unwrap(), "x", "acct", big),
            TransactionRecord::xrp(parse_timestamp("2017-08-01T10:00:50Z").unwrap(), "x", "acct", big),
        ];
        let f = build_daily_flows(&records, "acct");
        assert_eq!(f.inflow.len(), 1);
        assert_eq!(f.inflow.values().next(), Some(&(2 * big as u128)));
        assert!(f.outflow.is_empty());
    }

    #[test]
    fn utc_day_boundary_splits() {
        let records = [
            TransactionRecord::xrp(parse_timestamp("2017-08-01T23:59:59Z").unwrap(), "x", "acct", 1),
            TransactionRecord::xrp(parse_timestamp("2017-08-02T00:00:01Z").unwrap(), "x", "acct", 1),
        ];
        let f = build_daily_flows(&records, "acct");
        let dates: Vec<_> = f.inflow.keys().map(|d| d.to_string()).collect();
        assert_eq!(dates, ["2017-08-01", "2017-08-02"]);
        assert!(build_daily_flows(&records, "nobody").is_empty());
    }

    #[test]
    fn self_loop_counts_both_ways() {
        let records = [TransactionRecord::xrp(parse_timestamp("2017-08-01T00:00:00Z").unwrap(), "a", "a", 9)];
        let f = build_daily_flows(&records, "a");
        assert_eq!((f.max_inflow(), f.max_outflow()), (9, 9));
        assert_eq!(default_flow_index(&f), FlowIndex { a_in: 1.0, a_out: 1.0 });
    }

    #[test]
    fn flow_index_examples() {
        assert_eq!(default_flow_index(&flows(&[(0, 100 * XRP)], &[])), FlowIndex { a_in: 1.0, a_out: 0.0 });
        let a = default_flow_index(&flows(&[(0, 100 * XRP), (1, 100 * XRP)], &[(0, 50 * XRP)]));
        assert_eq!(a, FlowIndex { a_in: 2.0, a_out: 0.5 });
        assert_eq!(default_flow_index(&DailyFlowPair::default()), FlowIndex { a_in: 0.0, a_out: 0.0 });
        assert!(flow_index(&DailyFlowPair::default(), 1).is_err());
    }

    #[test]
    fn pair_node_regime() {
        let mut inflow = vec![(0, 200_000_000_000 * XRP)];
        inflow.extend((1..=17).map(|d| (d, XRP)));
        let a = default_flow_index(&flows(&inflow, &[(3, 10 * XRP), (9, 10 * XRP)]));
        assert!(a.a_in > 1.0 && a.a_in < 1.001, "{a:?}");
        assert!(a.a_out > 0.0 && a.a_out <= 1e-9, "{a:?}");
    }

    #[test]
    fn classification_rule() {
        let c = |a_in, a_out| classify_node(FlowIndex { a_in, a_out }, DEFAULT_CUTOFF);
        assert_eq!(c(3.0, 0.2), NodeClass::Out);
        assert_eq!(c(0.1, 4.0), NodeClass::In);
        assert_eq!(c(2.0, 2.0), NodeClass::Body);
        assert_eq!(c(0.0, 0.0), NodeClass::Dormant);
        // boundary is inclusive on the "negligible" side
        assert_eq!(c(0.5, 0.51), NodeClass::In);
    }

    #[test]
    fn table_round_trip() {
        let mut all = BTreeMap::new();
        all.insert("b".to_string(), flows(&[(0, 3), (1, 4)], &[(2, 1)]));
        all.insert("a".to_string(), flows(&[], &[(0, 7)]));
        let rows = flow_table(&all, 20, 0.5).unwrap();
        assert_eq!(rows[0].account, "a");
        assert_eq!(rows[0].class, NodeClass::In);
        let mut buf = Vec::new();
        write_flow_table(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with(
                "account,a_in,a_out,class,max_in_drops,max_out_drops,n_days_in,n_days_out\na,0.0,1.0,in,0,7,0,1\n"
            ),
            "{text}"
        );
        assert_eq!(read_flow_table(buf.as_slice()).unwrap(), rows);
        assert!(flow_table(&all, 20, 0.0).is_err());
    }

    fn arb_flows() -> impl Strategy<Value = DailyFlowPair> {
        let side = prop::collection::btree_map(0u32..60, 1u128..1_000_000_000_000, 0..12);
        (side.clone(), side).prop_map(|(i, o)| DailyFlowPair {
            inflow: i.into_iter().map(|(d, v)| (day(d), v)).collect(),
            outflow: o.into_iter().map(|(d, v)| (day(d), v)).collect(),
        })
    }

    proptest! {
        #[test]
        fn dominant_side_is_undiscounted(f in arb_flows()) {
            let a = default_flow_index(&f);
            let inflow = normalize_amounts(&f.inflow.values().copied().collect::<Vec<_>>()).unwrap();
            let outflow = normalize_amounts(&f.outflow.values().copied().collect::<Vec<_>>()).unwrap();
            if !f.inflow.is_empty() && f.max_inflow() >= f.max_outflow() {
                prop_assert_eq!(a.a_in, modified_inverse_hh(&inflow, 20).unwrap());
            }
            if !f.outflow.is_empty() && f.max_outflow() >= f.max_inflow() {
                prop_assert_eq!(a.a_out, modified_inverse_hh(&outflow, 20).unwrap());
            }
            prop_assert!(a.a_in <= f.inflow.len() as f64 + 1e-9);
            prop_assert!(a.a_out <= f.outflow.len() as f64 + 1e-9);
            if f.inflow.is_empty() { prop_assert_eq!(a.a_in, 0.0); }
            if f.outflow.is_empty() { prop_assert_eq!(a.a_out, 0.0); }
        }

        #[test]
        fn common_scaling_leaves_index_unchanged(f in arb_flows(), k in 0u32..20) {
            let c = 1u128 << k;
            let scaled = DailyFlowPair {
                inflow: f.inflow.iter().map(|(d, v)| (*d, v * c)).collect(),
                outflow: f.outflow.iter().map(|(d, v)| (*d, v * c)).collect(),
            };
            prop_assert_eq!(default_flow_index(&f), default_flow_index(&scaled));
        }

        #[test]
        fn identical_days_count_exactly(k in 1u32..40, v in 1u128..1_000_000_000_000_000) {
            let inflow: Vec<_> = (0..k).map(|d| (d, v)).collect();
            let a = default_flow_index(&flows(&inflow, &[]));
            prop_assert!((a.a_in - k as f64).abs() <= 1e-12 * k as f64);
            prop_assert_eq!(a.a_out, 0.0);
        }

        #[test]
        fn classification_depends_only_on_comparisons(a_in in 0.0f64..5.0, a_out in 0.0f64..5.0, cutoff in 0.01f64..3.0) {
            let class = classify_node(FlowIndex { a_in, a_out }, cutoff);
            // replace each component by a canonical representative of its side of the cutoff
            let rep = |v: f64| if v <= cutoff { cutoff / 2.0 } else { cutoff * 2.0 };
            prop_assert_eq!(class, classify_node(FlowIndex { a_in: rep(a_in), a_out: rep(a_out) }, cutoff));
        }
    }

    #[test]
    fn bulk_matches_per_account() {
        let records = crate::synth::gen_ledger(&crate::synth::SynthConfig {
            n_days: 30,
            txns_per_day: 40.0,
            n_accounts: 200,
            ..Default::default()
        })
        .unwrap();
        let bulk = build_all_daily_flows(&records);
        for (account, f) in &bulk {
            assert_eq!(f, &build_daily_flows(&records, account), "{account}");
        }
        // one day merged into a single transaction gives the same index
        let (account, f) = bulk.iter().max_by_key(|(_, f)| f.inflow.len() + f.outflow.len()).unwrap();
        let mut merged: Vec<TransactionRecord> = Vec::new();
        for (d, v) in &f.inflow {
            let ts = d.and_hms_opt(12, 0, 0).unwrap().and_utc();
            merged.push(TransactionRecord::xrp(ts, "elsewhere", account, *v as u64));
        }
        for (d, v) in &f.outflow {
            let ts = d.and_hms_opt(12, 0, 0).unwrap().and_utc();
            merged.push(TransactionRecord::xrp(ts, account, "elsewhere", *v as u64));
        }
        assert_eq!(default_flow_index(&build_daily_flows(&merged, account)), default_flow_index(f));
    }
}
