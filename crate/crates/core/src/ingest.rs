//! Ledger ingestion: parsing, validation, filtering and yearly summaries.
//!
//! Two line-delimited input formats are accepted. The canonical one is CSV with
//! the header
//!
//! ```text
//! timestamp,source,destination,src_currency,dst_currency,amount_drops,delivered_drops
//! ```
//!
//! and timestamps written as `YYYY-MM-DDThh:mm:ssZ`. The alternative is one JSON
//! object per line with the same field names. Amounts are integer drops.
//!
//! A line that cannot be turned into a valid [`TransactionRecord`] does not stop
//! the stream: it is reported as a [`MalformedLine`] carrying its line number.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::NATIVE_CURRENCY;

pub const CSV_HEADER: [&str; 7] =
    ["timestamp", "source", "destination", "src_currency", "dst_currency", "amount_drops", "delivered_drops"];

/// A currency code of three or four ASCII alphanumerics, stored inline.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurrencyCode {
    bytes: [u8; 4],
    len: u8,
}

impl CurrencyCode {
    pub const XRP: CurrencyCode = CurrencyCode { bytes: *b"XRP\0", len: 3 };

    pub fn as_str(&self) -> &str {
        // only ASCII is ever stored
        std::str::from_utf8(&self.bytes[..self.len as usize]).unwrap_or_default()
    }

    pub fn is_native(&self) -> bool {
        self.as_str() == NATIVE_CURRENCY
    }
}

impl FromStr for CurrencyCode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let b = s.as_bytes();
        if !(3..=4).contains(&b.len()) || !b.iter().all(u8::is_ascii_alphanumeric) {
            return Err(format!("invalid currency code {s:?}"));
        }
        let mut bytes = [0u8; 4];
        bytes[..b.len()].copy_from_slice(b);
        Ok(CurrencyCode { bytes, len: b.len() as u8 })
    }
}

impl fmt::Display for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

/// One ledger entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransactionRecord {
    pub timestamp: DateTime<Utc>,
    pub source: String,
    pub destination: String,
    pub source_currency: CurrencyCode,
    pub destination_currency: CurrencyCode,
    pub amount_drops: u64,
    pub delivered_drops: u64,
}

impl TransactionRecord {
    /// A native-to-native full payment, the common case in tests and synthesis.
    pub fn xrp(timestamp: DateTime<Utc>, source: &str, destination: &str, drops: u64) -> Self {
        TransactionRecord {
            timestamp,
            source: source.to_owned(),
            destination: destination.to_owned(),
            source_currency: CurrencyCode::XRP,
            destination_currency: CurrencyCode::XRP,
            amount_drops: drops,
            delivered_drops: drops,
        }
    }

    /// UTC calendar date the record is attributed to.
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    pub fn year(&self) -> i32 {
        self.timestamp.year()
    }

    fn from_fields(fields: &[&str; 7]) -> std::result::Result<Self, String> {
        let timestamp = parse_timestamp(fields[0])?;
        let source = parse_account(fields[1])?;
        let destination = parse_account(fields[2])?;
        let source_currency = fields[3].parse()?;
        let destination_currency = fields[4].parse()?;
        let amount_drops = parse_drops(fields[5], "amount_drops")?;
        let delivered_drops = parse_drops(fields[6], "delivered_drops")?;
        Ok(TransactionRecord {
            timestamp,
            source: source.to_owned(),
            destination: destination.to_owned(),
            source_currency,
            destination_currency,
            amount_drops,
            delivered_drops,
        })
    }
}

/// Strict `YYYY-MM-DDThh:mm:ssZ`.
pub fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    let b = s.as_bytes();
    let bad = || format!("invalid timestamp {s:?}");
    if b.len() != 20 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' || b[16] != b':' || b[19] != b'Z'
    {
        return Err(bad());
    }
    let num =
        |range: std::ops::Range<usize>| -> std::result::Result<u32, String> {
            b[range].iter().try_fold(0u32, |acc, &c| {
                if c.is_ascii_digit() {
                    Ok(acc * 10 + (c - b'0') as u32)
                } else {
                    Err(bad())
                }
            })
        };
    let date = NaiveDate::from_ymd_opt(num(0..4)? as i32, num(5..7)?, num(8..10)?).ok_or_else(bad)?;
    let time = NaiveTime::from_hms_opt(num(11..13)?, num(14..16)?, num(17..19)?).ok_or_else(bad)?;
    Ok(date.and_time(time).and_utc())
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn parse_account(s: &str) -> std::result::Result<&str, String> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        Err(format!("invalid account id {s:?}"))
    } else {
        Ok(s)
    }
}

fn parse_drops(s: &str, field: &str) -> std::result::Result<u64, String> {
    if s.is_empty() || !s.bytes().all(|c| c.is_ascii_digit()) {
        return Err(format!("{field} {s:?} is not a non-negative integer"));
    }
    s.parse().map_err(|_| format!("{field} {s:?} out of range"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    JsonLines,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" | "json-lines" => Ok(InputFormat::JsonLines),
            other => Err(Error::Config(format!("unknown ledger format {other:?}"))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Csv => "csv",
            InputFormat::JsonLines => "jsonl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for MalformedLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerEntry {
    Record(TransactionRecord),
    Malformed(MalformedLine),
}

/// Lazily parses a ledger stream. Fatal errors (I/O, a wrong CSV header)
/// are yielded once and end the iteration.
pub fn parse_ledger<R: Read>(reader: R, format: InputFormat) -> LedgerReader<R> {
    let inner = match format {
        InputFormat::Csv => Inner::Csv {
            reader: csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .buffer_capacity(1 << 20)
                .from_reader(reader),
            row: csv::ByteRecord::new(),
            header_seen: false,
        },
        InputFormat::JsonLines => {
            Inner::Json { reader: BufReader::with_capacity(1 << 20, reader), buf: Vec::new(), line: 0 }
        }
    };
    LedgerReader { inner, done: false }
}

pub struct LedgerReader<R> {
    inner: Inner<R>,
    done: bool,
}

enum Inner<R> {
    Csv { reader: csv::Reader<R>, row: csv::ByteRecord, header_seen: bool },
    Json { reader: BufReader<R>, buf: Vec<u8>, line: u64 },
}

#[derive(Deserialize)]
struct JsonRow {
    timestamp: String,
    source: String,
    destination: String,
    src_currency: String,
    dst_currency: String,
    amount_drops: u64,
    delivered_drops: u64,
}

#[derive(Serialize)]
struct JsonRowRef<'a> {
    timestamp: String,
    source: &'a str,
    destination: &'a str,
    src_currency: &'a str,
    dst_currency: &'a str,
    amount_drops: u64,
    delivered_drops: u64,
}

impl<R: Read> LedgerReader<R> {
    fn next_csv(
        reader: &mut csv::Reader<R>,
        row: &mut csv::ByteRecord,
        header_seen: &mut bool,
    ) -> Option<Result<LedgerEntry>> {
        loop {
            match reader.read_byte_record(row) {
                Ok(false) => return None,
                Ok(true) => {}
                Err(e) => return Some(Err(e.into())),
            }
            let line = row.position().map_or(0, |p| p.line());
            if !*header_seen {
                *header_seen = true;
                let matches = row.len() == CSV_HEADER.len()
                    && row.iter().zip(CSV_HEADER).all(|(got, want)| got == want.as_bytes());
                if !matches {
                    return Some(Err(Error::Format(format!(
                        "expected CSV header {:?}, found {:?}",
                        CSV_HEADER.join(","),
                        String::from_utf8_lossy(row.as_slice())
                    ))));
                }
                continue;
            }
            return Some(Ok(csv_entry(row, line)));
        }
    }
}

fn csv_entry(row: &csv::ByteRecord, line: u64) -> LedgerEntry {
    let malformed = |reason: String| LedgerEntry::Malformed(MalformedLine { line, reason });
    if row.len() != CSV_HEADER.len() {
        return malformed(format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()));
    }
    let mut fields = [""; 7];
    for (slot, raw) in fields.iter_mut().zip(row.iter()) {
        match std::str::from_utf8(raw) {
            Ok(s) => *slot = s,
            Err(_) => return malformed("field is not valid UTF-8".into()),
        }
    }
    match TransactionRecord::from_fields(&fields) {
        Ok(rec) => LedgerEntry::Record(rec),
        Err(reason) => malformed(reason),
    }
}

fn json_entry(bytes: &[u8], line: u64) -> LedgerEntry {
    let malformed = |reason: String| LedgerEntry::Malformed(MalformedLine { line, reason });
    let row: JsonRow = match serde_json::from_slice(bytes) {
        Ok(row) => row,
        Err(e) => return malformed(e.to_string()),
    };
    let fields = [
        row.timestamp.as_str(),
        row.source.as_str(),
        row.destination.as_str(),
        row.src_currency.as_str(),
        row.dst_currency.as_str(),
        "0",
        "0",
    ];
    match TransactionRecord::from_fields(&fields) {
        Ok(mut rec) => {
            rec.amount_drops = row.amount_drops;
            rec.delivered_drops = row.delivered_drops;
            LedgerEntry::Record(rec)
        }
        Err(reason) => malformed(reason),
    }
}

impl<R: Read> Iterator for LedgerReader<R> {
    type Item = Result<LedgerEntry>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match &mut self.inner {
            Inner::Csv { reader, row, header_seen } => Self::next_csv(reader, row, header_seen),
            Inner::Json { reader, buf, line } => loop {
                buf.clear();
                match reader.read_until(b'\n', buf) {
                    Ok(0) => break None,
                    Ok(_) => {
                        *line += 1;
                        if buf.iter().all(u8::is_ascii_whitespace) {
                            continue;
                        }
                        break Some(Ok(json_entry(buf, *line)));
                    }
                    Err(e) => break Some(Err(e.into())),
                }
            },
        };
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Writes records in the given format, header included for CSV.
pub struct LedgerWriter<W: Write> {
    format: InputFormat,
    csv: Option<csv::Writer<W>>,
    json: Option<W>,
}

impl<W: Write> LedgerWriter<W> {
    pub fn new(writer: W, format: InputFormat) -> Result<Self> {
        match format {
            InputFormat::Csv => {
                let mut w = csv::WriterBuilder::new().buffer_capacity(1 << 20).from_writer(writer);
                w.write_record(CSV_HEADER)?;
                Ok(LedgerWriter { format, csv: Some(w), json: None })
            }
            InputFormat::JsonLines => Ok(LedgerWriter { format, csv: None, json: Some(writer) }),
        }
    }

    pub fn format(&self) -> InputFormat {
        self.format
    }

    pub fn write(&mut self, rec: &TransactionRecord) -> Result<()> {
        let ts = format_timestamp(&rec.timestamp);
        if let Some(w) = self.csv.as_mut() {
            let amount = rec.amount_drops.to_string();
            let delivered = rec.delivered_drops.to_string();
            w.write_record([
                ts.as_str(),
                &rec.source,
                &rec.destination,
                rec.source_currency.as_str(),
                rec.destination_currency.as_str(),
                &amount,
                &delivered,
            ])?;
        } else if let Some(w) = self.json.as_mut() {
            let row = JsonRowRef {
                timestamp: ts,
                source: &rec.source,
                destination: &rec.destination,
                src_currency: rec.source_currency.as_str(),
                dst_currency: rec.destination_currency.as_str(),
                amount_drops: rec.amount_drops,
                delivered_drops: rec.delivered_drops,
            };
            serde_json::to_writer(&mut *w, &row).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<W> {
        if let Some(w) = self.csv {
            return w.into_inner().map_err(|e| Error::Io(e.into_error()));
        }
        let mut w = self.json.expect("one writer is always present");
        w.flush()?;
        Ok(w)
    }
}

pub fn write_ledger<'a, W: Write>(
    writer: W,
    format: InputFormat,
    records: impl IntoIterator<Item = &'a TransactionRecord>,
) -> Result<W> {
    let mut w = LedgerWriter::new(writer, format)?;
    for rec in records {
        w.write(rec)?;
    }
    w.finish()
}

/// Reads a whole ledger, discarding malformed lines.
pub fn read_records<R: Read>(reader: R, format: InputFormat) -> Result<Vec<TransactionRecord>> {
    let mut out = Vec::new();
    for entry in parse_ledger(reader, format) {
        if let LedgerEntry::Record(rec) = entry? {
            out.push(rec);
        }
    }
    Ok(out)
}

pub fn is_xrp_xrp(rec: &TransactionRecord) -> bool {
    rec.source_currency.is_native() && rec.destination_currency.is_native()
}

/// A partial payment delivers a different amount than it states.
pub fn is_full_payment(rec: &TransactionRecord) -> bool {
    rec.amount_drops == rec.delivered_drops
}

pub fn filter_xrp_xrp<I>(records: I) -> impl Iterator<Item = TransactionRecord>
where
    I: IntoIterator<Item = TransactionRecord>,
{
    records.into_iter().filter(is_xrp_xrp)
}

pub fn filter_partial_payments<I>(records: I) -> impl Iterator<Item = TransactionRecord>
where
    I: IntoIterator<Item = TransactionRecord>,
{
    records.into_iter().filter(is_full_payment)
}

/// Record accounting for one ingestion run.
///
/// A record failing both filters is counted once, under `dropped_non_xrp`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: u64,
    pub kept_count: u64,
    pub dropped_non_xrp: u64,
    pub dropped_partial: u64,
    pub malformed_count: u64,
}

impl FilterReport {
    /// Counts one parsed entry and returns the record if it survives both filters.
    pub fn admit(&mut self, entry: LedgerEntry) -> Option<TransactionRecord> {
        self.input_count += 1;
        match entry {
            LedgerEntry::Malformed(_) => {
                self.malformed_count += 1;
                None
            }
            LedgerEntry::Record(rec) if !is_xrp_xrp(&rec) => {
                self.dropped_non_xrp += 1;
                None
            }
            LedgerEntry::Record(rec) if !is_full_payment(&rec) => {
                self.dropped_partial += 1;
                None
            }
            LedgerEntry::Record(rec) => {
                self.kept_count += 1;
                Some(rec)
            }
        }
    }

    pub fn merge(&mut self, other: &FilterReport) {
        self.input_count += other.input_count;
        self.kept_count += other.kept_count;
        self.dropped_non_xrp += other.dropped_non_xrp;
        self.dropped_partial += other.dropped_partial;
        self.malformed_count += other.malformed_count;
    }

    pub fn reconciles(&self) -> bool {
        self.input_count == self.kept_count + self.dropped_non_xrp + self.dropped_partial + self.malformed_count
    }
}

/// Maps account ids to dense integers so per-day and per-year sets stay small.
#[derive(Debug, Default)]
pub(crate) struct AccountInterner {
    ids: HashMap<Box<str>, u32>,
}

impl AccountInterner {
    pub(crate) fn intern(&mut self, account: &str) -> u32 {
        if let Some(&id) = self.ids.get(account) {
            return id;
        }
        let id = self.ids.len() as u32;
        self.ids.insert(account.into(), id);
        id
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct YearStats {
    pub txn_count: u64,
    pub sources: usize,
    pub destinations: usize,
    pub all_nodes: usize,
    pub total_drops: u128,
}

impl YearStats {
    pub fn total_xrp(&self) -> f64 {
        crate::drops_to_xrp(self.total_drops)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct YearlySummary {
    pub years: BTreeMap<i32, YearStats>,
    pub overall: YearStats,
}

#[derive(Default)]
struct NodeSets {
    txn_count: u64,
    total_drops: u128,
    sources: HashSet<u32>,
    destinations: HashSet<u32>,
}

impl NodeSets {
    fn add(&mut self, src: u32, dst: u32, drops: u64) {
        self.txn_count += 1;
        self.total_drops += drops as u128;
        self.sources.insert(src);
        self.destinations.insert(dst);
    }

    fn stats(&self) -> YearStats {
        YearStats {
            txn_count: self.txn_count,
            sources: self.sources.len(),
            destinations: self.destinations.len(),
            all_nodes: self.sources.union(&self.destinations).count(),
            total_drops: self.total_drops,
        }
    }
}

/// Streaming builder for [`YearlySummary`].
#[derive(Default)]
pub struct YearlyAccumulator {
    accounts: AccountInterner,
    years: BTreeMap<i32, NodeSets>,
    overall: NodeSets,
}

impl YearlyAccumulator {
    pub fn push(&mut self, rec: &TransactionRecord) {
        let src = self.accounts.intern(&rec.source);
        let dst = self.accounts.intern(&rec.destination);
        self.years.entry(rec.year()).or_default().add(src, dst, rec.amount_drops);
        self.overall.add(src, dst, rec.amount_drops);
    }

    pub fn finish(&self) -> YearlySummary {
        YearlySummary {
            years: self.years.iter().map(|(y, s)| (*y, s.stats())).collect(),
            overall: self.overall.stats(),
        }
    }
}

pub fn yearly_summary<'a>(records: impl IntoIterator<Item = &'a TransactionRecord>) -> YearlySummary {
    let mut acc = YearlyAccumulator::default();
    records.into_iter().for_each(|r| acc.push(r));
    acc.finish()
}

impl YearlySummary {
    /// CSV with one row per year and a final `all` row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["year", "txn_count", "sources", "destinations", "all_nodes", "total_xrp"])?;
        let rows = self
            .years
            .iter()
            .map(|(y, s)| (y.to_string(), s))
            .chain((!self.years.is_empty()).then(|| ("all".to_owned(), &self.overall)));
        for (label, s) in rows {
            w.write_record([
                label,
                s.txn_count.to_string(),
                s.sources.to_string(),
                s.destinations.to_string(),
                s.all_nodes.to_string(),
                crate::format_xrp(s.total_drops),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
