//! Deterministic synthetic ledgers with known stylized facts.
//!
//! Generation happens in two steps. A daily plan fixes how many transactions
//! each day carries (weekend dip, optional growth trend) and how the day's
//! amount level scales with that count (herding exponent plus lognormal
//! noise). The ledger then realizes the plan: amounts are Pareto draws above
//! the day's floor, counterparties come from a preferential-attachment urn,
//! and archetype accounts (pair nodes, bridges, even traders) are injected on
//! their own random stream.
//!
//! Every logical component draws from its own ChaCha stream derived from the
//! master seed, so changing archetype counts leaves the background untouched.

use chrono::{Datelike, Days, NaiveDate, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CurrencyCode, TransactionRecord};
use crate::DROPS_PER_XRP;

const STREAM_PLAN: u64 = 0;
const STREAM_AMOUNTS: u64 = 1;
const STREAM_ACCOUNTS: u64 = 2;
const STREAM_TIMES: u64 = 3;
const STREAM_CORRUPTION: u64 = 4;
const STREAM_ARCHETYPES: u64 = 5;

/// Amounts are capped here; far beyond any threshold the analyses use.
const MAX_AMOUNT_DROPS: f64 = 1e18;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchetypeCounts {
    pub pair: u32,
    pub bridge: u32,
    pub even_trader: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub n_days: u32,
    /// Mean weekday transaction count on the first day.
    pub txns_per_day: f64,
    /// Natural log of the activity ratio between the last and first day.
    pub activity_growth: f64,
    /// Approximate number of distinct background accounts.
    pub n_accounts: u32,
    pub pareto_alpha: f64,
    /// Pareto floor on the quietest day; busier days scale it up.
    pub amount_xmin_drops: u64,
    /// Fractional reduction of Saturday and Sunday activity.
    pub weekend_dip: f64,
    /// Exponent of daily amount against daily activity.
    pub herding_exponent: f64,
    /// Standard deviation of the lognormal noise on the daily amount.
    pub herding_noise: f64,
    pub archetypes: ArchetypeCounts,
    pub pair_amount_drops: u64,
    pub bridge_amount_drops: u64,
    /// Fraction of background records turned into partial payments.
    pub partial_payment_rate: f64,
    /// Fraction of background records given a non-native currency.
    pub non_xrp_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            n_days: 364,
            txns_per_day: 300.0,
            activity_growth: 0.0,
            n_accounts: 5_000,
            pareto_alpha: 1.0,
            amount_xmin_drops: 10_000 * DROPS_PER_XRP,
            weekend_dip: 0.3,
            herding_exponent: 1.5,
            herding_noise: 0.2,
            archetypes: ArchetypeCounts::default(),
            pair_amount_drops: 200_000_000_000 * DROPS_PER_XRP,
            bridge_amount_drops: 11_000_000_000 * DROPS_PER_XRP,
            partial_payment_rate: 0.0,
            non_xrp_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_days == 0 {
            return fail("n_days must be positive".into());
        }
        if !(self.txns_per_day > 0.0 && self.txns_per_day.is_finite()) {
            return fail(format!("txns_per_day {} must be positive", self.txns_per_day));
        }
        if !self.activity_growth.is_finite() || self.activity_growth.abs() > 20.0 {
            return fail(format!("activity_growth {} out of range", self.activity_growth));
        }
        if self.n_accounts < 2 {
            return fail("n_accounts must be at least 2".into());
        }
        if !(self.pareto_alpha > 0.0 && self.pareto_alpha.is_finite()) {
            return fail(format!("pareto_alpha {} must be positive", self.pareto_alpha));
        }
        if self.amount_xmin_drops == 0 {
            return fail("amount_xmin_drops must be positive".into());
        }
        if !(0.0..1.0).contains(&self.weekend_dip) {
            return fail(format!("weekend_dip {} outside [0, 1)", self.weekend_dip));
        }
        if !self.herding_exponent.is_finite() {
            return fail("herding_exponent must be finite".into());
        }
        if !(self.herding_noise >= 0.0 && self.herding_noise.is_finite()) {
            return fail(format!("herding_noise {} must be non-negative", self.herding_noise));
        }
        for (name, rate) in [("partial_payment_rate", self.partial_payment_rate), ("non_xrp_rate", self.non_xrp_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return fail(format!("{name} {rate} outside [0, 1]"));
            }
        }
        if self.pair_amount_drops < 2 || self.bridge_amount_drops == 0 {
            return fail("archetype amounts must be positive".into());
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Planned activity for one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DayPlan {
    pub date: NaiveDate,
    /// Number of background transactions (one per active user).
    pub users: u64,
    /// Planned amount level, `users^herding_exponent * exp(noise)`, arbitrary units.
    pub amount: f64,
    /// Multiplier on the Pareto floor, `>= 1`, minimum 1 over the plan.
    pub amount_scale: f64,
}

fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

pub fn gen_daily_plan(config: &SynthConfig) -> Result<Vec<DayPlan>> {
    config.validate()?;
    let mut rng = config.rng(STREAM_PLAN);
    let span = (config.n_days.max(2) - 1) as f64;
    let mut plan: Vec<DayPlan> = (0..config.n_days)
        .map(|t| {
            let date = config.start_date + Days::new(t as u64);
            let mut level = config.txns_per_day * (config.activity_growth * t as f64 / span).exp();
            if is_weekend(date) {
                level *= 1.0 - config.weekend_dip;
            }
            let users = (Poisson::new(level).map(|p| p.sample(&mut rng)).unwrap_or(level) as u64).max(1);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let ln_amount = config.herding_exponent * (users as f64).ln() + config.herding_noise * noise;
            DayPlan { date, users, amount: ln_amount.exp(), amount_scale: ln_amount - (users as f64).ln() }
        })
        .collect();
    let floor = plan.iter().map(|d| d.amount_scale).fold(f64::INFINITY, f64::min);
    for d in &mut plan {
        d.amount_scale = (d.amount_scale - floor).exp();
    }
    Ok(plan)
}

/// Urn over past endpoint appearances; new accounts enter with fixed probability.
struct AttachmentUrn {
    urn: Vec<u32>,
    created: u32,
    p_new: f64,
}

impl AttachmentUrn {
    fn draw(&mut self, rng: &mut ChaCha8Rng) -> u32 {
        if self.urn.is_empty() || rng.random::<f64>() < self.p_new {
            self.created += 1;
            self.created - 1
        } else {
            self.urn[rng.random_range(0..self.urn.len())]
        }
    }

    fn pair(&mut self, rng: &mut ChaCha8Rng) -> (u32, u32) {
        let src = self.draw(rng);
        let mut dst = self.draw(rng);
        for _ in 0..8 {
            if dst != src {
                break;
            }
            dst = self.draw(rng);
        }
        if dst == src {
            self.created += 1;
            dst = self.created - 1;
        }
        self.urn.push(src);
        self.urn.push(dst);
        (src, dst)
    }
}

pub fn background_account(id: u32) -> String {
    format!("r{id:07}")
}

const OTHER_CURRENCIES: [&str; 5] = ["USD", "CNY", "BTC", "JPY", "EUR"];

/// Generates the full ledger, sorted by timestamp.
pub fn gen_ledger(config: &SynthConfig) -> Result<Vec<TransactionRecord>> {
    let plan = gen_daily_plan(config)?;
    let total: u64 = plan.iter().map(|d| d.users).sum();
    let mut accounts = AttachmentUrn {
        urn: Vec::with_capacity(2 * total as usize),
        created: 0,
        p_new: (config.n_accounts as f64 / (2 * total) as f64).min(1.0),
    };
    let mut amount_rng = config.rng(STREAM_AMOUNTS);
    let mut account_rng = config.rng(STREAM_ACCOUNTS);
    let mut time_rng = config.rng(STREAM_TIMES);
    let mut corrupt_rng = config.rng(STREAM_CORRUPTION);
    let xmin = config.amount_xmin_drops as f64;
    let inv_alpha = 1.0 / config.pareto_alpha;

    let mut records = Vec::with_capacity(total as usize);
    for day in &plan {
        let midnight = day.date.and_time(NaiveTime::MIN).and_utc();
        let floor = xmin * day.amount_scale;
        for _ in 0..day.users {
            let u = 1.0 - amount_rng.random::<f64>();
            let amount = (floor * u.powf(-inv_alpha)).round().min(MAX_AMOUNT_DROPS) as u64;
            let (src, dst) = accounts.pair(&mut account_rng);
            let ts = midnight + chrono::Duration::seconds(time_rng.random_range(0..86_400));
            let mut rec = TransactionRecord::xrp(ts, &background_account(src), &background_account(dst), amount);
            if config.non_xrp_rate > 0.0 && corrupt_rng.random::<f64>() < config.non_xrp_rate {
                let code = OTHER_CURRENCIES[corrupt_rng.random_range(0..OTHER_CURRENCIES.len())];
                let code: CurrencyCode = code.parse().expect("static code");
                rec.destination_currency = code;
                if corrupt_rng.random::<bool>() {
                    rec.source_currency = code;
                }
            }
            if config.partial_payment_rate > 0.0 && corrupt_rng.random::<f64>() < config.partial_payment_rate {
                rec.delivered_drops = rec.amount_drops - corrupt_rng.random_range(1..=rec.amount_drops.max(2) / 2);
            }
            records.push(rec);
        }
    }

    inject_archetypes(config, accounts.created, &mut records);
    records.sort_by_key(|r| r.timestamp);
    Ok(records)
}

fn inject_archetypes(config: &SynthConfig, background: u32, records: &mut Vec<TransactionRecord>) {
    let mut rng = config.rng(STREAM_ARCHETYPES);
    let pick_background = |rng: &mut ChaCha8Rng| background_account(rng.random_range(0..background.max(1)));
    let last_start = config.n_days.saturating_sub(20).max(1);
    let day = |rng: &mut ChaCha8Rng| config.start_date + Days::new(rng.random_range(0..last_start) as u64);

    for i in 0..config.archetypes.pair {
        let params = ArchetypeParams {
            account: format!("pair{i:03}_dst"),
            counterparty: format!("pair{i:03}_src"),
            date: day(&mut rng),
            amount_drops: config.pair_amount_drops,
            minor_in_days: 17,
            minor_in_drops: DROPS_PER_XRP,
            minor_out_days: 2,
            minor_out_drops: 10 * DROPS_PER_XRP,
            minor_counterparty: pick_background(&mut rng),
            ..Default::default()
        };
        records.extend(gen_archetype_account(ArchetypeKind::PairReceiver, &params));
    }
    for i in 0..config.archetypes.bridge {
        let params = ArchetypeParams {
            account: format!("bridge{i:03}"),
            counterparty: format!("bridge{i:03}_up"),
            onward: format!("bridge{i:03}_down"),
            date: day(&mut rng),
            amount_drops: config.bridge_amount_drops,
            gap_days: 3,
            ..Default::default()
        };
        records.extend(gen_archetype_account(ArchetypeKind::Bridge, &params));
    }
    for i in 0..config.archetypes.even_trader {
        let params = ArchetypeParams {
            account: format!("even{i:03}"),
            counterparty: pick_background(&mut rng),
            onward: pick_background(&mut rng),
            date: day(&mut rng),
            amount_drops: config.amount_xmin_drops * 10,
            gap_days: 5,
            ..Default::default()
        };
        records.extend(gen_archetype_account(ArchetypeKind::EvenTrader, &params));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchetypeKind {
    /// Sends one massive amount as two transactions within a minute.
    PairSender,
    /// Receives one massive amount as two transactions within a minute.
    PairReceiver,
    /// Receives a large amount, forwards the same amount `gap_days` later.
    Bridge,
    /// Receives and sends the same amount on each of `gap_days` days.
    EvenTrader,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchetypeParams {
    pub account: String,
    /// Pair partner, bridge upstream, or even-trader inflow source.
    pub counterparty: String,
    /// Bridge downstream or even-trader outflow destination.
    pub onward: String,
    pub date: NaiveDate,
    pub amount_drops: u64,
    pub gap_days: u32,
    /// Small inflows on the days following `date`.
    pub minor_in_days: u32,
    pub minor_in_drops: u64,
    pub minor_out_days: u32,
    pub minor_out_drops: u64,
    pub minor_counterparty: String,
}

impl Default for ArchetypeParams {
    fn default() -> Self {
        ArchetypeParams {
            account: "archetype".into(),
            counterparty: "upstream".into(),
            onward: "downstream".into(),
            date: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            amount_drops: 0,
            gap_days: 1,
            minor_in_days: 0,
            minor_in_drops: 0,
            minor_out_days: 0,
            minor_out_drops: 0,
            minor_counterparty: "minor".into(),
        }
    }
}

/// Transactions for one archetype account; archetype amounts are used verbatim.
pub fn gen_archetype_account(kind: ArchetypeKind, p: &ArchetypeParams) -> Vec<TransactionRecord> {
    let at = |offset: u32, h: u32, m: u32, s: u32| {
        (p.date + Days::new(offset as u64)).and_hms_opt(h, m, s).expect("valid time").and_utc()
    };
    let mut out = Vec::new();
    let first = p.amount_drops / 2;
    let second = p.amount_drops - first;
    match kind {
        ArchetypeKind::PairSender | ArchetypeKind::PairReceiver => {
            let (src, dst) = if kind == ArchetypeKind::PairSender {
                (&p.account, &p.counterparty)
            } else {
                (&p.counterparty, &p.account)
            };
            out.push(TransactionRecord::xrp(at(0, 10, 0, 0), src, dst, first));
            out.push(TransactionRecord::xrp(at(0, 10, 0, 50), src, dst, second));
        }
        ArchetypeKind::Bridge => {
            out.push(TransactionRecord::xrp(at(0, 9, 0, 0), &p.counterparty, &p.account, p.amount_drops));
            out.push(TransactionRecord::xrp(at(p.gap_days, 9, 0, 0), &p.account, &p.onward, p.amount_drops));
        }
        ArchetypeKind::EvenTrader => {
            for d in 0..p.gap_days.max(1) {
                out.push(TransactionRecord::xrp(at(d, 9, 0, 0), &p.counterparty, &p.account, p.amount_drops));
                out.push(TransactionRecord::xrp(at(d, 15, 0, 0), &p.account, &p.onward, p.amount_drops));
            }
        }
    }
    for d in 0..p.minor_in_days {
        out.push(TransactionRecord::xrp(at(d + 1, 8, 0, 0), &p.minor_counterparty, &p.account, p.minor_in_drops));
    }
    for d in 0..p.minor_out_days {
        out.push(TransactionRecord::xrp(at(d + 1, 20, 0, 0), &p.account, &p.minor_counterparty, p.minor_out_drops));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_daily_flows, default_flow_index, FlowIndex};
    use crate::ingest::{is_full_payment, is_xrp_xrp, write_ledger, InputFormat};

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig {
            n_days: 60,
            archetypes: ArchetypeCounts { pair: 1, bridge: 1, even_trader: 1 },
            ..Default::default()
        };
        let a = write_ledger(Vec::new(), InputFormat::Csv, &gen_ledger(&cfg).unwrap()).unwrap();
        let b = write_ledger(Vec::new(), InputFormat::Csv, &gen_ledger(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = SynthConfig { seed: 2, ..cfg };
        assert_ne!(a, write_ledger(Vec::new(), InputFormat::Csv, &gen_ledger(&other).unwrap()).unwrap());
    }

    #[test]
    fn archetypes_do_not_perturb_background() {
        let base = SynthConfig { n_days: 40, ..Default::default() };
        let with = SynthConfig { archetypes: ArchetypeCounts { pair: 2, bridge: 1, even_trader: 1 }, ..base.clone() };
        let a = gen_ledger(&base).unwrap();
        let b: Vec<_> = gen_ledger(&with)
            .unwrap()
            .into_iter()
            .filter(|r| r.source.starts_with('r') && r.destination.starts_with('r'))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn amounts_respect_floor() {
        let cfg = SynthConfig { n_days: 50, ..Default::default() };
        let records = gen_ledger(&cfg).unwrap();
        assert!(records.iter().all(|r| r.amount_drops >= cfg.amount_xmin_drops));
        assert!(records.iter().all(|r| is_xrp_xrp(r) && is_full_payment(r)));
    }

    #[test]
    fn plan_has_weekend_dip_and_positive_scales() {
        let plan = gen_daily_plan(&SynthConfig { txns_per_day: 10_000.0, ..Default::default() }).unwrap();
        let mean = |weekend: bool| {
            let v: Vec<f64> = plan.iter().filter(|d| is_weekend(d.date) == weekend).map(|d| d.users as f64).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let ratio = mean(true) / mean(false);
        assert!((ratio - 0.7).abs() < 0.01, "{ratio}");
        let min = plan.iter().map(|d| d.amount_scale).fold(f64::INFINITY, f64::min);
        assert!((min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corruption_flags() {
        let cfg = SynthConfig { n_days: 30, partial_payment_rate: 0.1, non_xrp_rate: 0.1, ..Default::default() };
        let records = gen_ledger(&cfg).unwrap();
        let n = records.len() as f64;
        let partial = records.iter().filter(|r| !is_full_payment(r)).count() as f64 / n;
        let foreign = records.iter().filter(|r| !is_xrp_xrp(r)).count() as f64 / n;
        assert!((partial - 0.1).abs() < 0.02 && (foreign - 0.1).abs() < 0.02, "{partial} {foreign}");
        assert!(records.iter().all(|r| r.delivered_drops <= r.amount_drops));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { n_days: 0, ..Default::default() },
            SynthConfig { weekend_dip: 1.0, ..Default::default() },
            SynthConfig { pareto_alpha: 0.0, ..Default::default() },
            SynthConfig { n_accounts: 1, ..Default::default() },
            SynthConfig { non_xrp_rate: 1.5, ..Default::default() },
        ] {
            assert!(matches!(gen_ledger(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn config_json_defaults() {
        let cfg: SynthConfig = serde_json::from_str(r#"{"seed": 9, "archetypes": {"pair": 1}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.archetypes.pair, 1);
        assert_eq!(cfg.n_days, SynthConfig::default().n_days);
        assert!(serde_json::from_str::<SynthConfig>(r#"{"sead": 9}"#).is_err());
    }

    #[test]
    fn pair_receiver_regime() {
        let p = ArchetypeParams {
            amount_drops: 200_000_000_000 * DROPS_PER_XRP,
            minor_in_days: 17,
            minor_in_drops: DROPS_PER_XRP,
            ..Default::default()
        };
        let txns = gen_archetype_account(ArchetypeKind::PairReceiver, &p);
        let big: Vec<_> = txns.iter().filter(|r| r.source == p.counterparty).collect();
        assert_eq!(big.len(), 2);
        assert!((big[1].timestamp - big[0].timestamp).num_seconds() < 60);
        assert_eq!(big.iter().map(|r| r.amount_drops).sum::<u64>(), p.amount_drops);
        let a = default_flow_index(&build_daily_flows(&txns, &p.account));
        assert!(a.a_in > 1.0 && a.a_in < 1.001, "{a:?}");

        let bare = ArchetypeParams { minor_in_days: 0, ..p };
        let a = default_flow_index(&build_daily_flows(
            &gen_archetype_account(ArchetypeKind::PairReceiver, &bare),
            &bare.account,
        ));
        assert_eq!(a, FlowIndex { a_in: 1.0, a_out: 0.0 });
        let s = default_flow_index(&build_daily_flows(
            &gen_archetype_account(ArchetypeKind::PairSender, &bare),
            &bare.account,
        ));
        assert_eq!(s, FlowIndex { a_in: 0.0, a_out: 1.0 });
    }

    #[test]
    fn bridge_and_even_trader() {
        let p = ArchetypeParams { amount_drops: 11_000_000_000 * DROPS_PER_XRP, gap_days: 4, ..Default::default() };
        let txns = gen_archetype_account(ArchetypeKind::Bridge, &p);
        assert_eq!(txns.len(), 2);
        assert_eq!(default_flow_index(&build_daily_flows(&txns, &p.account)), FlowIndex { a_in: 1.0, a_out: 1.0 });
        let e = gen_archetype_account(
            ArchetypeKind::EvenTrader,
            &ArchetypeParams { amount_drops: 5, gap_days: 3, ..Default::default() },
        );
        let a = default_flow_index(&build_daily_flows(&e, "archetype"));
        assert!((a.a_in - 3.0).abs() < 1e-12 && (a.a_out - 3.0).abs() < 1e-12);
    }

    // Kolmogorov-Smirnov distance of an exact-Pareto sample against its target CDF.
    fn ks_pareto(values: &mut [f64], xmin: f64, alpha: f64) -> f64 {
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        values
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (xmin / x).powf(alpha);
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn generated_tail_matches_target() {
        // constant daily scale: every amount is a Pareto draw above the configured floor
        let flat = SynthConfig {
            n_days: 334,
            txns_per_day: 300.0,
            herding_exponent: 1.0,
            herding_noise: 0.0,
            ..Default::default()
        };
        let records = gen_ledger(&flat).unwrap();
        assert!(records.len() > 90_000);
        let mut v: Vec<f64> = records.iter().map(|r| r.amount_drops as f64).collect();
        let d = ks_pareto(&mut v, flat.amount_xmin_drops as f64, 1.0);
        assert!(d < 0.02, "{d}");

        // with herding, the tail above the largest daily floor is exactly Pareto
        let cfg = SynthConfig { n_days: 334, ..Default::default() };
        let plan = gen_daily_plan(&cfg).unwrap();
        let top = plan.iter().map(|d| d.amount_scale).fold(0.0, f64::max) * cfg.amount_xmin_drops as f64;
        let mut tail: Vec<f64> =
            gen_ledger(&cfg).unwrap().iter().map(|r| r.amount_drops as f64).filter(|&x| x > top).collect();
        assert!(tail.len() > 10_000);
        let d = ks_pareto(&mut tail, top, 1.0);
        assert!(d < 0.02, "{d}");
    }
}
