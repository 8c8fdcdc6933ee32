use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use ledger_flow::flow::{flow_table, read_flow_table, write_flow_table, FlowBook, FlowIndex};
use ledger_flow::ingest::{
    parse_ledger, FilterReport, InputFormat, LedgerEntry, LedgerWriter, TransactionRecord, YearlyAccumulator,
};
use ledger_flow::network::{degree_ccdf, export_graph, induced_network, walnut_decomposition, Direction, GraphFormat};
use ledger_flow::stats::{
    dft_magnitudes, empirical_ccdf, pareto_index, powerlaw_correlation_fit, weekly_peak_score, CcdfCurve,
    DailyAccumulator, FitMethod, WEEKLY_THRESHOLD,
};
use ledger_flow::synth::{gen_ledger, SynthConfig};
use ledger_flow::{drops_to_xrp, xrp_to_drops};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{digest_file, HashingReader, ManifestBuilder};
use crate::{
    Analysis, Cli, CliError, CliResult, Command, DailyMetric, GraphFormatArg, InputArgs, LedgerFormat, SynthArgs,
};

/// Malformed-line notices logged per input before going quiet.
const MAX_LOGGED_MALFORMED: u64 = 20;

pub(crate) fn execute(cli: &Cli) -> CliResult<()> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Ingest { input, format } => ingest(out, input, *format),
        Command::Analyze { input, which, xmin_xrp, year, series } => {
            analyze(out, input, *which, *xmin_xrp, *year, *series)
        }
        Command::Flowindex { input, order_n, cutoff } => flowindex(out, input, *order_n, *cutoff),
        Command::Network { input, threshold_xrp, flow_table, order_n, cutoff, graph_format } => {
            network(out, input, threshold_xrp, flow_table.as_deref(), *order_n, *cutoff, graph_format)
        }
        Command::Synth(args) => synth(out, args),
    }
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_owned()).unwrap_or_default()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::with_capacity(1 << 20, File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Streams one ledger file through both filters, handing kept records to `sink`.
///
/// Returns the filter accounting and the SHA-256 of the file bytes.
fn stream_filtered(
    path: &Path,
    format: LedgerFormat,
    mut sink: impl FnMut(TransactionRecord) -> CliResult<()>,
) -> CliResult<(FilterReport, String)> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut hashing = HashingReader::new(file);
    let mut report = FilterReport::default();
    for entry in parse_ledger(&mut hashing, format.into()) {
        let entry = entry.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if let LedgerEntry::Malformed(bad) = &entry {
            if report.malformed_count < MAX_LOGGED_MALFORMED {
                warn!("{}: {bad}", path.display());
            }
        }
        if let Some(rec) = report.admit(entry) {
            sink(rec)?;
        }
    }
    let digest = hashing.finish()?;
    if report.malformed_count > MAX_LOGGED_MALFORMED {
        warn!("{}: {} malformed lines in total", path.display(), report.malformed_count);
    }
    Ok((report, digest))
}

fn ingest(out: &Path, inputs: &[std::path::PathBuf], format: LedgerFormat) -> CliResult<()> {
    let mut manifest =
        ManifestBuilder::new(out, "ingest", json!({ "format": value_name(&format), "inputs": inputs.len() }));
    let mut writer = LedgerWriter::new(create(&manifest.output("filtered.csv"))?, InputFormat::Csv)?;
    let mut yearly = YearlyAccumulator::default();
    let mut total = FilterReport::default();
    for path in inputs {
        let (report, digest) = stream_filtered(path, format, |rec| {
            yearly.push(&rec);
            writer.write(&rec)?;
            Ok(())
        })?;
        info!("{}: kept {} of {}", path.display(), report.kept_count, report.input_count);
        total.merge(&report);
        manifest.input(path, digest);
    }
    writer.finish()?.flush()?;
    write_json(&manifest.output("filter_report.json"), &total)?;
    yearly.finish().write_csv(create(&manifest.output("yearly_summary.csv"))?)?;
    manifest.write("ingest.manifest.json")?;
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    alpha: f64,
    stderr: f64,
    n_tail: usize,
}

fn analyze(
    out: &Path,
    input: &InputArgs,
    which: Analysis,
    xmin_xrp: f64,
    year: Option<i32>,
    series: DailyMetric,
) -> CliResult<()> {
    let which_name = value_name(&which);
    let mut params = json!({
        "input": input.input.display().to_string(),
        "format": value_name(&input.format),
        "which": which_name,
    });
    match which {
        Analysis::Ccdf | Analysis::Pareto => {
            params["year"] = json!(year);
            if which == Analysis::Pareto {
                params["xmin_xrp"] = json!(xmin_xrp);
            }
        }
        Analysis::Dft => params["series"] = json!(value_name(&series)),
        Analysis::Daily | Analysis::Herding => {}
    }
    let stem = format!("analyze_{which_name}");
    let mut manifest = ManifestBuilder::new(out, "analyze", params);
    let csv_path = manifest.output(&format!("{stem}.csv"));
    let json_path = manifest.output(&format!("{stem}.json"));

    let sidecar = match which {
        Analysis::Ccdf | Analysis::Pareto => {
            let mut amounts = Vec::new();
            let (_, digest) = stream_filtered(&input.input, input.format, |rec| {
                if year.is_none_or(|y| rec.year() == y) {
                    amounts.push(drops_to_xrp(rec.amount_drops as u128));
                }
                Ok(())
            })?;
            manifest.input(&input.input, digest);
            if which == Analysis::Ccdf {
                let curve = empirical_ccdf(&amounts)?;
                curve.write_csv(create(&csv_path)?)?;
                json!({
                    "analysis": "ccdf",
                    "year": year,
                    "sample_size": curve.sample_size,
                    "distinct_values": curve.points.len(),
                    "min_xrp": curve.points.first().map(|p| p.0),
                    "max_xrp": curve.points.last().map(|p| p.0),
                })
            } else {
                let hill = pareto_index(&amounts, xmin_xrp, FitMethod::Hill)?;
                let ols = pareto_index(&amounts, xmin_xrp, FitMethod::LoglogOls)?;
                let tail: Vec<f64> = amounts.iter().copied().filter(|&v| v > xmin_xrp).collect();
                empirical_ccdf(&tail)?.write_csv(create(&csv_path)?)?;
                json!({
                    "analysis": "pareto",
                    "year": year,
                    "xmin_xrp": xmin_xrp,
                    "sample_size": amounts.len(),
                    "method": hill.method,
                    "alpha": hill.alpha,
                    "stderr": hill.stderr,
                    "n_tail": hill.n_tail,
                    "hill": FitSummary { alpha: hill.alpha, stderr: hill.stderr, n_tail: hill.n_tail },
                    "loglog_ols": FitSummary { alpha: ols.alpha, stderr: ols.stderr, n_tail: ols.n_tail },
                })
            }
        }
        Analysis::Daily | Analysis::Dft | Analysis::Herding => {
            let mut acc = DailyAccumulator::default();
            let (_, digest) = stream_filtered(&input.input, input.format, |rec| {
                acc.push(&rec);
                Ok(())
            })?;
            manifest.input(&input.input, digest);
            let daily = acc.finish();
            if daily.is_empty() {
                return Err(CliError::Domain("daily series of an empty ledger".into()));
            }
            match which {
                Analysis::Daily => {
                    daily.write_csv(create(&csv_path)?)?;
                    json!({
                        "analysis": "daily",
                        "n_days": daily.len(),
                        "first_date": daily.days.keys().next(),
                        "last_date": daily.days.keys().next_back(),
                        "txn_count": daily.days.values().map(|d| d.txn_count).sum::<u64>(),
                        "total_drops": daily.total_drops().to_string(),
                    })
                }
                Analysis::Dft => {
                    let values = match series {
                        DailyMetric::TxnCount => daily.txn_counts(),
                        DailyMetric::Users => daily.user_counts(),
                        DailyMetric::Amount => daily.totals_xrp(),
                    };
                    let bins = dft_magnitudes(&values)?;
                    let score = weekly_peak_score(&values)?;
                    let peak = bins
                        .iter()
                        .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude).then(b.k.cmp(&a.k)))
                        .expect("series of at least two weeks has bins");
                    let mut w = csv::Writer::from_writer(create(&csv_path)?);
                    w.write_record(["k", "period", "magnitude"])?;
                    for b in &bins {
                        w.write_record([b.k.to_string(), b.period.to_string(), b.magnitude.to_string()])?;
                    }
                    w.flush()?;
                    json!({
                        "analysis": "dft",
                        "series": value_name(&series),
                        "n_days": values.len(),
                        "peak_k": peak.k,
                        "peak_period": peak.period,
                        "peak_magnitude": peak.magnitude,
                        "weekly_score": score,
                        "weekly_threshold": WEEKLY_THRESHOLD,
                        "weekly_detected": score > WEEKLY_THRESHOLD,
                    })
                }
                _ => {
                    let active: Vec<(String, f64, f64)> = daily
                        .days
                        .iter()
                        .filter(|(_, d)| d.n_users > 0 && d.total_drops > 0)
                        .map(|(date, d)| (date.to_string(), d.n_users as f64, drops_to_xrp(d.total_drops)))
                        .collect();
                    let users: Vec<f64> = active.iter().map(|a| a.1).collect();
                    let amounts: Vec<f64> = active.iter().map(|a| a.2).collect();
                    let fit = powerlaw_correlation_fit(&users, &amounts)?;
                    let mut w = csv::Writer::from_writer(create(&csv_path)?);
                    w.write_record(["date", "users", "amount_xrp"])?;
                    for (date, u, a) in &active {
                        w.write_record([date.clone(), u.to_string(), a.to_string()])?;
                    }
                    w.flush()?;
                    json!({
                        "analysis": "herding",
                        "exponent": fit.exponent,
                        "per_user_exponent": fit.exponent - 1.0,
                        "intercept": fit.intercept,
                        "stderr": fit.stderr,
                        "n_points": fit.n_points,
                    })
                }
            }
        }
    };
    write_json(&json_path, &sidecar)?;
    manifest.write(&format!("{stem}.manifest.json"))?;
    Ok(())
}

fn flowindex(out: &Path, input: &InputArgs, order_n: u32, cutoff: f64) -> CliResult<()> {
    check_flow_params(order_n, cutoff)?;
    let mut manifest = ManifestBuilder::new(
        out,
        "flowindex",
        json!({
            "input": input.input.display().to_string(),
            "format": value_name(&input.format),
            "order_n": order_n,
            "cutoff": cutoff,
        }),
    );
    let mut book = FlowBook::default();
    let (_, digest) = stream_filtered(&input.input, input.format, |rec| {
        book.push(&rec);
        Ok(())
    })?;
    manifest.input(&input.input, digest);
    let rows = flow_table(&book.finish(), order_n, cutoff)?;
    write_flow_table(create(&manifest.output("flow_index.csv"))?, &rows)?;
    manifest.write("flowindex.manifest.json")?;
    Ok(())
}

fn check_flow_params(order_n: u32, cutoff: f64) -> CliResult<()> {
    if order_n < 2 {
        return Err(CliError::Config(format!("--order-n {order_n} must be at least 2")));
    }
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(CliError::Config(format!("--cutoff {cutoff} must be positive")));
    }
    Ok(())
}

/// File-name tag for a threshold, e.g. `10000000` for 10^7 XRP.
fn threshold_tag(xrp: f64) -> String {
    format!("{xrp}")
}

fn network(
    out: &Path,
    input: &InputArgs,
    thresholds_xrp: &[f64],
    flow_table_path: Option<&Path>,
    order_n: u32,
    cutoff: f64,
    formats: &[GraphFormatArg],
) -> CliResult<()> {
    check_flow_params(order_n, cutoff)?;
    if let Some(bad) = thresholds_xrp.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(CliError::Config(format!("--threshold-xrp {bad} must be positive")));
    }
    let mut thresholds: Vec<(f64, u64)> = thresholds_xrp.iter().map(|&t| (t, xrp_to_drops(t).max(1))).collect();
    thresholds.sort_by_key(|t| t.1);
    thresholds.dedup_by_key(|t| t.1);
    let mut formats: Vec<GraphFormat> = formats
        .iter()
        .map(|f| match f {
            GraphFormatArg::Dot => GraphFormat::Dot,
            GraphFormatArg::Json => GraphFormat::Json,
        })
        .collect();
    formats.sort_by_key(|f| f.extension());
    formats.dedup();

    let mut manifest = ManifestBuilder::new(
        out,
        "network",
        json!({
            "input": input.input.display().to_string(),
            "format": value_name(&input.format),
            "threshold_xrp": thresholds.iter().map(|t| t.0).collect::<Vec<_>>(),
            "flow_table": flow_table_path.map(|p| p.display().to_string()),
            "order_n": order_n,
            "cutoff": cutoff,
            "graph_format": formats.iter().map(|f| f.extension()).collect::<Vec<_>>(),
        }),
    );

    // Pass 1: largest transaction touching each account decides its big-node thresholds.
    let mut largest: HashMap<String, u64> = HashMap::new();
    let (_, digest) = stream_filtered(&input.input, input.format, |rec| {
        for account in [&rec.source, &rec.destination] {
            match largest.get_mut(account.as_str()) {
                Some(m) => *m = (*m).max(rec.amount_drops),
                None => {
                    largest.insert(account.clone(), rec.amount_drops);
                }
            }
        }
        Ok(())
    })?;
    manifest.input(&input.input, digest);
    let lowest = thresholds[0].1;
    let candidates: BTreeSet<String> = largest.into_iter().filter(|(_, m)| *m >= lowest).map(|(a, _)| a).collect();

    // Pass 2: transactions among candidates, plus full-history flows when no table is given.
    let mut among = Vec::new();
    let mut book = flow_table_path.is_none().then(FlowBook::default);
    stream_filtered(&input.input, input.format, |rec| {
        if let Some(book) = book.as_mut() {
            book.push(&rec);
        }
        if candidates.contains(&rec.source) && candidates.contains(&rec.destination) {
            among.push(rec);
        }
        Ok(())
    })?;

    let flow: BTreeMap<String, FlowIndex> = match (book, flow_table_path) {
        (Some(book), _) => {
            flow_table(&book.finish(), order_n, cutoff)?.into_iter().map(|r| (r.account.clone(), r.index())).collect()
        }
        (None, Some(path)) => {
            let digest = digest_file(path)?;
            manifest.input(path, digest);
            read_flow_table(File::open(path)?)?.into_iter().map(|r| (r.account.clone(), r.index())).collect()
        }
        (None, None) => unreachable!("flow book exists whenever no table is given"),
    };

    let mut summary = csv::Writer::from_writer(create(&manifest.output("network_summary.csv"))?);
    summary.write_record([
        "threshold_xrp",
        "threshold_drops",
        "nodes",
        "edges",
        "txns",
        "total_drops",
        "in",
        "out",
        "body",
        "dormant",
    ])?;
    let mut cross = csv::Writer::from_writer(create(&manifest.output("walnut_cross.csv"))?);
    cross.write_record(["threshold_xrp", "src_class", "dst_class", "pairs", "txns", "total_drops"])?;

    for &(xrp, drops) in &thresholds {
        let nodes: BTreeSet<String> = among
            .iter()
            .filter(|r| r.amount_drops >= drops)
            .flat_map(|r| [r.source.clone(), r.destination.clone()])
            .collect();
        let net = induced_network(&among, &nodes, drops);
        let partition = walnut_decomposition(&net, &flow, cutoff)?;
        let tag = threshold_tag(xrp);
        for format in &formats {
            let bytes = export_graph(&net, &partition, *format)?;
            std::fs::write(manifest.output(&format!("network_{tag}.{}", format.extension())), bytes)?;
        }
        for (direction, name) in [(Direction::In, "in"), (Direction::Out, "out")] {
            let curve = if net.nodes.is_empty() { CcdfCurve::default() } else { degree_ccdf(&net, direction)?.curve };
            curve.write_csv(create(&manifest.output(&format!("degree_{name}_{tag}.csv")))?)?;
        }
        summary.write_record([
            xrp.to_string(),
            drops.to_string(),
            net.node_count().to_string(),
            net.edge_count().to_string(),
            net.txn_count().to_string(),
            net.total_drops().to_string(),
            partition.in_set.len().to_string(),
            partition.out_set.len().to_string(),
            partition.body_set.len().to_string(),
            partition.dormant_set.len().to_string(),
        ])?;
        for ((src, dst), c) in &partition.cross {
            cross.write_record([
                xrp.to_string(),
                src.to_string(),
                dst.to_string(),
                c.pair_count.to_string(),
                c.txn_count.to_string(),
                c.total_drops.to_string(),
            ])?;
        }
        info!("threshold {xrp} XRP: {} nodes, {} edges", net.node_count(), net.edge_count());
    }
    summary.flush()?;
    cross.flush()?;
    manifest.write("network.manifest.json")?;
    Ok(())
}

fn synth(out: &Path, args: &SynthArgs) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SynthConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.n_days {
        config.n_days = v;
    }
    if let Some(v) = args.n_accounts {
        config.n_accounts = v;
    }
    if let Some(v) = args.txns_per_day {
        config.txns_per_day = v;
    }
    if let Some(v) = args.pareto_alpha {
        config.pareto_alpha = v;
    }
    if let Some(v) = args.weekend_dip {
        config.weekend_dip = v;
    }
    if let Some(v) = args.pairs {
        config.archetypes.pair = v;
    }
    if let Some(v) = args.bridges {
        config.archetypes.bridge = v;
    }
    if let Some(v) = args.even_traders {
        config.archetypes.even_trader = v;
    }
    config.validate()?;

    let mut manifest = ManifestBuilder::new(
        out,
        "synth",
        json!({
            "config": config,
            "output_format": value_name(&args.output_format),
        }),
    );
    if let Some(path) = &args.config {
        let digest = digest_file(path)?;
        manifest.input(path, digest);
    }
    let records = gen_ledger(&config)?;
    let format: InputFormat = args.output_format.into();
    let name = format!("ledger.{format}");
    let mut writer = LedgerWriter::new(create(&manifest.output(&name))?, format)?;
    for rec in &records {
        writer.write(rec)?;
    }
    writer.finish()?.flush()?;
    write_json(&manifest.output("synth_config.json"), &config)?;
    info!("wrote {} records to {name}", records.len());
    manifest.write("synth.manifest.json")?;
    Ok(())
}
