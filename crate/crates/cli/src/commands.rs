use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use mmev_core::amm_momentum::{run_scenario, Scenario};
use mmev_core::pbs_sim::{simulate as run_simulation, SimConfig};
use mmev_core::report::{
    compare_table, escalation_table, expected_table, fig3_table, histogram_table,
    momentum_blocks_table, quartile_table, read_expected_csv, read_histogram_csv, runs_table,
    share_table, write_table, write_with_sidecar, Metadata, OutputFormat, ReportBundle, Table,
};
use mmev_core::run_analysis::{
    detect_runs, payment_by_position, payment_by_position_per_entity, payment_by_run_length,
    payment_by_run_length_per_entity, run_histogram, slot_baselines, Run, RunHistogram,
};
use mmev_core::run_expectation::{
    compare_observed_expected, expected_all_entities, expected_runs_mc, ExpectationTable,
};
use mmev_core::trace_model::{
    market_shares, parse_bid_records, parse_slot_outcomes, write_bid_records, write_slot_outcomes,
    DenominatorMode, EntityMap, LineError, TraceFormat,
};
use mmev_core::{BidRecord, SlotOutcome};
use serde_json::Value;

use crate::{
    Classify, CompareArgs, ExpectedArgs, Failure, IngestArgs, MomentumArgs, ReportArgs, RunsArgs,
    SimulateArgs, TOOL,
};

/// Entity label used by `expected --p`.
const SINGLE_ENTITY: &str = "bernoulli";

fn metadata(command: &str) -> Metadata {
    Metadata::new(TOOL, env!("CARGO_PKG_VERSION"), command)
}

fn read(path: &Path, meta: &mut Metadata) -> Result<Vec<u8>, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .input()?;
    meta.input(path, &bytes);
    Ok(bytes)
}

fn warn_lines(path: &Path, errors: &[LineError]) {
    for e in errors {
        eprintln!("{TOOL}: warning: {}: {e}", path.display());
    }
}

/// Slot outcomes; malformed lines are reported and skipped.
fn load_outcomes(path: &Path, meta: &mut Metadata) -> Result<Vec<SlotOutcome>, Failure> {
    let bytes = read(path, meta)?;
    let parsed = parse_slot_outcomes(bytes.as_slice(), TraceFormat::from_path(path))
        .with_context(|| format!("{}", path.display()))
        .input()?;
    warn_lines(path, &parsed.errors);
    if let (Some(first), Some(last)) = (parsed.records.first(), parsed.records.last()) {
        meta.param("first_slot", first.slot)
            .param("last_slot", last.slot);
    }
    meta.param("slots", parsed.records.len() as u64);
    Ok(parsed.records)
}

fn load_bids(path: &Path, meta: &mut Metadata) -> Result<Vec<BidRecord>, Failure> {
    let bytes = read(path, meta)?;
    let parsed = parse_bid_records(bytes.as_slice(), TraceFormat::from_path(path))
        .with_context(|| format!("{}", path.display()))
        .input()?;
    warn_lines(path, &parsed.errors);
    Ok(parsed.records)
}

fn load_entities(path: Option<&Path>, meta: &mut Metadata) -> Result<EntityMap, Failure> {
    match path {
        None => Ok(EntityMap::default_builders()),
        Some(p) => {
            let bytes = read(p, meta)?;
            let text = String::from_utf8(bytes)
                .with_context(|| format!("{} is not UTF-8", p.display()))
                .input()?;
            EntityMap::parse(&text)
                .with_context(|| format!("{}", p.display()))
                .input()
        }
    }
}

fn write(
    dir: &Path,
    stem: &str,
    table: &Table,
    format: OutputFormat,
    meta: &Metadata,
) -> Result<(), Failure> {
    write_table(dir, stem, table, format, meta)
        .with_context(|| format!("cannot write {stem} to {}", dir.display()))
        .input()?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str, meta: &Metadata) -> Result<(), Failure> {
    write_with_sidecar(dir, name, text, meta)
        .with_context(|| format!("cannot write {name} to {}", dir.display()))
        .input()?;
    Ok(())
}

fn detect(outcomes: &[SlotOutcome], entities: &EntityMap) -> Result<Vec<Run>, Failure> {
    detect_runs(outcomes, entities).input()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TraceKind {
    Bids,
    Outcomes,
}

/// Guesses the record kind from the first non-empty line.
fn sniff(text: &str) -> Option<TraceKind> {
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    if first.contains("builder_pubkey") {
        Some(TraceKind::Bids)
    } else if first.contains("mode") {
        Some(TraceKind::Outcomes)
    } else {
        None
    }
}

pub fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let mut meta = metadata("ingest");
    let mut errors = Table::new(vec!["file", "line", "error"]);
    for path in &args.input {
        let bytes = read(path, &mut meta)?;
        let text = String::from_utf8_lossy(&bytes);
        let kind = sniff(&text)
            .ok_or_else(|| anyhow!("{}: cannot tell bids from slot outcomes", path.display()))
            .input()?;
        let format = TraceFormat::from_path(path);
        let mut out = Vec::new();
        let line_errors = match kind {
            TraceKind::Bids => {
                let parsed = parse_bid_records(bytes.as_slice(), format)
                    .context(path.display().to_string())
                    .input()?;
                write_bid_records(&mut out, &parsed.records, format).input()?;
                parsed.errors
            }
            TraceKind::Outcomes => {
                let parsed = parse_slot_outcomes(bytes.as_slice(), format)
                    .context(path.display().to_string())
                    .input()?;
                write_slot_outcomes(&mut out, &parsed.records, format).input()?;
                parsed.errors
            }
        };
        for e in &line_errors {
            eprintln!("{TOOL}: {}: {e}", path.display());
            errors.push(vec![
                path.display().to_string().as_str().into(),
                e.line.into(),
                e.kind.to_string().as_str().into(),
            ]);
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
        let ext = match format {
            TraceFormat::Csv => "csv",
            TraceFormat::Jsonl => "jsonl",
        };
        let name = format!("{stem}.normalized.{ext}");
        write_text(
            &args.common.out_dir,
            &name,
            &String::from_utf8(out).input()?,
            &meta,
        )?;
    }
    let error_count = errors.rows.len();
    write(
        &args.common.out_dir,
        "ingest_errors",
        &errors,
        args.common.format,
        &meta,
    )?;
    if error_count > 0 {
        return Err(Failure::Input(anyhow!("{error_count} malformed line(s)")));
    }
    Ok(())
}

struct RunTables {
    runs: Table,
    histogram: RunHistogram,
    fig2: Table,
    fig4: Table,
}

fn run_tables(runs: &[Run], min_length: usize) -> RunTables {
    RunTables {
        runs: runs_table(runs),
        histogram: run_histogram(runs),
        fig2: quartile_table(
            "k",
            &payment_by_run_length(runs),
            &payment_by_run_length_per_entity(runs),
        ),
        fig4: quartile_table(
            "position",
            &payment_by_position(runs, min_length),
            &payment_by_position_per_entity(runs, min_length),
        ),
    }
}

fn write_escalation(
    dir: &Path,
    format: OutputFormat,
    bids_path: &Path,
    runs: &[Run],
    threshold: f64,
    meta: &mut Metadata,
) -> Result<(), Failure> {
    let bids = load_bids(bids_path, meta)?;
    meta.param("escalation_threshold", threshold);
    let (table, skipped) = escalation_table(runs, &slot_baselines(&bids), threshold);
    if skipped > 0 {
        eprintln!("{TOOL}: warning: {skipped} run(s) lack bids for some slot; no escalation index");
    }
    write(dir, "escalation", &table, format, meta)
}

pub fn runs(args: RunsArgs) -> Result<(), Failure> {
    let mut meta = metadata("runs");
    let outcomes = load_outcomes(&args.analysis.input, &mut meta)?;
    let entities = load_entities(args.analysis.entities.as_deref(), &mut meta)?;
    let runs = detect(&outcomes, &entities)?;
    meta.param("min_length", args.min_length as u64);
    let dir = &args.common.out_dir;
    let format = args.common.format;
    if let Some(bids) = &args.bids {
        write_escalation(dir, format, bids, &runs, args.threshold, &mut meta)?;
    }
    let t = run_tables(&runs, args.min_length);
    write(dir, "runs", &t.runs, format, &meta)?;
    write(
        dir,
        "histogram",
        &histogram_table(&t.histogram),
        format,
        &meta,
    )?;
    write(dir, "fig2", &t.fig2, format, &meta)?;
    write(dir, "fig3", &fig3_table(&t.histogram), format, &meta)?;
    write(dir, "fig4", &t.fig4, format, &meta)
}

fn expectation_params(meta: &mut Metadata, kmax: usize, trials: u64, seed: u64) {
    meta.seed = Some(seed);
    meta.param("k_max", kmax as u64).param("trials", trials);
}

pub fn expected(args: ExpectedArgs) -> Result<(), Failure> {
    let mut meta = metadata("expected");
    expectation_params(&mut meta, args.kmax, args.trials, args.seed);
    let dir = &args.common.out_dir;
    let format = args.common.format;
    let table = match (&args.input, args.p) {
        (_, Some(p)) => {
            let slots = args
                .slots
                .ok_or_else(|| anyhow!("--p needs --slots"))
                .config()?;
            meta.param("p", p).param("n_slots", slots);
            let row = expected_runs_mc(p, slots, args.kmax, args.trials, args.seed).config()?;
            ExpectationTable {
                n_slots: slots,
                k_max: args.kmax,
                trials: args.trials,
                seed: args.seed,
                entities: [(SINGLE_ENTITY.to_owned(), row)].into(),
            }
        }
        (Some(input), None) => {
            let outcomes = load_outcomes(input, &mut meta)?;
            let entities = load_entities(args.entities.as_deref(), &mut meta)?;
            let shares = market_shares(&outcomes, &entities, args.denominator).input()?;
            let n = shares.denominator();
            meta.param("denominator", args.denominator.to_string())
                .param("n_slots", n);
            write(dir, "shares", &share_table(&shares), format, &meta)?;
            expected_all_entities(&shares, n, args.kmax, args.trials, args.seed).config()?
        }
        (None, None) => {
            return Err(Failure::Config(anyhow!(
                "give either --input or --p with --slots"
            )))
        }
    };
    write(dir, "expected", &expected_table(&table), format, &meta)
}

fn truncate_k(table: &mut ExpectationTable, kmax: usize) {
    table.k_max = table.k_max.min(kmax);
    for e in table.entities.values_mut() {
        e.cells.truncate(kmax);
    }
}

pub fn compare(args: CompareArgs) -> Result<(), Failure> {
    let mut meta = metadata("compare");
    let expected_bytes = read(&args.expected, &mut meta)?;
    let mut expected =
        read_expected_csv(&args.expected, &String::from_utf8_lossy(&expected_bytes)).input()?;
    if let Some(k) = args.kmax {
        truncate_k(&mut expected, k);
        meta.param("k_max", k as u64);
    }
    let observed = match (&args.observed, &args.input) {
        (Some(path), _) => {
            let bytes = read(path, &mut meta)?;
            read_histogram_csv(path, &String::from_utf8_lossy(&bytes)).input()?
        }
        (None, Some(input)) => {
            let outcomes = load_outcomes(input, &mut meta)?;
            let entities = load_entities(args.entities.as_deref(), &mut meta)?;
            run_histogram(&detect(&outcomes, &entities)?)
        }
        (None, None) => return Err(Failure::Config(anyhow!("give --observed or --input"))),
    };
    let rows = compare_observed_expected(&observed, &expected);
    write(
        &args.common.out_dir,
        "compare",
        &compare_table(&rows),
        args.common.format,
        &meta,
    )
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut meta = metadata("simulate");
    read(&args.config, &mut meta)?;
    let mut config = SimConfig::load(&args.config).config()?;
    config.seed = args.seed;
    meta.seed = Some(args.seed);
    let trace_format: TraceFormat = args
        .trace_format
        .parse()
        .map_err(|e: String| anyhow!(e))
        .config()?;
    let out = run_simulation(&config).config()?;
    meta.param("slots", config.total_slots())
        .param("builders", config.builders.len() as u64)
        .param("validators", out.validators.len() as u64);

    let dir = &args.common.out_dir;
    let ext = match trace_format {
        TraceFormat::Csv => "csv",
        TraceFormat::Jsonl => "jsonl",
    };
    let mut bids = Vec::new();
    write_bid_records(&mut bids, &out.bids, trace_format).input()?;
    write_text(
        dir,
        &format!("bids.{ext}"),
        &String::from_utf8(bids).input()?,
        &meta,
    )?;
    let mut outcomes = Vec::new();
    write_slot_outcomes(&mut outcomes, &out.outcomes, trace_format).input()?;
    write_text(
        dir,
        &format!("outcomes.{ext}"),
        &String::from_utf8(outcomes).input()?,
        &meta,
    )?;
    write_text(dir, "entities.txt", &out.entities.to_text(), &meta)?;
    let shares = market_shares(&out.outcomes, &out.entities, DenominatorMode::AllSlots).input()?;
    write(
        dir,
        "shares",
        &share_table(&shares),
        args.common.format,
        &meta,
    )
}

pub fn momentum(args: MomentumArgs) -> Result<(), Failure> {
    let mut meta = metadata("momentum");
    read(&args.scenario, &mut meta)?;
    let scenario = Scenario::load(&args.scenario).config()?;
    let outcome = run_scenario(&scenario).config()?;
    meta.param(
        "precision",
        serde_json::to_value(outcome.precision).unwrap_or(Value::Null),
    );
    let mut json = serde_json::to_string_pretty(&outcome).input()?;
    json.push('\n');
    let dir = &args.common.out_dir;
    write_text(dir, "momentum.json", &json, &meta)?;
    write(
        dir,
        "momentum_blocks",
        &momentum_blocks_table(&outcome),
        args.common.format,
        &meta,
    )
}

pub fn report(args: ReportArgs) -> Result<(), Failure> {
    let mut meta = metadata("report");
    expectation_params(&mut meta, args.kmax, args.trials, args.seed);
    let outcomes = load_outcomes(&args.analysis.input, &mut meta)?;
    let entities = load_entities(args.analysis.entities.as_deref(), &mut meta)?;
    let runs = detect(&outcomes, &entities)?;
    let shares = market_shares(&outcomes, &entities, args.denominator).input()?;
    let n = shares.denominator();
    meta.param("denominator", args.denominator.to_string())
        .param("n_slots", n);
    let expected = expected_all_entities(&shares, n, args.kmax, args.trials, args.seed).config()?;

    let dir = &args.common.out_dir;
    let format = args.common.format;
    if let Some(bids) = &args.bids {
        write_escalation(
            dir,
            format,
            bids,
            &runs,
            mmev_core::run_analysis::DEFAULT_ESCALATION_THRESHOLD,
            &mut meta,
        )?;
    }
    let t = run_tables(&runs, 2);
    let bundle = ReportBundle {
        expected: Some(expected_table(&expected)),
        histogram: histogram_table(&t.histogram),
        fig2: t.fig2,
        fig3: fig3_table(&t.histogram),
        fig4: t.fig4,
        comparison: Some(compare_table(&compare_observed_expected(
            &t.histogram,
            &expected,
        ))),
        metadata: meta.clone(),
    };
    bundle
        .write(dir, format)
        .with_context(|| format!("cannot write report to {}", dir.display()))
        .input()?;
    write(dir, "runs", &t.runs, format, &meta)?;
    write(dir, "shares", &share_table(&shares), format, &meta)
}
