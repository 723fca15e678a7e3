use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use twtl::formula::{horizon, parse as parse_formula, validate, Formula, Severity};
use twtl::monitor::{EtaExtremes, Monitor, MonitorOptions, StepRecord, Verdict, CSV_HEADER};
use twtl::oracle::{oracle_bool, oracle_eta, oracle_rho};
use twtl::semantics::{self, bool_sat, EvalConfig};
use twtl::trace::{load_table, load_trace, PredicateTable, TraceReader, Word, GRID_TOLERANCE};

use crate::{CheckArgs, EvalArgs, FormulaSource, MonitorArgs, OutputFormat, ParseArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATED: u8 = 1;
pub const EXIT_ERROR: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

pub fn load_formula(source: &FormulaSource) -> Result<Formula> {
    let (text, origin) = match (&source.formula, &source.expr) {
        (Some(path), _) => (
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            path.display().to_string(),
        ),
        (None, Some(text)) => (text.clone(), "<expr>".to_string()),
        (None, None) => bail!("no formula given"),
    };
    parse_formula(&text).with_context(|| format!("parsing {origin}"))
}

/// Reports diagnostics on stderr; fails if any is an error.
fn check_diagnostics(f: &Formula, table: &PredicateTable, dt: f64) -> Result<()> {
    let diags = validate(f, table, dt);
    for d in &diags {
        eprintln!("{d}");
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        bail!("formula failed validation");
    }
    Ok(())
}

fn horizon_samples(f: &Formula, dt: f64) -> usize {
    (horizon(f, dt).value() / dt).round() as usize + 1
}

pub fn parse(args: &ParseArgs) -> Result<u8> {
    let f = load_formula(&args.source)?;
    println!("{f}");
    println!("horizon {}", horizon(&f, args.dt));
    if let Some(path) = &args.config {
        let table = load_table(path)?;
        let diags = validate(&f, &table, args.dt);
        for d in &diags {
            println!("{d}");
        }
        if diags.iter().any(|d| d.severity == Severity::Error) {
            return Ok(EXIT_ERROR);
        }
    }
    Ok(EXIT_OK)
}

struct Loaded {
    formula: Formula,
    table: PredicateTable,
    word: Word,
    cfg: EvalConfig,
}

fn load(args: &EvalArgs) -> Result<Loaded> {
    let formula = load_formula(&args.source)?;
    let table = load_table(&args.config)?;
    check_diagnostics(&formula, &table, args.dt)?;
    let cfg = EvalConfig::new(args.rho_bot, args.rho_top, args.dt)?;
    let mut word = load_trace(&args.trace, args.dt)?;
    let needed = horizon_samples(&formula, args.dt);
    if word.len() < needed {
        log::warn!(
            "trace has {} samples, the formula horizon needs {needed}",
            word.len()
        );
    } else if word.len() > needed {
        log::info!("evaluating the first {needed} of {} samples", word.len());
        word = word.truncated(needed);
    }
    Ok(Loaded {
        formula,
        table,
        word,
        cfg,
    })
}

pub fn check(args: &CheckArgs) -> Result<u8> {
    let l = load(&args.eval)?;
    let sat = bool_sat(&l.word, &l.formula, &l.table)?;
    let r = semantics::rho(&l.word, &l.formula, &l.table, &l.cfg)?;
    let verdict = if sat { "sat" } else { "unsat" };
    if args.rho_only {
        println!("{verdict} rho={r}");
    } else {
        let e = semantics::eta(&l.word, &l.formula, &l.table, &l.cfg)?;
        println!("{verdict} rho={r} eta={e}");
    }
    Ok(if sat { EXIT_OK } else { EXIT_VIOLATED })
}

pub fn rho(args: &EvalArgs) -> Result<u8> {
    let l = load(args)?;
    println!("{}", semantics::rho(&l.word, &l.formula, &l.table, &l.cfg)?);
    Ok(EXIT_OK)
}

pub fn eta(args: &EvalArgs) -> Result<u8> {
    let l = load(args)?;
    println!("{}", semantics::eta(&l.word, &l.formula, &l.table, &l.cfg)?);
    Ok(EXIT_OK)
}

pub fn oracle(args: &EvalArgs) -> Result<u8> {
    let l = load(args)?;
    let lib = (
        bool_sat(&l.word, &l.formula, &l.table)?,
        semantics::rho(&l.word, &l.formula, &l.table, &l.cfg)?,
        semantics::eta(&l.word, &l.formula, &l.table, &l.cfg)?,
    );
    let reference = (
        oracle_bool(&l.word, &l.formula, &l.table)?,
        oracle_rho(&l.word, &l.formula, &l.table, &l.cfg)?,
        oracle_eta(&l.word, &l.formula, &l.table)?,
    );
    println!("library bool={} rho={} eta={}", lib.0, lib.1, lib.2);
    println!(
        "oracle  bool={} rho={} eta={}",
        reference.0, reference.1, reference.2
    );
    let agree = lib.0 == reference.0
        && (lib.1 - reference.1).abs() <= 1e-9
        && (lib.2 - reference.2).abs() <= 1e-9;
    println!("{}", if agree { "agree" } else { "MISMATCH" });
    Ok(if agree { EXIT_OK } else { EXIT_VIOLATED })
}

/// Writes monitor records in the chosen format.
pub struct RecordSink {
    out: Box<dyn Write>,
    format: OutputFormat,
    flush_each: bool,
}

impl RecordSink {
    pub fn new(out: Box<dyn Write>, format: OutputFormat, flush_each: bool) -> Result<Self> {
        let mut sink = Self {
            out,
            format,
            flush_each,
        };
        if let OutputFormat::Csv = format {
            writeln!(sink.out, "{CSV_HEADER}")?;
        }
        Ok(sink)
    }

    pub fn to_path(path: &Path, format: OutputFormat) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Self::new(Box::new(BufWriter::new(file)), format, false)
    }

    pub fn write(&mut self, record: &StepRecord) -> Result<()> {
        let line = match self.format {
            OutputFormat::Csv => record.to_csv_row(),
            OutputFormat::Jsonl => record.to_json_line(),
        };
        writeln!(self.out, "{line}")?;
        if self.flush_each {
            self.out.flush()?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Sample indices selected by a time filter.
pub struct TauFilter {
    times: Vec<f64>,
    indices: Option<Vec<usize>>,
}

impl TauFilter {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            indices: None,
        }
    }

    /// Resolves times against the sample grid once the start time is known.
    pub fn resolve(&mut self, t0: f64, dt: f64) -> Result<()> {
        let mut indices = Vec::with_capacity(self.times.len());
        for &t in &self.times {
            let k = (t - t0) / dt;
            if k < -GRID_TOLERANCE || (k - k.round()).abs() > GRID_TOLERANCE * k.abs().max(1.0) {
                bail!("tau entry {t} is not on the sample grid (start {t0}, step {dt})");
            }
            indices.push(k.round() as usize);
        }
        self.indices = Some(indices);
        Ok(())
    }

    pub fn selects(&self, index: usize) -> bool {
        self.indices.as_ref().is_some_and(|i| i.contains(&index))
    }

    pub fn beyond(&self, last: usize) -> Vec<f64> {
        match &self.indices {
            Some(indices) => self
                .times
                .iter()
                .zip(indices)
                .filter(|(_, &k)| k > last)
                .map(|(t, _)| *t)
                .collect(),
            None => Vec::new(),
        }
    }
}

pub struct MonitorRun {
    pub last: Option<StepRecord>,
    pub complete: bool,
}

/// A record sink with an optional time filter.
pub struct Output {
    pub sink: RecordSink,
    pub tau: Option<TauFilter>,
}

/// Feeds every row of `reader` through a fresh monitor and writes the
/// records to each output.
pub fn replay<R: Read>(
    formula: &Formula,
    table: &PredicateTable,
    cfg: EvalConfig,
    extremes: EtaExtremes,
    mut reader: TraceReader<R>,
    outputs: &mut [Output],
) -> Result<MonitorRun> {
    let names = reader.signal_names().to_vec();
    let mut monitor: Option<Monitor> = None;
    let mut last = None;
    while let Some((time, values)) = reader.next_row()? {
        let m = match &mut monitor {
            Some(m) => m,
            None => {
                let options = MonitorOptions {
                    extremes,
                    start_time: time,
                };
                for t in outputs.iter_mut().filter_map(|o| o.tau.as_mut()) {
                    t.resolve(time, cfg.dt())?;
                }
                monitor.insert(Monitor::new(formula, table, cfg, options)?)
            }
        };
        if m.is_final() {
            log::warn!(
                "horizon reached at sample {}; ignoring the remaining rows",
                m.observed()
            );
            break;
        }
        let sample: BTreeMap<String, f64> = names.iter().cloned().zip(values).collect();
        let record = m.step(&sample)?;
        for out in outputs.iter_mut() {
            if out.tau.as_ref().is_none_or(|t| t.selects(record.index)) {
                out.sink.write(&record)?;
            }
        }
        last = Some(record);
    }
    let Some(m) = monitor else {
        bail!("trace has no samples");
    };
    if let Some(r) = &last {
        for t in outputs.iter().filter_map(|o| o.tau.as_ref()) {
            let missed = t.beyond(r.index);
            if !missed.is_empty() {
                log::warn!("tau entries {missed:?} lie after the last monitored sample");
            }
        }
    }
    Ok(MonitorRun {
        last,
        complete: m.is_final(),
    })
}

pub fn monitor(args: &MonitorArgs) -> Result<u8> {
    let formula = load_formula(&args.source)?;
    let table = load_table(&args.config)?;
    check_diagnostics(&formula, &table, args.dt)?;
    let cfg = EvalConfig::new(args.rho_bot, args.rho_top, args.dt)?;
    let extremes = if args.conservative_eta {
        EtaExtremes::Conservative
    } else {
        EtaExtremes::PerAtom
    };
    let tau = args.tau.clone().map(TauFilter::new);

    let out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let mut outputs = [Output {
        sink: RecordSink::new(out, args.format, args.stream)?,
        tau,
    }];

    let result = if args.stream {
        let reader = TraceReader::new(io::stdin().lock(), args.dt)?;
        replay(&formula, &table, cfg, extremes, reader, &mut outputs)
    } else {
        let path = args
            .trace
            .as_ref()
            .expect("clap requires --trace without --stream");
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let reader = TraceReader::new(file, args.dt)?;
        replay(&formula, &table, cfg, extremes, reader, &mut outputs)
    };
    let [output] = outputs;
    output.sink.finish()?;
    let run = result?;

    if !run.complete {
        eprintln!("inconclusive at end of trace");
        return Ok(EXIT_INCONCLUSIVE);
    }
    let last = run.last.expect("complete run has records");
    Ok(match last.rho_verdict {
        Verdict::Violated => EXIT_VIOLATED,
        _ => EXIT_OK,
    })
}
