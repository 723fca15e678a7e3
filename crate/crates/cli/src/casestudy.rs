//! Reach-avoid scenario: visit A, then B, then C while never entering O.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;

use twtl::formula::{horizon, parse};
use twtl::monitor::EtaExtremes;
use twtl::semantics::{bool_sat, eta, rho, EvalConfig};
use twtl::trace::{parse_table, read_trace, TraceReader};

use crate::commands::{replay, Output, RecordSink, TauFilter, EXIT_OK};
use crate::{CaseStudyArgs, OutputFormat};

pub const FORMULA: &str = "([H^4 A]^[0,8] . [H^4 B]^[0,10] . [H^3 C]^[0,11]) & H^50 !O";

/// Workspace bounds on both axes.
const RANGE: (f64, f64) = (0.0, 12.0);

type Rect = ((f64, f64), (f64, f64));

const REGIONS: [(&str, Rect); 4] = [
    ("A", ((1.0, 4.0), (1.0, 4.0))),
    ("B", ((8.0, 11.0), (3.0, 6.0))),
    ("C", ((1.0, 4.0), (9.0, 12.0))),
    ("O", ((5.0, 7.0), (5.0, 7.0))),
];

const SAMPLES: usize = 51;

/// Keyframes `(sample, (x, y))`, linearly interpolated.
const NOMINAL: [(usize, (f64, f64)); 7] = [
    (0, (2.5, 2.5)),
    (5, (2.5, 2.5)),
    (11, (9.5, 4.5)),
    (17, (9.5, 4.5)),
    (22, (9.5, 9.0)),
    (28, (2.5, 10.5)),
    (50, (2.5, 10.5)),
];

const MARGINAL: [(usize, (f64, f64)); 7] = [
    (0, (1.4, 1.5)),
    (5, (1.4, 1.5)),
    (11, (8.3, 3.4)),
    (17, (8.3, 3.4)),
    (22, (7.6, 8.0)),
    (28, (1.5, 9.4)),
    (50, (1.5, 9.4)),
];

fn config_json() -> serde_json::Value {
    let side = |signal: &str, (lo, hi): (f64, f64)| {
        vec![
            json!({"signal": signal, "op": ">=", "sigma": lo, "min": RANGE.0, "max": RANGE.1}),
            json!({"signal": signal, "op": "<=", "sigma": hi, "min": RANGE.0, "max": RANGE.1}),
        ]
    };
    let atoms: serde_json::Map<String, serde_json::Value> = REGIONS
        .iter()
        .map(|(name, (xs, ys))| {
            let mut all = side("x", *xs);
            all.extend(side("y", *ys));
            (name.to_string(), json!({ "all": all }))
        })
        .collect();
    json!({ "atoms": atoms })
}

fn trajectory(keys: &[(usize, (f64, f64))]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(SAMPLES);
    for k in 0..SAMPLES {
        let seg = keys
            .windows(2)
            .find(|w| k <= w[1].0)
            .unwrap_or(&keys[keys.len() - 2..]);
        let ((k0, (x0, y0)), (k1, (x1, y1))) = (seg[0], seg[1]);
        let s = (k - k0) as f64 / (k1 - k0) as f64;
        out.push((x0 + s * (x1 - x0), y0 + s * (y1 - y0)));
    }
    out
}

fn trace_csv(points: &[(f64, f64)]) -> String {
    let mut text = String::from("time,x,y\n");
    for (k, (x, y)) in points.iter().enumerate() {
        writeln!(text, "{k},{x},{y}").expect("writing to a string");
    }
    text
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: &CaseStudyArgs) -> Result<u8> {
    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let formula = parse(FORMULA)?;
    let config = serde_json::to_string_pretty(&config_json())?;
    let table = parse_table(&config)?;
    let cfg = EvalConfig::default();
    write(&dir.join("formula.twtl"), &format!("{FORMULA}\n"))?;
    write(&dir.join("regions.json"), &config)?;
    println!("formula {formula}");
    println!("horizon {}", horizon(&formula, cfg.dt()));

    for (name, keys) in [("nominal", &NOMINAL), ("marginal", &MARGINAL)] {
        let trace_path = dir.join(format!("{name}.csv"));
        let text = trace_csv(&trajectory(keys));
        write(&trace_path, &text)?;

        let word = read_trace(text.as_bytes(), cfg.dt())?;
        let sat = bool_sat(&word, &formula, &table)?;
        let r = rho(&word, &formula, &table, &cfg)?;
        let e = eta(&word, &formula, &table, &cfg)?;
        println!(
            "{name} {} rho={r} eta={e}",
            if sat { "sat" } else { "unsat" }
        );

        let mut outputs = [
            Output {
                sink: RecordSink::to_path(
                    &dir.join(format!("{name}_monitor.csv")),
                    OutputFormat::Csv,
                )?,
                tau: None,
            },
            Output {
                sink: RecordSink::to_path(
                    &dir.join(format!("{name}_monitor_tau.csv")),
                    OutputFormat::Csv,
                )?,
                tau: Some(TauFilter::new(args.tau.clone())),
            },
        ];
        let reader = TraceReader::new(File::open(&trace_path)?, cfg.dt())?;
        let run = replay(
            &formula,
            &table,
            cfg,
            EtaExtremes::PerAtom,
            reader,
            &mut outputs,
        )?;
        for output in outputs {
            output.sink.finish()?;
        }
        if let Some(last) = run.last {
            println!(
                "  monitor at t={}: rho {} eta {} verdict {}",
                last.time, last.rho, last.eta, last.rho_verdict
            );
        }
    }
    println!("wrote {}", dir.display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectories_hit_keyframes() {
        let t = trajectory(&NOMINAL);
        assert_eq!(t.len(), SAMPLES);
        for (k, p) in NOMINAL {
            assert_eq!(t[k], p);
        }
        assert_eq!(t[8], (6.0, 3.5));
    }

    #[test]
    fn nominal_beats_marginal() {
        let formula = parse(FORMULA).unwrap();
        let table = parse_table(&config_json().to_string()).unwrap();
        let cfg = EvalConfig::default();
        let eval = |keys: &[(usize, (f64, f64))]| {
            let w = read_trace(trace_csv(&trajectory(keys)).as_bytes(), 1.0).unwrap();
            (
                bool_sat(&w, &formula, &table).unwrap(),
                rho(&w, &formula, &table, &cfg).unwrap(),
                eta(&w, &formula, &table, &cfg).unwrap(),
            )
        };
        let (sat1, r1, e1) = eval(&NOMINAL);
        let (sat2, r2, e2) = eval(&MARGINAL);
        assert!(sat1 && sat2);
        // Closest approach to O is at sample 9, (43/6, 23/6).
        assert!((r1 - 7.0 / 6.0).abs() < 1e-12, "{r1}");
        assert!((r2 - 0.3).abs() < 1e-9, "{r2}");
        assert!(e1 > 0.0 && e2 > 0.0 && e2 < e1, "{e1} {e2}");
    }
}
