//! Trace CSV ingestion and predicate configuration files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::{
    Comparison, Constraint, NormalizationBounds, PredicateSpec, PredicateTable, TraceError, Word,
    GRID_TOLERANCE,
};

/// Incremental reader over a `time,<sig1>,...` CSV stream.
///
/// Rows are checked for uniform sampling with step `dt` as they are read.
pub struct TraceReader<R: Read> {
    inner: csv::Reader<R>,
    names: Vec<String>,
    dt: f64,
    t0: Option<f64>,
    row: usize,
    record: csv::StringRecord,
}

impl<R: Read> TraceReader<R> {
    pub fn new(source: R, dt: f64) -> Result<Self, TraceError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TraceError::InvalidStep(dt));
        }
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(source);
        let header = inner.headers()?.clone();
        let mut fields = header.iter();
        match fields.next() {
            Some("time") => {}
            Some(other) => return Err(TraceError::BadHeader(other.to_string())),
            None => return Err(TraceError::NoSamples),
        }
        let names: Vec<String> = fields.map(str::to_string).collect();
        if names.is_empty() {
            return Err(TraceError::BadHeader(
                header.iter().collect::<Vec<_>>().join(","),
            ));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(TraceError::DuplicateSignal(name.clone()));
            }
        }
        Ok(Self {
            inner,
            names,
            dt,
            t0: None,
            row: 0,
            record: csv::StringRecord::new(),
        })
    }

    pub fn signal_names(&self) -> &[String] {
        &self.names
    }

    /// Time of the first row, once it has been read.
    pub fn start_time(&self) -> Option<f64> {
        self.t0
    }

    /// Next `(time, values)` row, `None` at end of input.
    pub fn next_row(&mut self) -> Result<Option<(f64, Vec<f64>)>, TraceError> {
        if !self.inner.read_record(&mut self.record)? {
            return Ok(None);
        }
        let row = self.row + 1;
        let expected = self.names.len() + 1;
        if self.record.len() != expected {
            return Err(TraceError::MissingColumns {
                row,
                expected,
                found: self.record.len(),
            });
        }
        let mut values = Vec::with_capacity(expected);
        for field in self.record.iter() {
            let v: f64 = field.parse().map_err(|_| TraceError::BadNumber {
                row,
                text: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(TraceError::BadNumber {
                    row,
                    text: field.to_string(),
                });
            }
            values.push(v);
        }
        let time = values.remove(0);
        let t0 = *self.t0.get_or_insert(time);
        let expected_time = t0 + self.row as f64 * self.dt;
        if (time - expected_time).abs() > GRID_TOLERANCE * self.dt {
            return Err(TraceError::NonUniform {
                row,
                expected: expected_time,
                found: time,
            });
        }
        self.row += 1;
        Ok(Some((time, values)))
    }
}

/// Reads a whole trace CSV into a [`Word`] with sampling step `dt`.
pub fn read_trace<R: Read>(source: R, dt: f64) -> Result<Word, TraceError> {
    let mut reader = TraceReader::new(source, dt)?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); reader.signal_names().len()];
    while let Some((_, values)) = reader.next_row()? {
        for (column, v) in columns.iter_mut().zip(values) {
            column.push(v);
        }
    }
    let t0 = reader.start_time().ok_or(TraceError::NoSamples)?;
    let signals = reader.signal_names().iter().cloned().zip(columns).collect();
    Word::new(t0, dt, signals)
}

pub fn load_trace(path: impl AsRef<Path>, dt: f64) -> Result<Word, TraceError> {
    read_trace(open(path.as_ref())?, dt)
}

fn open(path: &Path) -> Result<File, TraceError> {
    File::open(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Deserialize)]
struct ConfigFile {
    atoms: BTreeMap<String, AtomConfig>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AtomConfig {
    Region { all: Vec<ConstraintConfig> },
    Single(ConstraintConfig),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintConfig {
    signal: String,
    op: Comparison,
    sigma: f64,
    #[serde(default)]
    min: Option<f64>,
    #[serde(default)]
    max: Option<f64>,
}

impl ConstraintConfig {
    fn into_constraint(self, atom: &str) -> Result<Constraint, TraceError> {
        let bounds = match (self.min, self.max) {
            (Some(min), Some(max)) => Some(NormalizationBounds::new(min, max)?),
            (None, None) => None,
            _ => {
                return Err(TraceError::InvalidPredicate {
                    atom: atom.to_string(),
                    message: "`min` and `max` must be given together".into(),
                })
            }
        };
        Ok(Constraint {
            signal: self.signal,
            op: self.op,
            sigma: self.sigma,
            bounds,
        })
    }
}

/// Parses a predicate configuration:
///
/// ```json
/// {"atoms": {
///     "A": {"signal": "x", "op": ">=", "sigma": 4.0, "min": 0.0, "max": 8.0},
///     "O": {"all": [{"signal": "x", "op": ">=", "sigma": 5.0}, {"signal": "x", "op": "<=", "sigma": 7.0}]}
/// }}
/// ```
///
/// `min`/`max` are optional and only needed for AGM robustness.
pub fn parse_table(text: &str) -> Result<PredicateTable, TraceError> {
    let file: ConfigFile = serde_json::from_str(text)?;
    let mut table = PredicateTable::new();
    for (name, atom) in file.atoms {
        let constraints = match atom {
            AtomConfig::Single(c) => vec![c.into_constraint(&name)?],
            AtomConfig::Region { all } => all
                .into_iter()
                .map(|c| c.into_constraint(&name))
                .collect::<Result<_, _>>()?,
        };
        table.insert(PredicateSpec::new(name, constraints)?)?;
    }
    Ok(table)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<PredicateTable, TraceError> {
    let mut text = String::new();
    let path = path.as_ref();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_table(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_uniform_trace() {
        let w = read_trace("time,x\n0,5\n1,4.5\n2,6\n".as_bytes(), 1.0).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.dt(), 1.0);
        assert_eq!(w.signal("x").unwrap(), &[5.0, 4.5, 6.0]);
    }

    #[test]
    fn reads_fractional_step_and_offset() {
        let w = read_trace(
            "time, x, y\n10.0,1,2\n10.1,3,4\n10.2,5,6\n10.3,7,8\n".as_bytes(),
            0.1,
        )
        .unwrap();
        assert_eq!(w.t0(), 10.0);
        assert_eq!(w.signal("y").unwrap(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn rejects_jitter() {
        let err = read_trace("time,x\n0,5\n1,4.5\n2.01,6\n".as_bytes(), 1.0).unwrap_err();
        assert!(
            matches!(err, TraceError::NonUniform { row: 3, .. }),
            "{err}"
        );
        let err = read_trace("time,x\n0,5\n2,4.5\n".as_bytes(), 1.0).unwrap_err();
        assert!(matches!(err, TraceError::NonUniform { .. }));
    }

    #[test]
    fn rejects_empty_and_malformed_input() {
        assert!(matches!(
            read_trace("".as_bytes(), 1.0),
            Err(TraceError::NoSamples)
        ));
        assert!(matches!(
            read_trace("time,x\n".as_bytes(), 1.0),
            Err(TraceError::NoSamples)
        ));
        assert_eq!(
            read_trace("time,x\n".as_bytes(), 1.0)
                .unwrap_err()
                .to_string(),
            "no samples"
        );
        assert!(matches!(
            read_trace("t,x\n0,1\n".as_bytes(), 1.0),
            Err(TraceError::BadHeader(_))
        ));
        assert!(matches!(
            read_trace("time,x,y\n0,1\n".as_bytes(), 1.0),
            Err(TraceError::MissingColumns { row: 1, .. })
        ));
        assert!(matches!(
            read_trace("time,x\n0,abc\n".as_bytes(), 1.0),
            Err(TraceError::BadNumber { row: 1, .. })
        ));
        assert!(matches!(
            read_trace("time,x\n0,inf\n".as_bytes(), 1.0),
            Err(TraceError::BadNumber { .. })
        ));
    }

    #[test]
    fn parses_config_with_regions() {
        let table = parse_table(
            r#"{"atoms": {
                "A": {"signal": "x", "op": ">=", "sigma": 4.0, "min": 0.0, "max": 8.0},
                "B": {"signal": "x", "op": "<=", "sigma": 3.0},
                "O": {"all": [
                    {"signal": "x", "op": ">=", "sigma": 5.0, "min": 0, "max": 12},
                    {"signal": "y", "op": "<=", "sigma": 7.0, "min": 0, "max": 12}
                ]}
            }}"#,
        )
        .unwrap();
        assert_eq!(table.len(), 3);
        assert!(table.get("A").unwrap().has_bounds());
        assert!(!table.get("B").unwrap().has_bounds());
        assert_eq!(table.get("O").unwrap().constraints().len(), 2);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(
            parse_table(r#"{"atoms": {"A": {"signal": "x", "op": ">", "sigma": 1}}}"#).is_err()
        );
        assert!(parse_table(
            r#"{"atoms": {"A": {"signal": "x", "op": ">=", "sigma": 1, "min": 0}}}"#
        )
        .is_err());
        assert!(parse_table(
            r#"{"atoms": {"A": {"signal": "x", "op": ">=", "sigma": 9, "min": 0, "max": 8}}}"#
        )
        .is_err());
        assert!(parse_table("not json").is_err());
    }
}
