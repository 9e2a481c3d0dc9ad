//! One-at-a-time parameter sweeps over a corpus of logs.
//!
//! Result CSV: `param_set_id,log_id,delay_s,false_alarms,missed`, one row per
//! (parameter set, log) pair; `delay_s` is empty when there was no correct
//! detection.
//!
//! Summary CSV: `param_set_id,parameter,value,runs,detections,missed,false_alarms,
//! min,q1,median,q3,max,outliers,p2_5,p97_5`; delay statistics are over the
//! detected runs of that parameter set and `outliers` is `;`-separated.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::BoxStats;
use super::{evaluate, run_detector, FlightLog};
use crate::config::DetectorConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variation {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: DetectorConfig,
    #[serde(default, rename = "vary")]
    pub variations: Vec<Variation>,
}

impl Default for SweepSpec {
    /// Gains at +-20%, noise at x0.5/x1/x2 and both thresholds at three
    /// levels: 19 parameter sets counting the base.
    fn default() -> Self {
        let base = DetectorConfig::default();
        // round to 6 significant digits so labels read 4e-6, not 4.000000000000001e-6
        let scaled = |v: f64, factors: &[f64]| {
            factors
                .iter()
                .map(|f| format!("{:.5e}", v * f).parse().expect("formatted float"))
                .collect::<Vec<f64>>()
        };
        let vary = |parameter: &str, values: Vec<f64>| Variation {
            parameter: parameter.to_owned(),
            values,
        };
        Self {
            variations: vec![
                vary("gains.g_p", scaled(base.gains.g_p, &[0.8, 1.2])),
                vary("gains.g_q", scaled(base.gains.g_q, &[0.8, 1.2])),
                vary("gains.g_az", scaled(base.gains.g_az, &[0.8, 1.2])),
                vary("noise.process_noise_q", scaled(base.noise.process_noise_q, &[0.5, 1.0, 2.0])),
                vary("noise.measurement_noise_r", scaled(base.noise.measurement_noise_r, &[0.5, 1.0, 2.0])),
                vary("decision.k_threshold", vec![0.15, 0.25, 0.35]),
                vary("decision.probability_threshold", vec![0.8, 0.9, 0.99]),
            ],
            base,
        }
    }
}

/// One detector configuration in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    /// `base` or `<parameter>=<value>`.
    pub id: String,
    pub config: DetectorConfig,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        spec.parameter_sets()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep spec is plain data")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Toml(msg) => Error::Toml(format!("{}: {msg}", path.display())),
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Expands the spec into the base set followed by one set per varied
    /// value, validating every name and resulting config.
    pub fn parameter_sets(&self) -> Result<Vec<ParameterSet>> {
        self.base.validate()?;
        let mut sets = vec![ParameterSet {
            id: "base".to_owned(),
            config: self.base,
        }];
        for v in &self.variations {
            self.base.get_parameter(&v.parameter)?;
            for &value in &v.values {
                let mut config = self.base;
                config.set_parameter(&v.parameter, value)?;
                config.validate()?;
                sets.push(ParameterSet {
                    id: format!("{}={}", v.parameter, value),
                    config,
                });
            }
        }
        Ok(sets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub param_set_id: String,
    pub log_id: String,
    pub delay_s: Option<f64>,
    pub false_alarms: usize,
    pub missed: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResults {
    pub sets: Vec<ParameterSet>,
    /// Ordered by parameter set, then log.
    pub rows: Vec<ResultRow>,
}

/// Runs every (parameter set, log) pair. `jobs = 0` uses all cores.
pub fn sweep(logs: &[(String, FlightLog)], spec: &SweepSpec, jobs: usize) -> Result<SweepResults> {
    if logs.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one log".into()));
    }
    let sets = spec.parameter_sets()?;
    let pairs: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|s| (0..logs.len()).map(move |l| (s, l)))
        .collect();

    let run = |&(s, l): &(usize, usize)| -> Result<ResultRow> {
        let (log_id, log) = &logs[l];
        let outputs = run_detector(log, &sets[s].config)?;
        let eval = evaluate(&outputs, log.header.fault)?;
        Ok(ResultRow {
            param_set_id: sets[s].id.clone(),
            log_id: log_id.clone(),
            delay_s: eval.detection_delay,
            false_alarms: eval.false_alarm_count,
            missed: eval.missed_detection,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let rows = pool.install(|| pairs.par_iter().map(run).collect::<Result<Vec<_>>>())?;
    Ok(SweepResults { sets, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub param_set_id: String,
    pub parameter: String,
    pub value: Option<f64>,
    pub runs: usize,
    pub missed: usize,
    pub false_alarms: usize,
    /// `None` when nothing was detected.
    pub delays: Option<BoxStats>,
}

/// Groups result rows by parameter set in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.param_set_id.as_str()) {
            order.push(&r.param_set_id);
        }
    }
    order
        .into_iter()
        .map(|id| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| r.param_set_id == id).collect();
            let delays: Vec<f64> = group.iter().filter_map(|r| r.delay_s).collect();
            let (parameter, value) = match id.split_once('=') {
                Some((p, v)) => (p.to_owned(), v.parse().ok()),
                None => (id.to_owned(), None),
            };
            SummaryRow {
                param_set_id: id.to_owned(),
                parameter,
                value,
                runs: group.len(),
                missed: group.iter().filter(|r| r.missed).count(),
                false_alarms: group.iter().map(|r| r.false_alarms).sum(),
                delays: BoxStats::from_values(&delays),
            }
        })
        .collect()
}

const RESULT_COLUMNS: [&str; 5] = ["param_set_id", "log_id", "delay_s", "false_alarms", "missed"];

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.param_set_id.clone(),
            r.log_id.clone(),
            r.delay_s.map(|d| d.to_string()).unwrap_or_default(),
            r.false_alarms.to_string(),
            r.missed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{name}: {other:?}")),
    })?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RESULT_COLUMNS) {
        return Err(Error::Parse {
            path: name,
            line: 1,
            message: format!("expected columns `{}`", RESULT_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let perr = |message: String| Error::Parse {
            path: name.clone(),
            line,
            message,
        };
        let delay_s = match &record[2] {
            "" => None,
            d => Some(d.parse::<f64>().map_err(|_| perr(format!("bad delay `{d}`")))?),
        };
        rows.push(ResultRow {
            param_set_id: record[0].to_owned(),
            log_id: record[1].to_owned(),
            delay_s,
            false_alarms: record[3]
                .parse()
                .map_err(|_| perr(format!("bad false_alarms `{}`", &record[3])))?,
            missed: record[4]
                .parse()
                .map_err(|_| perr(format!("bad missed flag `{}`", &record[4])))?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: name,
            line: 1,
            message: "no result rows".into(),
        });
    }
    Ok(rows)
}

fn summary_fields(s: &SummaryRow) -> Vec<String> {
    let num = |v: f64| v.to_string();
    let mut fields = vec![
        s.param_set_id.clone(),
        s.parameter.clone(),
        s.value.map(num).unwrap_or_default(),
        s.runs.to_string(),
        s.delays.as_ref().map_or(0, |d| d.n).to_string(),
        s.missed.to_string(),
        s.false_alarms.to_string(),
    ];
    match &s.delays {
        Some(d) => fields.extend([
            num(d.min),
            num(d.q1),
            num(d.median),
            num(d.q3),
            num(d.max),
            d.outliers.iter().map(|&v| num(v)).collect::<Vec<_>>().join(";"),
            num(d.lower_95),
            num(d.upper_95),
        ]),
        None => fields.extend(std::iter::repeat_n(String::new(), 8)),
    }
    fields
}

pub fn write_summary_csv(path: impl AsRef<Path>, summary: &[SummaryRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "param_set_id",
        "parameter",
        "value",
        "runs",
        "detections",
        "missed",
        "false_alarms",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "outliers",
        "p2_5",
        "p97_5",
    ])?;
    for s in summary {
        w.write_record(summary_fields(s))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plain-text table, one row per parameter set, delays in milliseconds.
pub fn render_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<40} {:>4} {:>6} {:>3} {:>7} {:>7} {:>7} {:>7} {:>7} {:>5}   95% interval",
        "parameter set", "runs", "missed", "FA", "min", "q1", "median", "q3", "max", "outl"
    )
    .unwrap();
    for s in summary {
        let ms = |v: f64| format!("{:.1}", v * 1e3);
        match &s.delays {
            Some(d) => writeln!(
                out,
                "{:<40} {:>4} {:>6} {:>3} {:>7} {:>7} {:>7} {:>7} {:>7} {:>5}   [{}, {}] ms",
                s.param_set_id,
                s.runs,
                s.missed,
                s.false_alarms,
                ms(d.min),
                ms(d.q1),
                ms(d.median),
                ms(d.q3),
                ms(d.max),
                d.outliers.len(),
                ms(d.lower_95),
                ms(d.upper_95)
            ),
            None => writeln!(
                out,
                "{:<40} {:>4} {:>6} {:>3} {:>7} {:>7} {:>7} {:>7} {:>7} {:>5}   -",
                s.param_set_id, s.runs, s.missed, s.false_alarms, "-", "-", "-", "-", "-", "-"
            ),
        }
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_has_nineteen_sets() {
        let sets = SweepSpec::default().parameter_sets().unwrap();
        assert_eq!(sets.len(), 19);
        assert_eq!(sets[0].id, "base");
        let ids: Vec<&str> = sets.iter().map(|s| s.id.as_str()).collect();
        assert!(ids.contains(&"gains.g_p=0.00008"), "{ids:?}");
        assert!(ids.contains(&"gains.g_az=0.000004"), "{ids:?}");
        assert!(ids.contains(&"decision.probability_threshold=0.99"));
    }

    #[test]
    fn unknown_parameter_rejected() {
        let spec = SweepSpec {
            base: DetectorConfig::default(),
            variations: vec![Variation {
                parameter: "gains.g_r".into(),
                values: vec![1.0],
            }],
        };
        assert!(matches!(spec.parameter_sets(), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = SweepSpec::default();
        assert_eq!(SweepSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let small = SweepSpec::from_toml("[[vary]]\nparameter = \"decision.k_threshold\"\nvalues = [0.2]\n").unwrap();
        assert_eq!(small.parameter_sets().unwrap().len(), 2);
    }

    #[test]
    fn summary_groups_in_order() {
        let row = |set: &str, log: &str, d: Option<f64>| ResultRow {
            param_set_id: set.into(),
            log_id: log.into(),
            delay_s: d,
            false_alarms: 0,
            missed: d.is_none(),
        };
        let rows = vec![
            row("base", "a", Some(0.06)),
            row("base", "b", None),
            row("decision.k_threshold=0.35", "a", Some(0.04)),
            row("decision.k_threshold=0.35", "b", Some(0.08)),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].missed, 1);
        assert_eq!(s[0].delays.as_ref().unwrap().n, 1);
        assert_eq!(s[1].parameter, "decision.k_threshold");
        assert_eq!(s[1].value, Some(0.35));
        assert!((s[1].delays.as_ref().unwrap().median - 0.06).abs() < 1e-12);
        let table = render_table(&s);
        assert_eq!(table.lines().count(), 3);
    }
}
