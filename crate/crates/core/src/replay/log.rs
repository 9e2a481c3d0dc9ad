//! Flight log CSV.
//!
//! ```text
//! # sample_rate_hz=500
//! # vehicle_id=sim-bebop2
//! # rpm_units=rad_s
//! # fault_actuator=3
//! # fault_time_s=1.56
//! t,p,q,r,az,w1,w2,w3,w4
//! 0,0.001,-0.002,0,-9.81,700.1,700.1,700.1,700.1
//! ```
//!
//! Header lines are `# key=value` and must precede the column line. Rotor
//! speeds are rad/s unless `rpm_units=rpm`, in which case they are converted on
//! load. Fault annotation keys are optional but must appear together; the
//! actuator index is one-based. Other header keys are kept verbatim.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::RawSample;

pub const COLUMNS: [&str; 9] = ["t", "p", "q", "r", "az", "w1", "w2", "w3", "w4"];

const RPM_TO_RAD_S: f64 = 2.0 * std::f64::consts::PI / 60.0;

/// Ground-truth actuator failure annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    /// One-based actuator index, 1..=4.
    pub actuator: usize,
    pub time: f64,
}

impl GroundTruth {
    pub fn new(actuator: usize, time: f64) -> Result<Self> {
        if !(1..=4).contains(&actuator) {
            return Err(Error::InvalidArgument(format!("actuator index {actuator} outside 1..=4")));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::InvalidArgument(format!("fault time must be >= 0, got {time}")));
        }
        Ok(Self { actuator, time })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub sample_rate_hz: f64,
    pub vehicle_id: String,
    pub fault: Option<GroundTruth>,
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightLog {
    pub header: LogHeader,
    pub samples: Vec<RawSample>,
}

impl FlightLog {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    /// Checks the timestamp and sample-rate invariants.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument("flight log has no samples".into()));
        }
        for (i, pair) in self.samples.windows(2).enumerate() {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::InvalidArgument(format!(
                    "sample {}: timestamp {} does not increase",
                    i + 1,
                    pair[1].timestamp
                )));
            }
        }
        let rate = self.header.sample_rate_hz;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!("sample_rate_hz must be > 0, got {rate}")));
        }
        if let Some(dt) = median_interval(&self.samples) {
            let expected = 1.0 / rate;
            if (dt - expected).abs() > 0.01 * expected {
                return Err(Error::InvalidArgument(format!(
                    "sample_rate_hz={rate} disagrees with median sample interval {dt} s"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let h = &self.header;
        writeln!(out, "# sample_rate_hz={}", h.sample_rate_hz).unwrap();
        writeln!(out, "# vehicle_id={}", h.vehicle_id).unwrap();
        writeln!(out, "# rpm_units=rad_s").unwrap();
        if let Some(f) = h.fault {
            writeln!(out, "# fault_actuator={}", f.actuator).unwrap();
            writeln!(out, "# fault_time_s={}", f.time).unwrap();
        }
        for (k, v) in &h.extra {
            writeln!(out, "# {k}={v}").unwrap();
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(COLUMNS).expect("in-memory write");
        for s in &self.samples {
            let [p, q, r] = s.angular_rate;
            let [w1, w2, w3, w4] = s.rotor_speeds;
            let row = [s.timestamp, p, q, r, s.accel_z, w1, w2, w3, w4].map(|v| v.to_string());
            writer.write_record(&row).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&writer.into_inner().expect("in-memory flush")).expect("ascii"));
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Parses log text; `source` names the origin in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: source.to_owned(),
            line,
            message,
        };

        let mut meta: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut column_line = None;
        let mut offset = 0;
        for (idx, line) in text.split_inclusive('\n').enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                offset += line.len();
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_owned(), (idx + 1, v.trim().to_owned()));
                }
                offset += line.len();
                continue;
            }
            column_line = Some(idx + 1);
            break;
        }
        let Some(column_line) = column_line else {
            return Err(perr(1, "no column header or data (empty log)".into()));
        };

        let mut take = |key: &str| meta.remove(key);
        let sample_rate_hz = match take("sample_rate_hz") {
            Some((line, v)) => v
                .parse::<f64>()
                .map_err(|e| perr(line, format!("sample_rate_hz: {e}")))?,
            None => return Err(perr(1, "missing header key sample_rate_hz".into())),
        };
        let vehicle_id = take("vehicle_id").map(|(_, v)| v).unwrap_or_else(|| "unknown".into());
        let rpm_scale = match take("rpm_units") {
            None => 1.0,
            Some((_, v)) if v == "rad_s" => 1.0,
            Some((_, v)) if v == "rpm" => RPM_TO_RAD_S,
            Some((line, v)) => return Err(perr(line, format!("rpm_units must be rad_s or rpm, got `{v}`"))),
        };
        let fault = match (take("fault_actuator"), take("fault_time_s")) {
            (None, None) => None,
            (Some((la, a)), Some((lt, t))) => {
                let actuator = a
                    .parse::<usize>()
                    .map_err(|e| perr(la, format!("fault_actuator: {e}")))?;
                let time = t.parse::<f64>().map_err(|e| perr(lt, format!("fault_time_s: {e}")))?;
                Some(GroundTruth::new(actuator, time).map_err(|e| perr(la, e.to_string()))?)
            }
            (Some((line, _)), None) | (None, Some((line, _))) => {
                return Err(perr(line, "fault_actuator and fault_time_s must appear together".into()))
            }
        };
        let extra = meta.into_iter().map(|(k, (_, v))| (k, v)).collect();

        let body = &text[offset.min(text.len())..];
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let line_of = |pos: Option<&csv::Position>| pos.map_or(column_line, |p| p.line() as usize + column_line - 1);

        let headers = reader.headers().map_err(|e| perr(column_line, e.to_string()))?.clone();
        if headers.iter().ne(COLUMNS.iter().copied()) {
            return Err(perr(
                column_line,
                format!("expected columns `{}`, found `{}`", COLUMNS.join(","), headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }

        let mut samples: Vec<RawSample> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| perr(line_of(e.position()), e.to_string()))?;
            let line = line_of(record.position());
            if record.len() != COLUMNS.len() {
                return Err(perr(line, format!("expected {} fields, found {}", COLUMNS.len(), record.len())));
            }
            let mut v = [0.0; 9];
            for (slot, (field, name)) in v.iter_mut().zip(record.iter().zip(COLUMNS)) {
                let x: f64 = field
                    .parse()
                    .map_err(|_| perr(line, format!("column {name}: `{field}` is not a number")))?;
                if !x.is_finite() {
                    return Err(perr(line, format!("column {name}: non-finite value `{field}`")));
                }
                *slot = x;
            }
            let rotor_speeds = [v[5], v[6], v[7], v[8]].map(|w| w * rpm_scale);
            if rotor_speeds.iter().any(|&w| w < 0.0) {
                return Err(perr(line, "negative rotor speed".into()));
            }
            if let Some(prev) = samples.last() {
                if v[0] <= prev.timestamp {
                    return Err(perr(line, format!("timestamp {} does not increase", v[0])));
                }
            }
            samples.push(RawSample {
                timestamp: v[0],
                angular_rate: [v[1], v[2], v[3]],
                accel_z: v[4],
                rotor_speeds,
            });
        }
        if samples.is_empty() {
            return Err(perr(column_line, "log contains no samples".into()));
        }

        let log = FlightLog {
            header: LogHeader {
                sample_rate_hz,
                vehicle_id,
                fault,
                extra,
            },
            samples,
        };
        log.validate().map_err(|e| perr(column_line, e.to_string()))?;
        Ok(log)
    }
}

pub fn load_log(path: impl AsRef<Path>) -> Result<FlightLog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FlightLog::parse(&text, &path.display().to_string())
}

fn median_interval(samples: &[RawSample]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
    let mid = dts.len() / 2;
    let (_, m, _) = dts.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "# sample_rate_hz=500\n# vehicle_id=bench\n# fault_actuator=3\n# fault_time_s=0.004\n\
t,p,q,r,az,w1,w2,w3,w4\n\
0,0.1,0.2,0.3,-9.81,700,701,702,703\n\
0.002,0.1,0.2,0.3,-9.81,700,701,702,703\n\
0.004,0.1,0.2,0.3,-9.81,700,701,702,703\n";

    #[test]
    fn parses_header_and_rows() {
        let log = FlightLog::parse(SMALL, "mem").unwrap();
        assert_eq!(log.samples.len(), 3);
        assert_eq!(log.header.vehicle_id, "bench");
        assert_eq!(log.header.fault, Some(GroundTruth { actuator: 3, time: 0.004 }));
        assert_eq!(log.samples[1].rotor_speeds, [700.0, 701.0, 702.0, 703.0]);
    }

    #[test]
    fn rpm_units_converted() {
        let text = SMALL.replace("# vehicle_id=bench", "# rpm_units=rpm");
        let log = FlightLog::parse(&text, "mem").unwrap();
        let w = log.samples[0].rotor_speeds[0];
        assert!((w - 700.0 * 2.0 * std::f64::consts::PI / 60.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_header_only_are_errors() {
        assert!(FlightLog::parse("", "mem").is_err());
        assert!(FlightLog::parse("# sample_rate_hz=500\nt,p,q,r,az,w1,w2,w3,w4\n", "mem").is_err());
    }

    #[test]
    fn reports_offending_line() {
        let bad = SMALL.replace("0.002,0.1,0.2", "0.002,nan,0.2");
        match FlightLog::parse(&bad, "f.csv") {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(path, "f.csv");
            }
            other => panic!("{other:?}"),
        }
        let backwards = SMALL.replace("0.004,0.1", "0.001,0.1");
        assert!(matches!(FlightLog::parse(&backwards, "f"), Err(Error::Parse { line: 8, .. })));
        let short = SMALL.replace("0.002,0.1,0.2,0.3,-9.81,700,701,702,703", "0.002,0.1");
        assert!(matches!(FlightLog::parse(&short, "f"), Err(Error::Parse { line: 7, .. })));
    }

    #[test]
    fn schema_mismatch() {
        let bad = SMALL.replace("t,p,q,r,az", "t,q,p,r,az");
        assert!(matches!(FlightLog::parse(&bad, "f"), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn rate_mismatch() {
        let bad = SMALL.replace("sample_rate_hz=500", "sample_rate_hz=250");
        assert!(FlightLog::parse(&bad, "f").is_err());
    }

    #[test]
    fn fault_keys_must_pair() {
        let bad = SMALL.replace("# fault_time_s=0.004\n", "");
        assert!(FlightLog::parse(&bad, "f").is_err());
        let bad = SMALL.replace("fault_actuator=3", "fault_actuator=5");
        assert!(FlightLog::parse(&bad, "f").is_err());
    }

    #[test]
    fn write_read_identity() {
        let mut log = FlightLog::parse(SMALL, "mem").unwrap();
        log.samples[2].accel_z = -9.810_000_000_000_001;
        log.samples[0].angular_rate[0] = 1.0 / 3.0;
        log.header.extra.insert("scenario".into(), "hover".into());
        let back = FlightLog::parse(&log.to_csv_string(), "mem").unwrap();
        assert_eq!(back, log);
    }
}
