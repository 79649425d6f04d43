//! JSON-lines interchange format for study responses.
//!
//! Every line is one object with a `kind` discriminator (`schedule`,
//! `calibration` or `measurement`) and a `schema` version.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Choice, SessionTrials};
use crate::adaptation::TriphasicSchedule;
use crate::colorimetry::ChromaticityUv;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_v1() -> u32 {
    SCHEMA_VERSION
}

/// Declares the illuminant schedule of measurement block `block`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub block: u32,
    pub schedule: TriphasicSchedule,
}

/// One calibration response; the adaptation state is taken to be D65.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub index: u32,
    /// Seconds since the start of calibration.
    pub t: f64,
    /// Signed offset of the midpoint from D65 along the trajectory.
    pub m_offset: f64,
    pub choice: Choice,
    /// Response latency in seconds.
    pub latency: Option<f64>,
    #[serde(default)]
    pub late: bool,
}

/// One measurement response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    #[serde(default)]
    pub block: u32,
    pub index: u32,
    /// Seconds since the start of the measurement stage.
    pub t: f64,
    pub further: ChromaticityUv,
    pub lagging: ChromaticityUv,
    pub midpoint: ChromaticityUv,
    pub choice: Choice,
    pub latency: Option<f64>,
    /// Answered after the response window closed.
    #[serde(default)]
    pub late: bool,
    /// Stimuli were pulled toward D65 to stay displayable.
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Schedule(ScheduleRecord),
    Calibration(CalibrationRecord),
    Measurement(TrialRecord),
}

impl Record {
    pub fn schema(&self) -> u32 {
        match self {
            Record::Schedule(r) => r.schema,
            Record::Calibration(r) => r.schema,
            Record::Measurement(r) => r.schema,
        }
    }

    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_line(line: &str, line_no: usize) -> Result<Self> {
        let r: Record = serde_json::from_str(line).map_err(|e| Error::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        if r.schema() != SCHEMA_VERSION {
            return Err(Error::Record {
                line: line_no,
                message: format!("unsupported schema version {}", r.schema()),
            });
        }
        Ok(r)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Record::from_line(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    for r in records {
        writeln!(f, "{}", r.to_line()?)?;
    }
    f.flush()?;
    Ok(())
}

/// Split records into calibration responses and per-block measurement
/// sessions, blocks in order of first appearance. A block without its own
/// schedule record uses `fallback`.
pub fn group_records(
    records: &[Record],
    fallback: Option<TriphasicSchedule>,
) -> Result<(Vec<CalibrationRecord>, Vec<SessionTrials>)> {
    let mut calibration = Vec::new();
    let mut schedules: Vec<(u32, TriphasicSchedule)> = Vec::new();
    let mut blocks: Vec<(u32, Vec<TrialRecord>)> = Vec::new();
    for r in records {
        match r {
            Record::Calibration(c) => calibration.push(c.clone()),
            Record::Schedule(s) => {
                if let Some(prev) = schedules.iter().find(|x| x.0 == s.block) {
                    if prev.1 != s.schedule {
                        return Err(Error::InvalidParameter(format!(
                            "block {} has two different schedules",
                            s.block
                        )));
                    }
                } else {
                    schedules.push((s.block, s.schedule));
                }
            }
            Record::Measurement(m) => match blocks.iter_mut().find(|b| b.0 == m.block) {
                Some(b) => b.1.push(m.clone()),
                None => blocks.push((m.block, vec![m.clone()])),
            },
        }
    }
    let sessions = blocks
        .into_iter()
        .map(|(block, trials)| {
            let schedule = schedules
                .iter()
                .find(|s| s.0 == block)
                .map(|s| s.1)
                .or(fallback)
                .ok_or_else(|| Error::InvalidParameter(format!("no schedule for block {block}")))?;
            Ok(SessionTrials { schedule, trials })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((calibration, sessions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::Trajectory;

    #[test]
    fn round_trip_all_kinds() {
        let recs = vec![
            Record::Schedule(ScheduleRecord {
                schema: 1,
                block: 0,
                schedule: TriphasicSchedule::study(Trajectory::Daylight, 0.0002),
            }),
            Record::Calibration(CalibrationRecord {
                schema: 1,
                index: 3,
                t: 12.5,
                m_offset: -0.0031,
                choice: Choice::Further,
                latency: Some(0.61),
                late: false,
            }),
            Record::Measurement(TrialRecord {
                schema: 1,
                block: 0,
                index: 0,
                t: 3.75,
                further: ChromaticityUv::new(0.2, 0.48),
                lagging: ChromaticityUv::new(0.2, 0.456),
                midpoint: ChromaticityUv::new(0.2, 0.468),
                choice: Choice::Lagging,
                latency: None,
                late: true,
                clamped: false,
            }),
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        write_records(&p, &recs).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.lines().next().unwrap().contains(r#""kind":"schedule""#));
        assert!(text.contains(r#""choice":"lagging""#));
        assert_eq!(read_records(&p).unwrap(), recs);
    }

    #[test]
    fn bad_lines_report_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        fs::write(&p, "\n{\"kind\":\"nope\"}\n").unwrap();
        match read_records(&p) {
            Err(Error::Record { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        fs::write(
            &p,
            r#"{"kind":"calibration","schema":9,"index":0,"t":0,"m_offset":0,"choice":"lagging","latency":null}"#,
        )
        .unwrap();
        assert!(read_records(&p).is_err());
    }

    #[test]
    fn grouping_by_block() {
        let sched = TriphasicSchedule::study(Trajectory::Linear { phi: 1.47 }, 2e-4);
        let other = TriphasicSchedule::study(Trajectory::Daylight, 1e-4);
        let m = |block, index| {
            Record::Measurement(TrialRecord {
                schema: 1,
                block,
                index,
                t: 0.0,
                further: ChromaticityUv::d65(),
                lagging: ChromaticityUv::d65(),
                midpoint: ChromaticityUv::d65(),
                choice: Choice::Further,
                latency: None,
                late: false,
                clamped: false,
            })
        };
        let recs = vec![
            Record::Schedule(ScheduleRecord { schema: 1, block: 1, schedule: other }),
            m(0, 0),
            m(1, 1),
            m(0, 2),
        ];
        assert!(group_records(&recs, None).is_err());
        let (cal, sessions) = group_records(&recs, Some(sched)).unwrap();
        assert!(cal.is_empty());
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].schedule, sched);
        assert_eq!(sessions[0].trials.iter().map(|t| t.index).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(sessions[1].schedule, other);
        let mut clash = recs.clone();
        clash.push(Record::Schedule(ScheduleRecord { schema: 1, block: 1, schedule: sched }));
        assert!(group_records(&clash, Some(sched)).is_err());
    }
}
