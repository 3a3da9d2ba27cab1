//! Line-delimited JSON record schemas and their validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::normalize_likert;
use crate::safety::TrajectorySample;
use crate::simulator::{Mode, Role};

/// One distance/velocity reading of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub participant_id: String,
    pub role: Role,
    pub mode: Mode,
    pub trial: u8,
    /// Seconds since the start of the trial.
    pub t: f64,
    /// Metres.
    pub d: f64,
    /// Closing speed, m/s.
    pub v: f64,
    /// Radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearing: Option<f64>,
}

impl TrajectoryRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        check_keys(&self.participant_id, self.trial)?;
        for (name, x) in [("t", self.t), ("d", self.d), ("v", self.v)] {
            if !x.is_finite() {
                return Err(format!("{name} must be finite"));
            }
        }
        if self.d < 0.0 {
            return Err(format!("d must be >= 0, got {}", self.d));
        }
        if self.bearing.is_some_and(|b| !b.is_finite()) {
            return Err("bearing must be finite".into());
        }
        Ok(())
    }

    pub fn key(&self) -> SegmentKey {
        SegmentKey {
            participant_id: self.participant_id.clone(),
            mode: self.mode,
            trial: self.trial,
        }
    }

    pub fn sample(&self) -> TrajectorySample {
        TrajectorySample {
            t: self.t,
            d: self.d,
            v: self.v,
            bearing: self.bearing,
        }
    }
}

/// One questionnaire answer about one trial. Either a Likert `value` with
/// its `scale_points`, or an already normalized `rating` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRecord {
    pub participant_id: String,
    pub role: Role,
    pub mode: Mode,
    pub trial: u8,
    pub item: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_points: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
}

impl RatingRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        check_keys(&self.participant_id, self.trial)?;
        if self.item.is_empty() {
            return Err("item must not be empty".into());
        }
        self.normalized().map(|_| ())
    }

    /// Rating on `[0, 1]`.
    pub fn normalized(&self) -> std::result::Result<f64, String> {
        match (self.value, self.scale_points, self.rating) {
            (Some(k), Some(n), None) => normalize_likert(k, n).map_err(|e| e.to_string()),
            (None, None, Some(r)) if (0.0..=1.0).contains(&r) => Ok(r),
            (None, None, Some(r)) => Err(format!("rating {r} outside [0, 1]")),
            _ => Err("give either value with scale_points, or rating".into()),
        }
    }

    pub fn key(&self) -> SegmentKey {
        SegmentKey {
            participant_id: self.participant_id.clone(),
            mode: self.mode,
            trial: self.trial,
        }
    }
}

fn check_keys(participant_id: &str, trial: u8) -> std::result::Result<(), String> {
    if participant_id.is_empty() {
        return Err("participant_id must not be empty".into());
    }
    if !(1..=2).contains(&trial) {
        return Err(format!("trial must be 1 or 2, got {trial}"));
    }
    Ok(())
}

/// Identifies one trial of one participant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentKey {
    pub participant_id: String,
    pub mode: Mode,
    pub trial: u8,
}

impl fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.participant_id, self.mode, self.trial)
    }
}

fn parse_message(e: &serde_json::Error) -> String {
    let text = e.to_string();
    let text = match text.rfind(" at line ") {
        Some(i) => &text[..i],
        None => &text,
    };
    format!("{text} (column {})", e.column())
}

/// Parses one JSON record; `line` is 1-based and only used for errors.
pub fn parse_line<T: DeserializeOwned>(text: &str, line: usize) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: parse_message(&e),
    })
}

/// Reads every non-blank line of a JSONL stream, tagged with its line
/// number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, source: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, text) in reader.lines().enumerate() {
        let text = text.map_err(|e| Error::io(source, e))?;
        if text.trim().is_empty() {
            continue;
        }
        out.push((i + 1, parse_line(&text, i + 1)?));
    }
    Ok(out)
}

/// Enforces the stream invariants of trajectory files: each trial is one
/// contiguous block, time never decreases inside it, and a participant
/// keeps one role.
#[derive(Debug, Default)]
pub struct SegmentChecker {
    finished: BTreeSet<SegmentKey>,
    current: Option<(SegmentKey, f64)>,
    roles: BTreeMap<String, Role>,
}

impl SegmentChecker {
    /// Validates `record` and checks it against the records seen so far.
    /// Returns whether it opens a new segment.
    pub fn push(&mut self, line: usize, record: &TrajectoryRecord) -> Result<bool> {
        record.validate().map_err(|message| Error::Parse { line, message })?;
        let segment_error = |message: String| Error::Segment { line, message };

        let role = *self.roles.entry(record.participant_id.clone()).or_insert(record.role);
        if role != record.role {
            return Err(segment_error(format!(
                "participant {} was {} earlier, now {}",
                record.participant_id, role, record.role
            )));
        }

        let key = record.key();
        if let Some((current, last_t)) = &mut self.current {
            if *current == key {
                if record.t < *last_t {
                    return Err(segment_error(format!(
                        "time goes backwards in {key}: {} after {}",
                        record.t, last_t
                    )));
                }
                *last_t = record.t;
                return Ok(false);
            }
            self.finished.insert(current.clone());
        }
        if self.finished.contains(&key) {
            return Err(segment_error(format!("segment {key} is not contiguous")));
        }
        self.current = Some((key, record.t));
        Ok(true)
    }
}

/// A contiguous, time-ordered trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub key: SegmentKey,
    pub role: Role,
    /// Line of the first record.
    pub line: usize,
    pub samples: Vec<TrajectorySample>,
}

/// Groups validated trajectory records into segments, keyed for lookup.
pub fn group_segments(records: &[(usize, TrajectoryRecord)]) -> Result<BTreeMap<SegmentKey, Segment>> {
    let mut checker = SegmentChecker::default();
    let mut segments = BTreeMap::new();
    let mut current: Option<Segment> = None;
    for (line, record) in records {
        if checker.push(*line, record)? {
            if let Some(done) = current.take() {
                segments.insert(done.key.clone(), done);
            }
            current = Some(Segment {
                key: record.key(),
                role: record.role,
                line: *line,
                samples: Vec::new(),
            });
        }
        current.as_mut().expect("segment opened").samples.push(record.sample());
    }
    if let Some(done) = current {
        segments.insert(done.key.clone(), done);
    }
    Ok(segments)
}

/// Validates rating records and rejects duplicate answers.
pub fn check_ratings(records: &[(usize, RatingRecord)]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (line, record) in records {
        record.validate().map_err(|message| Error::Parse { line: *line, message })?;
        if !seen.insert((record.key(), record.item.clone())) {
            return Err(Error::Parse {
                line: *line,
                message: format!("duplicate rating for {} item {}", record.key(), record.item),
            });
        }
    }
    Ok(())
}
