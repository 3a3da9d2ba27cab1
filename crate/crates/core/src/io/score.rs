use std::io::{BufRead, Write};

use serde::Serialize;

use super::format::round_sig;
use super::records::{parse_line, SegmentChecker, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::safety::{classify_zone, gsi_from_margin, safety_margin, Rho, SafetyParams};

#[derive(Serialize)]
struct Scored {
    #[serde(flatten)]
    record: TrajectoryRecord,
    margin: f64,
    gsi: f64,
    zone: &'static str,
}

/// Scores a trajectory stream line by line. Blank lines are skipped; every
/// other line produces exactly one output line. Returns the number written.
pub fn score_stream<R: BufRead, W: Write>(input: R, mut output: W, rho: Rho, params: &SafetyParams) -> Result<usize> {
    params.validate()?;
    let mut checker = SegmentChecker::default();
    let mut written = 0;
    for (i, text) in input.lines().enumerate() {
        let line = i + 1;
        let text = text.map_err(|e| Error::io("input", e))?;
        if text.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = parse_line(&text, line)?;
        checker.push(line, &record)?;
        let margin = safety_margin(record.d, record.v, params);
        let scored = Scored {
            margin: round_sig(margin),
            gsi: round_sig(gsi_from_margin(margin, rho)),
            zone: classify_zone(record.d, params).as_str(),
            record: TrajectoryRecord {
                t: round_sig(record.t),
                d: round_sig(record.d),
                v: round_sig(record.v),
                bearing: record.bearing.map(round_sig),
                ..record
            },
        };
        serde_json::to_writer(&mut output, &scored).map_err(|e| Error::io("output", e.into()))?;
        output.write_all(b"\n").map_err(|e| Error::io("output", e))?;
        written += 1;
    }
    output.flush().map_err(|e| Error::io("output", e))?;
    Ok(written)
}
