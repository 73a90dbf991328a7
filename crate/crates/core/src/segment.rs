//! Splitting an aligned script into single-speaker segments under a
//! duration cap.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SEGMENT: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub speaker_id: String,
    #[serde(default)]
    pub text: String,
    pub start: f64,
    pub end: f64,
}

impl ScriptLine {
    pub fn new(speaker_id: impl Into<String>, start: f64, end: f64) -> Self {
        Self {
            speaker_id: speaker_id.into(),
            text: String::new(),
            start,
            end,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub speaker_id: String,
    /// Indices into the input line list, contiguous and increasing.
    pub lines: Vec<usize>,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

const LINE_KEYS: [&str; 4] = ["speaker_id", "text", "start", "end"];

/// Parses a JSON array of lines. Unknown keys are rejected unless `lax`.
pub fn parse_script(text: &str, lax: bool) -> Result<Vec<ScriptLine>> {
    let value: Value = serde_json::from_str(text)?;
    let items = value
        .as_array()
        .ok_or_else(|| Error::input("script must be a JSON array of lines"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let obj = item
                .as_object()
                .ok_or_else(|| Error::input(format!("lines[{i}] must be an object")))?;
            if !lax {
                if let Some(k) = obj.keys().find(|k| !LINE_KEYS.contains(&k.as_str())) {
                    return Err(Error::input(format!("lines[{i}].{k}: unknown field")));
                }
            }
            for key in ["speaker_id", "start", "end"] {
                if !obj.contains_key(key) {
                    return Err(Error::input(format!("lines[{i}].{key}: missing field")));
                }
            }
            let mut known = obj.clone();
            known.retain(|k, _| LINE_KEYS.contains(&k.as_str()));
            serde_json::from_value(Value::Object(known)).map_err(|e| Error::input(format!("lines[{i}]: {e}")))
        })
        .collect()
}

pub fn read_script(path: impl AsRef<Path>, lax: bool) -> Result<Vec<ScriptLine>> {
    parse_script(&std::fs::read_to_string(path)?, lax)
}

fn validate(lines: &[ScriptLine], max_dur: f64) -> Result<()> {
    if !(max_dur > 0.0 && max_dur.is_finite()) {
        return Err(Error::input(format!(
            "maximum duration {max_dur} must be positive"
        )));
    }
    for (i, l) in lines.iter().enumerate() {
        if !(l.start.is_finite() && l.end.is_finite() && l.end > l.start) {
            return Err(Error::input(format!(
                "lines[{i}]: end {} must be after start {}",
                l.end, l.start
            )));
        }
        if l.duration() > max_dur {
            return Err(Error::input(format!(
                "lines[{i}]: duration {} exceeds the {max_dur} s cap",
                l.duration()
            )));
        }
        if i > 0 && l.start < lines[i - 1].end {
            return Err(Error::input(format!(
                "lines[{i}] starts at {} before lines[{}] ends at {}",
                l.start,
                i - 1,
                lines[i - 1].end
            )));
        }
    }
    Ok(())
}

/// Greedy packing of `lines[from..]` with segment spans capped at `cap`;
/// returns the number of segments, or `None` if a single line exceeds it.
fn greedy_count(lines: &[ScriptLine], from: usize, cap: f64) -> Option<usize> {
    let mut count = 0;
    let mut i = from;
    while i < lines.len() {
        if lines[i].duration() > cap {
            return None;
        }
        let mut j = i;
        while j + 1 < lines.len() && lines[j + 1].end - lines[i].start <= cap {
            j += 1;
        }
        count += 1;
        i = j + 1;
    }
    Some(count)
}

/// Partition of one same-speaker run, as segment sizes.
///
/// Uses the fewest segments the cap allows; among those, the smallest
/// longest segment; among those, the longest possible leading segments.
fn split_run(run: &[ScriptLine], max_dur: f64) -> Vec<usize> {
    let k = greedy_count(run, 0, max_dur).expect("validated line durations");
    let mut spans: Vec<f64> = Vec::new();
    for i in 0..run.len() {
        for j in i..run.len() {
            let d = run[j].end - run[i].start;
            if d <= max_dur {
                spans.push(d);
            }
        }
    }
    spans.sort_by(f64::total_cmp);
    let best = *spans
        .iter()
        .find(|&&m| greedy_count(run, 0, m).is_some_and(|c| c <= k))
        .expect("max_dur itself is feasible");

    let mut sizes = Vec::with_capacity(k);
    let mut start = 0;
    let mut left = k;
    while start < run.len() {
        let mut end = start;
        for e in start..run.len() {
            if run[e].end - run[start].start > best {
                break;
            }
            let rest_ok = if e + 1 == run.len() {
                true
            } else {
                left > 1 && greedy_count(run, e + 1, best).is_some_and(|c| c < left)
            };
            if rest_ok {
                end = e;
            }
        }
        sizes.push(end - start + 1);
        start = end + 1;
        left = left.saturating_sub(1);
    }
    sizes
}

/// Groups consecutive lines of the same speaker into segments no longer
/// than `max_dur` (measured from the first line's start to the last line's
/// end). Runs that exceed the cap are split at line boundaries as described
/// on [`split_run`].
pub fn segment_script(lines: &[ScriptLine], max_dur: f64) -> Result<Vec<Segment>> {
    validate(lines, max_dur)?;
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let mut j = i;
        while j + 1 < lines.len() && lines[j + 1].speaker_id == lines[i].speaker_id {
            j += 1;
        }
        let mut first = i;
        for size in split_run(&lines[i..=j], max_dur) {
            let last = first + size - 1;
            out.push(Segment {
                speaker_id: lines[i].speaker_id.clone(),
                lines: (first..=last).collect(),
                start: lines[first].start,
                end: lines[last].end,
            });
            first = last + 1;
        }
        i = j + 1;
    }
    Ok(out)
}
