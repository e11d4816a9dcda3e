//! Beat event lists: ordered event times with metrical positions, plus the
//! text file format shared by annotations and tracker output.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One beat event: time in seconds and optional metrical position
/// (1 = downbeat).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatEvent {
    pub time: f64,
    pub position: Option<u32>,
}

/// Ordered list of beat events. Times are strictly increasing; when
/// `beats_per_bar` is known, positions cycle `1..=beats_per_bar`.
#[derive(Debug, Clone, Default)]
pub struct BeatList {
    pub events: Vec<BeatEvent>,
    pub beats_per_bar: Option<u32>,
}

impl BeatList {
    pub fn new(events: Vec<BeatEvent>, beats_per_bar: Option<u32>) -> Result<Self> {
        for pair in events.windows(2) {
            if pair[1].time <= pair[0].time {
                return Err(Error::InvalidInput(format!(
                    "beat times must be strictly increasing ({} then {})",
                    pair[0].time, pair[1].time
                )));
            }
        }
        Ok(Self {
            events,
            beats_per_bar,
        })
    }

    /// Positions-unset list from bare times.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        Self::new(
            times
                .iter()
                .map(|&time| BeatEvent {
                    time,
                    position: None,
                })
                .collect(),
            None,
        )
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    /// Events with metrical position 1.
    pub fn downbeats(&self) -> BeatList {
        BeatList {
            events: self
                .events
                .iter()
                .filter(|e| e.position == Some(1))
                .copied()
                .collect(),
            beats_per_bar: self.beats_per_bar,
        }
    }

    /// Events within `[start, end)` seconds, re-offset so `start` maps to 0.
    pub fn window(&self, start: f64, end: f64) -> BeatList {
        BeatList {
            events: self
                .events
                .iter()
                .filter(|e| e.time >= start && e.time < end)
                .map(|e| BeatEvent {
                    time: e.time - start,
                    position: e.position,
                })
                .collect(),
            beats_per_bar: self.beats_per_bar,
        }
    }

    /// Shift all event times by `offset` seconds.
    pub fn shifted(&self, offset: f64) -> BeatList {
        BeatList {
            events: self
                .events
                .iter()
                .map(|e| BeatEvent {
                    time: e.time + offset,
                    position: e.position,
                })
                .collect(),
            beats_per_bar: self.beats_per_bar,
        }
    }

    /// Write as text: one `time<TAB>position` line per event, times with
    /// millisecond-or-better precision, empty position column for
    /// position-less events.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(&display, e))?,
        );
        for e in &self.events {
            match e.position {
                Some(p) => writeln!(out, "{:.6}\t{p}", e.time),
                None => writeln!(out, "{:.6}\t", e.time),
            }
            .map_err(|e| Error::io(&display, e))?;
        }
        Ok(())
    }

    /// Read a beats file. Accepts tab, comma or space separated columns and
    /// both plain integer positions and the `bar.beat` convention used by
    /// public annotation releases (the digits after the dot are the beat).
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut events = Vec::new();
        for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&display, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split(|c| c == '\t' || c == ',' || c == ' ');
            let time_tok = fields.next().unwrap_or("");
            let time: f64 = time_tok.parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                message: format!("bad time value {time_tok:?}"),
            })?;
            let pos_tok = fields.find(|t| !t.is_empty());
            let position = match pos_tok {
                None => None,
                Some(tok) => Some(parse_position(tok).ok_or_else(|| Error::Parse {
                    path: display.clone(),
                    line: idx + 1,
                    message: format!("bad position value {tok:?}"),
                })?),
            };
            events.push(BeatEvent { time, position });
        }
        events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
        Self::new(events, None)
    }
}

fn parse_position(tok: &str) -> Option<u32> {
    if let Some((_, beat)) = tok.split_once('.') {
        // bar.beat convention: "33.2" is beat 2 of bar 33
        let beat: u32 = beat.parse().ok()?;
        (beat >= 1).then_some(beat)
    } else {
        let p: u32 = tok.parse().ok()?;
        (p >= 1).then_some(p)
    }
}
