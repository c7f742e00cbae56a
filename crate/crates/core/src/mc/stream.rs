use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::to_ps;

/// Output port detector of the beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Signal1,
    Signal2,
    Dark,
    Background,
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detector::C => "C",
            Detector::D => "D",
        })
    }
}

impl FromStr for Detector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "C" | "c" => Ok(Detector::C),
            "D" | "d" => Ok(Detector::D),
            other => Err(Error::domain(format!("unknown detector id `{other}`"))),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Signal1 => "signal1",
            Provenance::Signal2 => "signal2",
            Provenance::Dark => "dark",
            Provenance::Background => "background",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "signal1" => Ok(Provenance::Signal1),
            "signal2" => Ok(Provenance::Signal2),
            "dark" => Ok(Provenance::Dark),
            "background" => Ok(Provenance::Background),
            other => Err(Error::domain(format!("unknown provenance `{other}`"))),
        }
    }
}

/// A registered detector click with an integer-picosecond timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Click {
    pub detector: Detector,
    pub time_ps: i64,
    pub provenance: Provenance,
}

/// Time-ordered clicks of both detectors over `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickStream {
    pub clicks: Vec<Click>,
    /// Acquisition time (s).
    pub duration: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClickRow {
    detector_id: String,
    time_ps: i64,
    provenance: String,
}

impl ClickStream {
    pub fn empty(duration: f64, seed: u64) -> Self {
        Self {
            clicks: Vec::new(),
            duration,
            seed,
        }
    }

    pub fn duration_ps(&self) -> i64 {
        to_ps(self.duration)
    }

    /// Sorted timestamps of one detector.
    pub fn times(&self, detector: Detector) -> Vec<i64> {
        self.clicks
            .iter()
            .filter(|c| c.detector == detector)
            .map(|c| c.time_ps)
            .collect()
    }

    pub fn count(&self, detector: Detector) -> usize {
        self.clicks.iter().filter(|c| c.detector == detector).count()
    }

    pub fn count_by(&self, detector: Detector, provenance: Provenance) -> usize {
        self.clicks
            .iter()
            .filter(|c| c.detector == detector && c.provenance == provenance)
            .count()
    }

    /// Checks ordering, range and per-detector strict monotonicity.
    pub fn validate(&self) -> Result<()> {
        let end = self.duration_ps();
        let mut last = [None::<i64>; 2];
        let mut prev_time = i64::MIN;
        for c in &self.clicks {
            if c.time_ps < 0 || c.time_ps > end {
                return Err(Error::Validity(format!(
                    "click at {} ps outside [0, {end}] ps",
                    c.time_ps
                )));
            }
            if c.time_ps < prev_time {
                return Err(Error::Validity("clicks are not time-ordered".into()));
            }
            prev_time = c.time_ps;
            let slot = &mut last[c.detector as usize];
            if let Some(prev) = *slot {
                if c.time_ps <= prev {
                    return Err(Error::Validity(format!(
                        "detector {} timestamps not strictly increasing at {} ps",
                        c.detector, c.time_ps
                    )));
                }
            }
            *slot = Some(c.time_ps);
        }
        Ok(())
    }

    /// CSV with header `detector_id,time_ps,provenance`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for c in &self.clicks {
            wr.serialize(ClickRow {
                detector_id: c.detector.to_string(),
                time_ps: c.time_ps,
                provenance: c.provenance.to_string(),
            })?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads the CSV written by [`ClickStream::write_csv`]. Rows are sorted
    /// by time; `duration` and `seed` are supplied by the caller (or a JSON
    /// sidecar) since the CSV carries only clicks.
    pub fn read_csv<R: Read>(r: R, duration: f64, seed: u64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut clicks = Vec::new();
        for row in rd.deserialize::<ClickRow>() {
            let row = row?;
            clicks.push(Click {
                detector: row.detector_id.parse()?,
                time_ps: row.time_ps,
                provenance: row.provenance.parse()?,
            });
        }
        clicks.sort_by_key(|c| (c.time_ps, c.detector));
        let s = Self {
            clicks,
            duration,
            seed,
        };
        s.validate()?;
        Ok(s)
    }
}
