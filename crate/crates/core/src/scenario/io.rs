use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{RangeDiffSample, RangeSample, Scenario};
use crate::csvfmt::sig9;
use crate::error::{Error, Result};

pub const RANGE_CSV_HEADER: &str = "t,i,j,delta";
pub const RANGEDIFF_CSV_HEADER: &str = "t,tag,a,b,ddiff";

/// Reads a TOML scenario file and validates it.
pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s: Scenario = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    s.validate()?;
    Ok(s)
}

pub fn write_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    let text = toml::to_string(scenario).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_range_csv(path: &Path, samples: &[RangeSample]) -> Result<()> {
    let mut out = String::with_capacity(32 * samples.len() + 16);
    out.push_str(RANGE_CSV_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", sig9(s.t), s.i, s.j, sig9(s.delta));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_rangediff_csv(path: &Path, samples: &[RangeDiffSample]) -> Result<()> {
    let mut out = String::with_capacity(40 * samples.len() + 16);
    out.push_str(RANGEDIFF_CSV_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sig9(s.t),
            s.tag,
            s.anchor_a,
            s.anchor_b,
            sig9(s.ddiff)
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_range_csv(path: &Path) -> Result<Vec<RangeSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(RANGE_CSV_HEADER) {
        return Err(Error::Config(format!(
            "{}: expected header `{RANGE_CSV_HEADER}`",
            path.display()
        )));
    }
    let bad = |n: usize| Error::Config(format!("{}: malformed row {}", path.display(), n + 2));
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad(n));
            }
            Ok(RangeSample {
                t: f[0].parse().map_err(|_| bad(n))?,
                i: f[1].parse().map_err(|_| bad(n))?,
                j: f[2].parse().map_err(|_| bad(n))?,
                delta: f[3].parse().map_err(|_| bad(n))?,
            })
        })
        .collect()
}
