//! File formats: time-tag CSV (canonical) and binary, phase-series CSV, and
//! stability-result CSV. All writers are byte-deterministic.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::Error;
use crate::stability::StabilityResult;
use crate::timebase::{PhaseSeries, TimeTagSeries, Timestamp};
use crate::Result;

const TAG_HEADER: &str = "channel,timestamp_fs";
const PHASE_HEADER: &str = "index,x_ps";
const STABILITY_HEADER: &str = "tau_s,tdev_ps,ci_low_ps,ci_high_ps,n_used";

/// Write channels as `channel,timestamp_fs` rows, one event per row, in
/// time order across channels (ties by channel number).
pub fn write_tags_csv(path: &Path, channels: &[&TimeTagSeries]) -> Result<()> {
    let mut rows: Vec<(i128, u32)> = channels
        .iter()
        .flat_map(|c| c.tags().iter().map(move |t| (t.as_fs(), c.channel())))
        .collect();
    rows.sort_unstable();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TAG_HEADER}")?;
    for (t, ch) in rows {
        writeln!(w, "{ch},{t}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a tag CSV back into per-channel series, channels sorted ascending.
pub fn read_tags_csv(path: &Path) -> Result<Vec<TimeTagSeries>> {
    let name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut per_channel: std::collections::BTreeMap<u32, Vec<Timestamp>> = Default::default();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == TAG_HEADER => {}
        Some((_, Ok(h))) => {
            return Err(Error::MalformedFile {
                path: name,
                line: 1,
                detail: format!("expected header '{TAG_HEADER}', got '{h}'"),
            })
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => {
            return Err(Error::MalformedFile {
                path: name,
                line: 1,
                detail: "empty file".into(),
            })
        }
    }
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (ch_text, t_text) = trimmed.split_once(',').ok_or_else(|| Error::MalformedFile {
            path: name.clone(),
            line: lineno,
            detail: "expected 'channel,timestamp_fs'".into(),
        })?;
        let ch: u32 = ch_text.trim().parse().map_err(|_| Error::MalformedFile {
            path: name.clone(),
            line: lineno,
            detail: format!("bad channel '{ch_text}'"),
        })?;
        let t: i128 = t_text.trim().parse().map_err(|_| Error::MalformedFile {
            path: name.clone(),
            line: lineno,
            detail: format!("bad timestamp '{t_text}'"),
        })?;
        per_channel.entry(ch).or_default().push(Timestamp(t));
    }
    per_channel
        .into_iter()
        .map(|(ch, tags)| TimeTagSeries::new(ch, tags))
        .collect()
}

/// Binary tag variant for large captures: repeated little-endian
/// `(u32 channel, i64 femtoseconds)` records.
pub fn write_tags_bin(path: &Path, channels: &[&TimeTagSeries]) -> Result<()> {
    let mut rows: Vec<(i128, u32)> = channels
        .iter()
        .flat_map(|c| c.tags().iter().map(move |t| (t.as_fs(), c.channel())))
        .collect();
    rows.sort_unstable();
    let mut w = BufWriter::new(File::create(path)?);
    for (t, ch) in rows {
        let t64 = i64::try_from(t).map_err(|_| Error::InvalidValue {
            what: "binary timestamp",
            detail: format!("{t} fs exceeds the i64 record range"),
        })?;
        w.write_all(&ch.to_le_bytes())?;
        w.write_all(&t64.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tags_bin(path: &Path) -> Result<Vec<TimeTagSeries>> {
    let name = path.display().to_string();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 12 != 0 {
        return Err(Error::MalformedFile {
            path: name,
            line: 0,
            detail: format!("{} bytes is not a whole number of 12-byte records", bytes.len()),
        });
    }
    let mut per_channel: std::collections::BTreeMap<u32, Vec<Timestamp>> = Default::default();
    for rec in bytes.chunks_exact(12) {
        let ch = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let t = i64::from_le_bytes(rec[4..12].try_into().unwrap());
        per_channel.entry(ch).or_default().push(Timestamp(t as i128));
    }
    per_channel
        .into_iter()
        .map(|(ch, tags)| TimeTagSeries::new(ch, tags))
        .collect()
}

/// Read tags by extension: `.bin` binary, anything else the canonical CSV.
pub fn read_tags(path: &Path) -> Result<Vec<TimeTagSeries>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_tags_bin(path),
        _ => read_tags_csv(path),
    }
}

/// Phase-series CSV: a `# tau0_s=` comment, the header, then
/// `index,x_ps` rows with shortest round-trip float formatting.
pub fn write_phase_csv(path: &Path, series: &PhaseSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# tau0_s={}", series.tau0_s())?;
    writeln!(w, "{PHASE_HEADER}")?;
    for (i, x) in series.samples().iter().enumerate() {
        writeln!(w, "{i},{x}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_phase_csv(path: &Path) -> Result<PhaseSeries> {
    let name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut tau0: Option<f64> = None;
    let mut samples = Vec::new();
    let mut seen_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("tau0_s=") {
                tau0 = Some(v.trim().parse().map_err(|_| Error::MalformedFile {
                    path: name.clone(),
                    line: lineno,
                    detail: format!("bad tau0 '{v}'"),
                })?);
            }
            continue;
        }
        if !seen_header {
            if trimmed != PHASE_HEADER {
                return Err(Error::MalformedFile {
                    path: name,
                    line: lineno,
                    detail: format!("expected header '{PHASE_HEADER}', got '{trimmed}'"),
                });
            }
            seen_header = true;
            continue;
        }
        let (_, x_text) = trimmed.split_once(',').ok_or_else(|| Error::MalformedFile {
            path: name.clone(),
            line: lineno,
            detail: "expected 'index,x_ps'".into(),
        })?;
        let x: f64 = x_text.trim().parse().map_err(|_| Error::MalformedFile {
            path: name.clone(),
            line: lineno,
            detail: format!("bad sample '{x_text}'"),
        })?;
        samples.push(x);
    }
    let tau0 = tau0.ok_or_else(|| Error::MalformedFile {
        path: name.clone(),
        line: 0,
        detail: "missing '# tau0_s=' line".into(),
    })?;
    PhaseSeries::new(tau0, samples, name)
}

/// Fixed-decimal formatting with at least `sig` significant digits.
pub fn fixed_sig(v: f64, sig: usize) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return format!("{:.*}", sig, 0.0);
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - magnitude).clamp(0, 40) as usize;
    format!("{:.*}", decimals, v)
}

/// Stability CSV: one row per averaging time, fixed decimals with >= 6
/// significant digits; absent confidence bounds print as `nan`.
pub fn write_stability_csv(path: &Path, result: &StabilityResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{STABILITY_HEADER}")?;
    for p in &result.points {
        let (lo, hi) = p.ci.map_or((f64::NAN, f64::NAN), |c| c);
        writeln!(
            w,
            "{},{},{},{},{}",
            fixed_sig(p.tau_s, 8),
            fixed_sig(p.value, 8),
            fixed_sig(lo, 8),
            fixed_sig(hi, 8),
            p.n_used
        )?;
    }
    w.flush()?;
    Ok(())
}
