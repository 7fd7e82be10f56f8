//! File formats: 16-bit PCM mono WAV for audio; a commented CSV and a
//! JSON-lines record for seismic traces.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AudioClip, SeismicTrace};
use crate::error::{Error, Result};

const PCM_SCALE: f64 = 32767.0;

/// Writes a clip as RIFF/WAVE, PCM16, mono. Samples are clamped to [-1, 1]
/// and the frame rate is rounded to whole hertz.
pub fn write_wav<W: Write>(clip: &AudioClip, mut w: W) -> Result<()> {
    let rate = clip.frame_rate_hz.round();
    if !(rate >= 1.0 && rate <= u32::MAX as f64) {
        return Err(Error::invalid_input(format!(
            "frame rate {} cannot be stored in a WAV header",
            clip.frame_rate_hz
        )));
    }
    let rate = rate as u32;
    let data_len = u32::try_from(clip.samples.len() * 2)
        .map_err(|_| Error::invalid_input("clip too long for a WAV file"))?;
    let mut buf = Vec::with_capacity(44 + data_len as usize);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&(36 + data_len).to_le_bytes());
    buf.extend_from_slice(b"WAVE");
    buf.extend_from_slice(b"fmt ");
    buf.extend_from_slice(&16u32.to_le_bytes());
    buf.extend_from_slice(&1u16.to_le_bytes()); // PCM
    buf.extend_from_slice(&1u16.to_le_bytes()); // mono
    buf.extend_from_slice(&rate.to_le_bytes());
    buf.extend_from_slice(&(rate * 2).to_le_bytes());
    buf.extend_from_slice(&2u16.to_le_bytes());
    buf.extend_from_slice(&16u16.to_le_bytes());
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&data_len.to_le_bytes());
    for s in &clip.samples {
        let q = (s.clamp(-1.0, 1.0) * PCM_SCALE).round() as i16;
        buf.extend_from_slice(&q.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_wav<R: Read>(mut r: R) -> Result<AudioClip> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_wav(&bytes)
}

fn parse_wav(bytes: &[u8]) -> Result<AudioClip> {
    let take = |off: usize, n: usize| -> Result<&[u8]> {
        bytes
            .get(off..off + n)
            .ok_or_else(|| Error::parse(bytes.len(), format!("truncated: need {n} bytes at {off}")))
    };
    let u16_at = |off: usize| -> Result<u16> {
        let b = take(off, 2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    };
    let u32_at = |off: usize| -> Result<u32> {
        let b = take(off, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };

    if take(0, 4)? != b"RIFF" {
        return Err(Error::parse(0, "missing RIFF tag"));
    }
    if take(8, 4)? != b"WAVE" {
        return Err(Error::parse(8, "missing WAVE tag"));
    }

    let mut off = 12;
    let mut rate: Option<u32> = None;
    loop {
        let id = take(off, 4)?;
        let size = u32_at(off + 4)? as usize;
        let body = off + 8;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::parse(off + 4, "fmt chunk shorter than 16 bytes"));
                }
                let format = u16_at(body)?;
                if format != 1 {
                    return Err(Error::parse(
                        body,
                        format!("unsupported format tag {format}"),
                    ));
                }
                let channels = u16_at(body + 2)?;
                if channels != 1 {
                    return Err(Error::parse(
                        body + 2,
                        format!("expected mono, found {channels} channels"),
                    ));
                }
                let bits = u16_at(body + 14)?;
                if bits != 16 {
                    return Err(Error::parse(
                        body + 14,
                        format!("expected 16-bit, found {bits}"),
                    ));
                }
                let r = u32_at(body + 4)?;
                if r == 0 {
                    return Err(Error::parse(body + 4, "zero sample rate"));
                }
                rate = Some(r);
            }
            b"data" => {
                let rate = rate.ok_or_else(|| Error::parse(off, "data chunk before fmt chunk"))?;
                if !size.is_multiple_of(2) {
                    return Err(Error::parse(off + 4, "odd data length for 16-bit samples"));
                }
                let data = take(body, size)?;
                let samples = data
                    .chunks_exact(2)
                    .map(|b| (i16::from_le_bytes([b[0], b[1]]) as f64 / PCM_SCALE).max(-1.0))
                    .collect();
                return AudioClip::new(samples, rate as f64);
            }
            _ => {}
        }
        // chunks are word aligned
        off = body + size + (size & 1);
    }
}

pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_wav(clip, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    read_wav(BufReader::new(File::open(path)?))
}

/// CSV layout: `# sample_rate_hz=<rate>` (required) and optionally
/// `# start_time_s=<t>` header lines, then one sample per line.
pub fn write_trace_csv<W: Write>(trace: &SeismicTrace, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "# sample_rate_hz={}", trace.sample_rate_hz)?;
    if trace.start_time_s != 0.0 {
        writeln!(w, "# start_time_s={}", trace.start_time_s)?;
    }
    for s in &trace.samples {
        // `{}` on f64 prints the shortest string that parses back exactly
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(mut r: R) -> Result<SeismicTrace> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut rate: Option<f64> = None;
    let mut start = 0.0;
    let mut samples = Vec::new();
    let mut offset = 0usize;
    for raw in text.split_inclusive('\n') {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('#') {
            if let Some((key, value)) = header.trim().split_once('=') {
                let value: f64 = value.trim().parse().map_err(|_| {
                    Error::parse(offset, format!("bad header value for {}", key.trim()))
                })?;
                match key.trim() {
                    "sample_rate_hz" => rate = Some(value),
                    "start_time_s" => start = value,
                    _ => {}
                }
            }
        } else if !line.is_empty() {
            if rate.is_none() {
                return Err(Error::parse(offset, "missing '# sample_rate_hz=' header"));
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::parse(offset, format!("not a number: {line:?}")))?;
            samples.push(v);
        }
        offset += raw.len();
    }
    let rate = rate.ok_or_else(|| Error::parse(0, "missing '# sample_rate_hz=' header"))?;
    SeismicTrace::new(samples, rate, start).map_err(|_| Error::parse(0, "sample rate must be > 0"))
}

pub fn save_trace_csv(trace: &SeismicTrace, path: impl AsRef<Path>) -> Result<()> {
    write_trace_csv(trace, File::create(path)?)
}

pub fn load_trace_csv(path: impl AsRef<Path>) -> Result<SeismicTrace> {
    read_trace_csv(BufReader::new(File::open(path)?))
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    sample_rate_hz: f64,
    #[serde(default)]
    start_time_s: f64,
    samples: Vec<f64>,
}

/// One JSON object per line, one trace per object.
pub fn write_trace_jsonl<W: Write>(traces: &[SeismicTrace], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    for t in traces {
        let rec = TraceRecord {
            sample_rate_hz: t.sample_rate_hz,
            start_time_s: t.start_time_s,
            samples: t.samples.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_jsonl<R: Read>(mut r: R) -> Result<Vec<SeismicTrace>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut out = Vec::new();
    let mut offset = 0usize;
    for raw in text.split_inclusive('\n') {
        if !raw.trim().is_empty() {
            let rec: TraceRecord = serde_json::from_str(raw)
                .map_err(|e| Error::parse(offset + e.column().saturating_sub(1), e.to_string()))?;
            let trace = SeismicTrace::new(rec.samples, rec.sample_rate_hz, rec.start_time_s)
                .map_err(|_| Error::parse(offset, "sample rate must be > 0"))?;
            out.push(trace);
        }
        offset += raw.len();
    }
    Ok(out)
}

pub fn save_trace_jsonl(traces: &[SeismicTrace], path: impl AsRef<Path>) -> Result<()> {
    write_trace_jsonl(traces, File::create(path)?)
}

pub fn load_trace_jsonl(path: impl AsRef<Path>) -> Result<Vec<SeismicTrace>> {
    read_trace_jsonl(BufReader::new(File::open(path)?))
}
