use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serializer;

use super::GazeSample;
use crate::error::{CoreError, Result};

/// Integral timestamps are written as JSON integers.
pub(super) fn ser_time<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.fract() == 0.0 && t.abs() < 9.0e15 {
        s.serialize_i64(*t as i64)
    } else {
        s.serialize_f64(*t)
    }
}

/// Parses a JSON Lines gaze stream, checking timestamp order and finiteness.
pub fn parse_stream(reader: impl BufRead, name: &str) -> Result<Vec<GazeSample>> {
    let mut out: Vec<GazeSample> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CoreError::Parse {
            path: name.to_string(),
            line: i + 1,
            message,
        };
        let s: GazeSample = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if !(s.x.is_finite() && s.y.is_finite() && s.t_ms.is_finite()) || s.t_ms < 0.0 {
            return Err(err("non-finite coordinate or negative timestamp".into()));
        }
        if out.last().is_some_and(|p| s.t_ms < p.t_ms) {
            return Err(err("timestamp decreases".into()));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn read_stream(path: &Path) -> Result<Vec<GazeSample>> {
    let f = File::open(path)?;
    parse_stream(BufReader::new(f), &path.display().to_string())
}

pub fn write_stream(path: &Path, samples: &[GazeSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::Source;

    #[test]
    fn roundtrip_and_integer_timestamps() {
        let s = vec![
            GazeSample::new(0.0, 1.5, 2.0, Source::Tracker),
            GazeSample::new(17.0, 3.0, -4.25, Source::Tracker),
        ];
        let line = serde_json::to_string(&s[1]).unwrap();
        assert_eq!(line, r#"{"t_ms":17,"x":3.0,"y":-4.25,"src":"tracker"}"#);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.jsonl");
        write_stream(&p, &s).unwrap();
        assert_eq!(read_stream(&p).unwrap(), s);
    }

    #[test]
    fn rejects_decreasing_time() {
        let text = "{\"t_ms\":5,\"x\":0,\"y\":0,\"src\":\"webcam\"}\n{\"t_ms\":4,\"x\":0,\"y\":0,\"src\":\"webcam\"}\n";
        let e = parse_stream(text.as_bytes(), "mem").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
