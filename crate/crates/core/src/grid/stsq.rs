//! The `STSQ1` sequence file format.
//!
//! ```text
//! STSQ1
//! dims: 64 64
//! spacing: 1 1
//! origin: -32 -32
//! frames: 17
//! times: 0 1 2 ...
//!
//! <frames * prod(dims) little-endian f32, frame-major, fastest axis first>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Grid, Image, ImageSequence};
use crate::error::{Error, Result};

const MAGIC: &str = "STSQ1";

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_sequence(seq: &ImageSequence, path: impl AsRef<Path>) -> Result<()> {
    let g = seq.grid();
    let mut buf = Vec::with_capacity(256 + 4 * seq.len() * g.cell_count());
    writeln!(buf, "{MAGIC}")?;
    writeln!(buf, "dims: {}", join(g.dims()))?;
    writeln!(buf, "spacing: {}", join(g.spacing()))?;
    writeln!(buf, "origin: {}", join(g.origin()))?;
    writeln!(buf, "frames: {}", seq.len())?;
    writeln!(buf, "times: {}", join(seq.times()))?;
    writeln!(buf)?;
    for frame in seq.frames() {
        for &v in frame.values() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<ImageSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let malformed = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };

    // header: 6 lines followed by an empty line
    let mut pos = 0;
    let mut lines = Vec::with_capacity(7);
    while lines.len() < 7 {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("header ends before the blank separator line".into()))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| malformed("header is not valid UTF-8".into()))?;
        lines.push(line.trim_end_matches('\r').to_string());
        pos += end + 1;
    }
    if lines[0] != MAGIC {
        return Err(malformed(format!("bad magic {:?}", lines[0])));
    }
    if !lines[6].is_empty() {
        return Err(malformed("missing blank line after header".into()));
    }

    fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
        line.strip_prefix(key)?.strip_prefix(':').map(str::trim)
    }
    fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
        s.split_whitespace().map(|t| t.parse().ok()).collect()
    }
    let get = |i: usize, key: &str| {
        field(&lines[i], key).ok_or_else(|| malformed(format!("expected `{key}:` on line {}", i + 1)))
    };

    let dims: Vec<usize> =
        parse_list(get(1, "dims")?).ok_or_else(|| malformed("unparsable dims".into()))?;
    let spacing: Vec<f64> =
        parse_list(get(2, "spacing")?).ok_or_else(|| malformed("unparsable spacing".into()))?;
    let origin: Vec<f64> =
        parse_list(get(3, "origin")?).ok_or_else(|| malformed("unparsable origin".into()))?;
    let n: usize = get(4, "frames")?
        .parse()
        .map_err(|_| malformed("unparsable frame count".into()))?;
    let times: Vec<f64> =
        parse_list(get(5, "times")?).ok_or_else(|| malformed("unparsable times".into()))?;

    if !(1..=3).contains(&dims.len()) {
        return Err(Error::DimensionMismatch(format!("{} spatial axes", dims.len())));
    }
    if spacing.len() != dims.len() || origin.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "dims has {} axes, spacing {}, origin {}",
            dims.len(),
            spacing.len(),
            origin.len()
        )));
    }
    if times.len() != n {
        return Err(Error::DimensionMismatch(format!("{} times for {n} frames", times.len())));
    }

    let grid = Grid::new(dims, spacing, origin)?;
    let cells = grid.cell_count();
    let payload = &bytes[pos..];
    let expected = 4 * cells * n;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "payload has {} trailing bytes",
            payload.len() - expected
        )));
    }

    let frames = payload
        .chunks_exact(4 * cells)
        .map(|chunk| {
            let values = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            Image::new(grid.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    ImageSequence::new(frames, times)
}
