use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Raster,
    Uds,
    LineHop,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Raster => "raster",
            Scheme::Uds => "uds",
            Scheme::LineHop => "linehop",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raster" => Ok(Scheme::Raster),
            "uds" => Ok(Scheme::Uds),
            "linehop" | "line-hop" | "line_hop" => Ok(Scheme::LineHop),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Ordered probe positions with a common dwell time.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub height: usize,
    pub width: usize,
    /// `(row, col)` in traversal order.
    pub positions: Vec<(usize, usize)>,
    /// Dwell time per position in microseconds.
    pub dwell: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

impl SamplingPlan {
    /// Number of probe positions, M.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn ratio(&self) -> f64 {
        self.len() as f64 / self.pixel_count() as f64
    }

    pub fn mask(&self) -> Result<Mask> {
        Mask::from_positions(self.height, self.width, &self.positions)
    }

    /// Total exposure `t_d * M` in microsecond-pixels.
    pub fn dose(&self) -> f64 {
        self.dwell * self.len() as f64
    }

    pub fn with_dwell(mut self, dwell: f64) -> Self {
        self.dwell = dwell;
        self
    }

    /// Writes the header `H W M t_d scheme seed` followed by one `row,col`
    /// line per position.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{} {} {} {} {} {}",
            self.height,
            self.width,
            self.len(),
            self.dwell,
            self.scheme,
            self.seed
        )?;
        for &(r, c) in &self.positions {
            writeln!(out, "{r},{c}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("plan text is ASCII")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty plan file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!("bad plan header {header:?}")));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad plan header field {s:?}")))
        };
        let height = num(fields[0])?;
        let width = num(fields[1])?;
        let m = num(fields[2])?;
        let dwell = fields[3]
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("bad dwell {:?}", fields[3])))?;
        let scheme = fields[4].parse()?;
        let seed = fields[5]
            .parse::<u64>()
            .map_err(|_| Error::Format(format!("bad seed {:?}", fields[5])))?;
        let mut positions = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            positions.push(parse_position(line)?);
        }
        if positions.len() != m {
            return Err(Error::Format(format!(
                "plan header declares {m} positions, found {}",
                positions.len()
            )));
        }
        if let Some(&(r, c)) = positions.iter().find(|&&(r, c)| r >= height || c >= width) {
            return Err(Error::Format(format!("position ({r}, {c}) out of bounds")));
        }
        Ok(Self {
            height,
            width,
            positions,
            dwell,
            scheme,
            seed,
        })
    }
}

pub(crate) fn parse_position(line: &str) -> Result<(usize, usize)> {
    let (r, c) = line
        .split_once(',')
        .ok_or_else(|| Error::Format(format!("expected row,col, got {line:?}")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("bad coordinate in {line:?}")))
    };
    Ok((parse(r)?, parse(c)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let plan = SamplingPlan {
            height: 3,
            width: 4,
            positions: vec![(0, 0), (2, 3), (1, 1)],
            dwell: 13.5,
            scheme: Scheme::LineHop,
            seed: 42,
        };
        let text = plan.to_text();
        assert!(text.starts_with("3 4 3 13.5 linehop 42\n0,0\n"));
        let back = SamplingPlan::read_text(text.as_bytes()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn rejects_inconsistent_files() {
        assert!(SamplingPlan::read_text("2 2 2 1 raster 0\n0,0\n".as_bytes()).is_err());
        assert!(SamplingPlan::read_text("2 2 1 1 raster 0\n5,0\n".as_bytes()).is_err());
        assert!(SamplingPlan::read_text("2 2 1 1 spiral 0\n0,0\n".as_bytes()).is_err());
    }
}
