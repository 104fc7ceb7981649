//! Image and mask file formats.
//!
//! - PGM (`P5`, 8- or 16-bit big-endian samples). Values are normalised by
//!   the file's maxval on read and the maxval is kept as the image peak.
//! - Raw float images: 16-byte little-endian header (`b"CSIM"`, `u32`
//!   height, `u32` width, `u32` reserved = 0) followed by `f32` pixels in
//!   row-major order.
//! - PBM (`P4`) masks, where a set bit marks a sampled pixel.
//! - Plain-text index lists with one `row,col` per line.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::imaging::{Image, Mask};
use crate::sampling::SamplingPlan;

pub const RAW_MAGIC: &[u8; 4] = b"CSIM";

/// Reads whitespace/comment-separated header tokens of a netpbm file.
fn read_pnm_header<R: Read>(input: &mut R, count: usize) -> Result<Vec<String>> {
    let mut tokens = Vec::with_capacity(count);
    let mut current = String::new();
    let mut byte = [0u8; 1];
    let mut in_comment = false;
    while tokens.len() < count {
        if input.read(&mut byte)? == 0 {
            return Err(Error::Format("truncated netpbm header".into()));
        }
        let b = byte[0];
        if in_comment {
            in_comment = b != b'\n' && b != b'\r';
            continue;
        }
        if b == b'#' {
            in_comment = true;
        } else if b.is_ascii_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else {
            current.push(b as char);
        }
    }
    Ok(tokens)
}

fn header_number(token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::Format(format!("bad netpbm header value {token:?}")))
}

pub fn read_pgm<R: Read>(mut input: R) -> Result<Image> {
    let header = read_pnm_header(&mut input, 4)?;
    if header[0] != "P5" {
        return Err(Error::Format(format!("expected P5 PGM, found {:?}", header[0])));
    }
    let width = header_number(&header[1])?;
    let height = header_number(&header[2])?;
    let maxval = header_number(&header[3])?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let bytes = if maxval < 256 { 1 } else { 2 };
    let mut buf = vec![0u8; width * height * bytes];
    input.read_exact(&mut buf)?;
    let scale = maxval as f64;
    let data = if bytes == 1 {
        buf.iter().map(|&v| v as f64 / scale).collect()
    } else {
        buf.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    Ok(Image::new(height, width, data)?.with_peak(scale))
}

/// Writes `image` as PGM with the given maxval (255 or 65535 typically).
/// Values are clamped to `[0, 1]` before quantisation.
pub fn write_pgm<W: Write>(image: &Image, maxval: u16, mut out: W) -> Result<()> {
    if maxval == 0 {
        return Err(Error::InvalidParameter("PGM maxval must be positive".into()));
    }
    write!(out, "P5\n{} {}\n{}\n", image.width(), image.height(), maxval)?;
    let scale = maxval as f64;
    let quantise = |v: f64| (v.clamp(0.0, 1.0) * scale).round() as u16;
    if maxval < 256 {
        let buf: Vec<u8> = image.data().iter().map(|&v| quantise(v) as u8).collect();
        out.write_all(&buf)?;
    } else {
        let buf: Vec<u8> = image
            .data()
            .iter()
            .flat_map(|&v| quantise(v).to_be_bytes())
            .collect();
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_raw<R: Read>(mut input: R) -> Result<Image> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[0..4] != RAW_MAGIC {
        return Err(Error::Format("missing CSIM magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (height, width) = (word(4), word(8));
    let mut buf = vec![0u8; height * width * 4];
    input.read_exact(&mut buf)?;
    let data = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image::new(height, width, data)
}

pub fn write_raw<W: Write>(image: &Image, mut out: W) -> Result<()> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("dimension {v} too large")))
    };
    out.write_all(RAW_MAGIC)?;
    out.write_all(&dim(image.height())?.to_le_bytes())?;
    out.write_all(&dim(image.width())?.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    let buf: Vec<u8> = image
        .data()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_pbm<R: Read>(mut input: R) -> Result<Mask> {
    let header = read_pnm_header(&mut input, 3)?;
    if header[0] != "P4" {
        return Err(Error::Format(format!("expected P4 PBM, found {:?}", header[0])));
    }
    let width = header_number(&header[1])?;
    let height = header_number(&header[2])?;
    let row_bytes = width.div_ceil(8);
    let mut buf = vec![0u8; row_bytes * height];
    input.read_exact(&mut buf)?;
    let mut sampled = Vec::with_capacity(width * height);
    for row in buf.chunks_exact(row_bytes.max(1)).take(height) {
        for c in 0..width {
            sampled.push(row[c / 8] & (0x80 >> (c % 8)) != 0);
        }
    }
    Mask::new(height, width, sampled)
}

pub fn write_pbm<W: Write>(mask: &Mask, mut out: W) -> Result<()> {
    let (height, width) = mask.shape();
    write!(out, "P4\n{width} {height}\n")?;
    let row_bytes = width.div_ceil(8);
    let mut buf = vec![0u8; row_bytes * height];
    for r in 0..height {
        for c in 0..width {
            if mask.is_sampled(r, c) {
                buf[r * row_bytes + c / 8] |= 0x80 >> (c % 8);
            }
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a `row,col` list; the mask dimensions must be supplied.
pub fn read_index_list<R: BufRead>(input: R, height: usize, width: usize) -> Result<Mask> {
    let mut positions = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        positions.push(crate::sampling::parse_position(line)?);
    }
    Mask::from_positions(height, width, &positions).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_index_list<W: Write>(mask: &Mask, mut out: W) -> Result<()> {
    for (r, c) in mask.positions() {
        writeln!(out, "{r},{c}")?;
    }
    Ok(())
}

/// Image file flavours recognised by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Raw,
}

impl ImageFormat {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "pgm" => Ok(ImageFormat::Pgm),
            Some(e) if e == "raw" || e == "csim" => Ok(ImageFormat::Raw),
            _ => Err(Error::Format(format!(
                "cannot infer image format of {} (use .pgm or .raw)",
                path.display()
            ))),
        }
    }
}

pub fn load_image(path: &std::path::Path) -> Result<Image> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    match ImageFormat::from_path(path)? {
        ImageFormat::Pgm => read_pgm(file),
        ImageFormat::Raw => read_raw(file),
    }
}

pub fn encode_image(image: &Image, format: ImageFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        ImageFormat::Pgm => write_pgm(image, if image.peak() > 255.0 { 65535 } else { 255 }, &mut buf)?,
        ImageFormat::Raw => write_raw(image, &mut buf)?,
    }
    Ok(buf)
}

/// Loads a mask from `.pbm`, a plan file (`.plan`) or an index list (any
/// other extension, with `shape` required).
pub fn load_mask(path: &std::path::Path, shape: Option<(usize, usize)>) -> Result<Mask> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("pbm") => read_pbm(file),
        Some("plan") => SamplingPlan::read_text(file)?.mask(),
        _ => {
            let (h, w) = shape.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "index-list mask {} needs the image shape",
                    path.display()
                ))
            })?;
            read_index_list(file, h, w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| ((r * w + c) % 256) as f64 / 255.0)
    }

    #[test]
    fn pgm_8bit_round_trip() {
        let img = gradient(5, 7);
        let mut buf = Vec::new();
        write_pgm(&img, 255, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n7 5\n255\n"));
        let back = read_pgm(buf.as_slice()).unwrap();
        assert_eq!(back.shape(), (5, 7));
        assert_eq!(back.peak(), 255.0);
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pgm_16bit_is_big_endian() {
        let img = Image::new(1, 2, vec![1.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&img, 65535, &mut buf).unwrap();
        let body = &buf[buf.len() - 4..];
        assert_eq!(body, &[0xFF, 0xFF, 0x80, 0x00]);
        let back = read_pgm(buf.as_slice()).unwrap();
        assert_eq!(back.peak(), 65535.0);
        assert!((back.get(0, 1) - 32768.0 / 65535.0).abs() < 1e-12);
    }

    #[test]
    fn pgm_header_comments() {
        let data = b"P5\n# made by hand\n2 1\n# depth\n255\n\x00\xff";
        let img = read_pgm(&data[..]).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn raw_layout() {
        let img = Image::new(2, 3, vec![0.0, 0.25, 0.5, 0.75, 1.0, -0.5]).unwrap();
        let mut buf = Vec::new();
        write_raw(&img, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CSIM");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[12..16], &[0, 0, 0, 0]);
        assert_eq!(&buf[16..20], &0.0f32.to_le_bytes());
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(read_raw(buf.as_slice()).unwrap(), img);
        assert!(read_raw(&b"XXXX\0\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
    }

    #[test]
    fn pbm_round_trip_with_padding() {
        let sampled: Vec<bool> = (0..30).map(|i| i % 3 == 0 || i == 29).collect();
        let mask = Mask::new(3, 10, sampled).unwrap();
        let mut buf = Vec::new();
        write_pbm(&mask, &mut buf).unwrap();
        assert!(buf.starts_with(b"P4\n10 3\n"));
        assert_eq!(buf.len(), 8 + 2 * 3);
        assert_eq!(read_pbm(buf.as_slice()).unwrap(), mask);
    }

    #[test]
    fn index_list_round_trip() {
        let mask = Mask::from_positions(4, 4, &[(0, 1), (3, 3), (2, 0)]).unwrap();
        let mut buf = Vec::new();
        write_index_list(&mask, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0,1\n2,0\n3,3\n");
        assert_eq!(read_index_list(buf.as_slice(), 4, 4).unwrap(), mask);
        assert!(read_index_list("9,9\n".as_bytes(), 4, 4).is_err());
    }
}
