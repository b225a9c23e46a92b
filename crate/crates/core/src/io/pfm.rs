//! Portable float map (PFM) reading and writing.
//!
//! Files are written little-endian (scale `-1.0`), rows bottom to top, as
//! the format requires. Masked pixels are stored as NaN and every non-finite
//! value read back is masked.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Raster;

pub fn encode_pfm(raster: &Raster) -> Result<Vec<u8>> {
    let tag = match raster.channels {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::Format(format!(
                "PFM stores 1 or 3 channels, not {c}"
            )))
        }
    };
    let header = format!("{tag}\n{} {}\n-1.0\n", raster.width, raster.height);
    let mut out = Vec::with_capacity(header.len() + raster.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    let ch = raster.channels;
    for row in (0..raster.height).rev() {
        for col in 0..raster.width {
            let i = raster.index(col, row);
            for c in 0..ch {
                let v = if raster.mask[i] {
                    raster.data[i * ch + c] as f32
                } else {
                    f32::NAN
                };
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Raster> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Format("truncated PFM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let channels = match token(&mut pos)?.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::Format(format!("not a PFM file (magic '{other}')"))),
    };
    let parse = |s: String, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Format(format!("bad PFM {what} '{s}'")))
    };
    let width = parse(token(&mut pos)?, "width")?;
    let height = parse(token(&mut pos)?, "height")?;
    let scale_token = token(&mut pos)?;
    let scale: f64 = scale_token
        .parse()
        .map_err(|_| Error::Format(format!("bad PFM scale '{scale_token}'")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format("PFM scale must be non-zero".into()));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let count = width * height * channels;
    let payload = bytes.get(pos..pos + count * 4).ok_or_else(|| {
        Error::Format(format!(
            "PFM payload shorter than {width}x{height}x{channels}"
        ))
    })?;
    let little = scale < 0.0;
    let mut raster = Raster::new(width, height, channels);
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        } as f64;
        let pixel = k / channels;
        let c = k % channels;
        let (col, file_row) = (pixel % width, pixel / width);
        let row = height - 1 - file_row;
        raster.data[(row * width + col) * channels + c] = v;
    }
    for i in 0..width * height {
        let px = &raster.data[i * channels..(i + 1) * channels];
        raster.mask[i] = px.iter().all(|v| v.is_finite());
        if !raster.mask[i] {
            raster.data[i * channels..(i + 1) * channels].fill(0.0);
        }
    }
    Ok(raster)
}

pub fn write_pfm(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    fs::write(path, encode_pfm(raster)?)?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Raster> {
    decode_pfm(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_little_endian_greyscale() {
        let r = Raster::filled(3, 2, 1, 1.5);
        let bytes = encode_pfm(&r).unwrap();
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        assert_eq!(bytes.len(), 12 + 6 * 4);
        assert_eq!(&bytes[12..16], &1.5f32.to_le_bytes());
    }

    #[test]
    fn rows_are_stored_bottom_up() {
        let r = Raster::from_scalar(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode_pfm(&r).unwrap();
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 3.0);
    }

    #[test]
    fn reads_big_endian_colour() {
        let mut bytes = b"PF\n1 1\n1.0\n".to_vec();
        for v in [0.25f32, 0.5, 0.75] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let r = decode_pfm(&bytes).unwrap();
        assert_eq!(r.channels, 3);
        assert_eq!(r.data, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_pfm(b"P6\n1 1\n255\n").is_err());
        assert!(decode_pfm(b"Pf\n4 4\n-1.0\n\0\0").is_err());
        assert!(decode_pfm(b"Pf\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_preserves_f32_values_and_mask(
            w in 1usize..8, h in 1usize..8,
            seed in proptest::collection::vec(-1e6f64..1e6, 64),
            holes in proptest::collection::vec(any::<bool>(), 64),
        ) {
            let data: Vec<f64> = (0..w * h)
                .map(|i| if holes[i] { f64::NAN } else { seed[i] as f32 as f64 })
                .collect();
            let r = Raster::from_scalar(w, h, data).unwrap();
            let back = decode_pfm(&encode_pfm(&r).unwrap()).unwrap();
            prop_assert_eq!(&back.mask, &r.mask);
            for i in 0..w * h {
                if r.mask[i] {
                    prop_assert_eq!(back.data[i], r.data[i]);
                }
            }
        }
    }
}
