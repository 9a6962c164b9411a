//! Binary netpbm codecs for the on-disk frame formats.
//!
//! Thermal frames are 16-bit big-endian PGM ("P5", maxval 65535) with the
//! linear map `temp = sample / 100 - 40`, giving 0.01 degC quantization over
//! [-40, 615.35]. RGB frames are plain 8-bit PPM ("P6", maxval 255).

use super::{FrameError, RgbFrame, ThermalFrame, THERMAL_MAX_C, THERMAL_MIN_C};

const THERMAL_MAXVAL: u32 = 65535;

fn format_err(msg: impl Into<String>) -> FrameError {
    FrameError::Format(msg.into())
}

/// Pull the next whitespace-delimited ASCII integer, skipping `#` comments.
fn next_int(bytes: &[u8], pos: &mut usize) -> Result<u32, FrameError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(format_err("expected integer in header"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err("bad integer in header"))
}

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header, FrameError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(format_err(format!(
            "wrong magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let width = next_int(bytes, &mut pos)? as usize;
    let height = next_int(bytes, &mut pos)? as usize;
    let maxval = next_int(bytes, &mut pos)?;
    // Exactly one whitespace byte separates maxval from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(format_err("missing whitespace before raster"));
    }
    pos += 1;
    Ok(Header {
        width,
        height,
        maxval,
        data_start: pos,
    })
}

/// Decode a 16-bit thermal PGM. `timestamp_ms` is carried alongside because
/// the format itself stores no timing.
pub fn decode_thermal(bytes: &[u8], timestamp_ms: u64) -> Result<ThermalFrame, FrameError> {
    let h = parse_header(bytes, b"P5")?;
    if h.maxval != THERMAL_MAXVAL {
        return Err(format_err(format!(
            "thermal PGM maxval must be {THERMAL_MAXVAL}, got {}",
            h.maxval
        )));
    }
    let n = h.width * h.height;
    let data = &bytes[h.data_start..];
    if data.len() != 2 * n {
        return Err(format_err(format!(
            "truncated thermal payload: expected {} bytes, got {}",
            2 * n,
            data.len()
        )));
    }
    let temps = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 100.0 - 40.0)
        .collect();
    ThermalFrame::new(timestamp_ms, h.width, h.height, temps)
}

pub fn encode_thermal(frame: &ThermalFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", frame.width, frame.height, THERMAL_MAXVAL).into_bytes();
    out.reserve(frame.temps.len() * 2);
    for &t in &frame.temps {
        let clamped = t.clamp(THERMAL_MIN_C, THERMAL_MAX_C);
        let sample = ((clamped + 40.0) * 100.0).round() as u16;
        out.extend_from_slice(&sample.to_be_bytes());
    }
    out
}

pub fn decode_rgb(bytes: &[u8], timestamp_ms: u64) -> Result<RgbFrame, FrameError> {
    let h = parse_header(bytes, b"P6")?;
    if h.maxval != 255 {
        return Err(format_err(format!(
            "rgb PPM maxval must be 255, got {}",
            h.maxval
        )));
    }
    let n = 3 * h.width * h.height;
    let data = &bytes[h.data_start..];
    if data.len() != n {
        return Err(format_err(format!(
            "truncated rgb payload: expected {n} bytes, got {}",
            data.len()
        )));
    }
    RgbFrame::new(timestamp_ms, h.width, h.height, data.to_vec())
}

pub fn encode_rgb(frame: &RgbFrame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    out
}

/// Read only the dimensions of a PPM, for pixel accounting without decoding
/// the raster.
pub fn ppm_dims(bytes: &[u8]) -> Result<(usize, usize), FrameError> {
    let h = parse_header(bytes, b"P6")?;
    Ok((h.width, h.height))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_sample_mapping() {
        // sample 4000 -> 0.00 degC, 65535 -> 615.35 degC.
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&4000u16.to_be_bytes());
        bytes.extend_from_slice(&65535u16.to_be_bytes());
        let frame = decode_thermal(&bytes, 0).unwrap();
        assert_eq!(frame.temps[0], 0.0);
        assert_eq!(frame.temps[1], 615.35);
    }

    #[test]
    fn thermal_exact_value_round_trip() {
        let frame = ThermalFrame::new(0, 1, 1, vec![37.0]).unwrap();
        let bytes = encode_thermal(&frame);
        // 37.00 degC -> sample 7700.
        assert_eq!(&bytes[bytes.len() - 2..], &7700u16.to_be_bytes());
        let back = decode_thermal(&bytes, 0).unwrap();
        assert_eq!(back.temps[0], 37.0);
    }

    #[test]
    fn thermal_byte_identity_and_quantization() {
        let temps: Vec<f64> = (0..32 * 24).map(|i| 15.0 + (i as f64) * 0.013).collect();
        let frame = ThermalFrame::new(0, 32, 24, temps.clone()).unwrap();
        let bytes = encode_thermal(&frame);
        let decoded = decode_thermal(&bytes, 0).unwrap();
        for (a, b) in temps.iter().zip(&decoded.temps) {
            assert!((a - b).abs() <= 0.005 + 1e-12, "{a} vs {b}");
        }
        // encode(decode(bytes)) reproduces canonical bytes exactly.
        assert_eq!(encode_thermal(&decoded), bytes);
    }

    #[test]
    fn thermal_format_errors() {
        assert!(decode_thermal(b"P6\n1 1\n65535\n\0\0", 0).is_err());
        assert!(decode_thermal(b"P5\n1 1\n255\n\0\0", 0).is_err());
        assert!(decode_thermal(b"P5\n2 1\n65535\n\0\0", 0).is_err()); // truncated
    }

    #[test]
    fn minimal_white_ppm() {
        let frame = RgbFrame::new(0, 1, 1, vec![0xFF, 0xFF, 0xFF]).unwrap();
        let bytes = encode_rgb(&frame);
        assert_eq!(bytes, b"P6\n1 1\n255\n\xFF\xFF\xFF");
        assert_eq!(decode_rgb(&bytes, 0).unwrap(), frame);
    }

    #[test]
    fn full_size_rgb_round_trip() {
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut pixels = Vec::with_capacity(3 * 956 * 720);
        for _ in 0..3 * 956 * 720 {
            // xorshift keeps the test dependency-free.
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            pixels.push((state >> 32) as u8);
        }
        let frame = RgbFrame::new(0, 956, 720, pixels).unwrap();
        let bytes = encode_rgb(&frame);
        assert_eq!(encode_rgb(&decode_rgb(&bytes, 0).unwrap()), bytes);
    }

    #[test]
    fn rgb_rejects_deep_maxval() {
        assert!(decode_rgb(b"P6\n1 1\n1023\n\0\0\0\0\0\0", 0).is_err());
    }

    #[test]
    fn ppm_dims_reads_header_only() {
        assert_eq!(ppm_dims(b"P6\n956 720\n255\n").unwrap(), (956, 720));
    }
}
