//! Frame images on disk and the frame manifest.
//!
//! A manifest lists one frame per line as `path reference_time exposure`,
//! with paths relative to the manifest's directory. Blank lines and lines
//! starting with `#` are ignored.

use crate::error::{io_err, Error, Result};
use crate::events::{Frame, FrameSequence};
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Reads a grayscale PGM or PNG. Values keep their stored scale (0..255 or
/// 0..65535); standardisation removes it later.
pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame> {
    Ok(read_with_peak(path.as_ref())?.0)
}

/// Reads a grayscale image scaled to [0, 1] by its bit depth.
pub fn read_frame_unit(path: impl AsRef<Path>) -> Result<Frame> {
    let (frame, peak) = read_with_peak(path.as_ref())?;
    Ok(frame.map(|v| v / peak))
}

fn read_with_peak(path: &Path) -> Result<(Frame, f64)> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (data, peak): (Vec<f64>, f64) = match img {
        DynamicImage::ImageLuma8(b) => (b.into_raw().into_iter().map(f64::from).collect(), 255.0),
        DynamicImage::ImageLuma16(b) => (b.into_raw().into_iter().map(f64::from).collect(), 65535.0),
        DynamicImage::ImageLumaA8(b) => (b.pixels().map(|p| f64::from(p.0[0])).collect(), 255.0),
        DynamicImage::ImageLumaA16(b) => (b.pixels().map(|p| f64::from(p.0[0])).collect(), 65535.0),
        other => {
            return Err(Error::Validation(format!(
                "{}: colour images are not supported ({:?})",
                path.display(),
                other.color()
            )))
        }
    };
    Ok((Frame::new(w, h, data)?, peak))
}

fn quantize(frame: &Frame, max: f64) -> impl Iterator<Item = f64> + '_ {
    frame.data().iter().map(move |v| (v.clamp(0.0, 1.0) * max).round())
}

fn save(path: &Path, result: image::ImageResult<()>) -> Result<()> {
    result.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a [0, 1] frame as a binary 16-bit PGM.
pub fn write_pgm16(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    // The image crate's PGM encoder only emits 8-bit graymaps.
    let mut bytes = format!("P5\n{} {}\n65535\n", frame.width(), frame.height()).into_bytes();
    bytes.extend(quantize(frame, 65535.0).flat_map(|v| (v as u16).to_be_bytes()));
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Writes a [0, 1] frame as an 8-bit grayscale PNG.
pub fn write_png8(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    let data: Vec<u8> = quantize(frame, 255.0).map(|v| v as u8).collect();
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, data).expect("buffer size");
    save(path, buf.save_with_format(path, ImageFormat::Png))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub reference_time: f64,
    pub exposure: f64,
}

pub fn parse_manifest(text: &str, source: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_error = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_error(format!("expected `path time exposure`, got {} fields", fields.len())));
        }
        let number = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|e| parse_error(format!("bad {what} `{s}`: {e}")))
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(fields[0]),
            reference_time: number(fields[1], "time")?,
            exposure: number(fields[2], "exposure")?,
        });
    }
    Ok(entries)
}

/// Loads all frames listed in a manifest, scaled to [0, 1] by bit depth.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<FrameSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let entries = parse_manifest(&text, path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut frames = Vec::with_capacity(entries.len());
    for e in &entries {
        frames.push(read_frame_unit(dir.join(&e.path))?);
    }
    FrameSequence::new(
        frames,
        entries.iter().map(|e| e.reference_time).collect(),
        entries.iter().map(|e| e.exposure).collect(),
    )
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("# path reference_time exposure\n");
    for e in entries {
        writeln!(text, "{} {} {}", e.path.display(), e.reference_time, e.exposure).unwrap();
    }
    std::fs::write(path, text).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.pgm");
        let f = Frame::from_fn(5, 3, |x, y| (x + 5 * y) as f64 / 14.0);
        write_pgm16(&p, &f).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5"));
        let back = read_frame(&p).unwrap();
        assert_eq!((back.width(), back.height()), (5, 3));
        for (a, b) in back.data().iter().zip(f.data()) {
            assert!((a / 65535.0 - b).abs() <= 0.5 / 65535.0);
        }
    }

    #[test]
    fn png8_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.png");
        let f = Frame::from_fn(4, 4, |x, _| x as f64 / 3.0);
        write_png8(&p, &f).unwrap();
        let back = read_frame(&p).unwrap();
        assert_eq!(back.get(3, 0), 255.0);
        assert_eq!(back.get(0, 2), 0.0);
        let unit = read_frame_unit(&p).unwrap();
        assert_eq!(unit.get(3, 0), 1.0);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let entries: Vec<ManifestEntry> = (0..3)
            .map(|i| {
                let name = format!("f{i}.png");
                write_png8(dir.path().join(&name), &Frame::filled(2, 2, i as f64 / 2.0)).unwrap();
                ManifestEntry {
                    path: name.into(),
                    reference_time: 0.01 * i as f64,
                    exposure: 0.005,
                }
            })
            .collect();
        let m = dir.path().join("frames.txt");
        write_manifest(&m, &entries).unwrap();
        let seq = read_manifest(&m).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.reference_times(), &[0.0, 0.01, 0.02]);
        assert_eq!(seq.frames()[2].get(1, 1), 1.0);
    }

    #[test]
    fn manifest_errors_have_line_numbers() {
        let err = parse_manifest("# c\n\na.png 0.1\n", Path::new("m")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_manifest("a.png x 0.1\n", Path::new("m")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
