use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageReader};

use crate::error::{Error, Location, ParseError, ParseErrorKind, Result};
use crate::model::FrameSource;

/// A decoded frame directory plus non-fatal observations about it.
#[derive(Debug, Clone)]
pub struct FrameDirectory {
    pub source: FrameSource,
    pub warnings: Vec<String>,
}

/// PNG files in `dir`, sorted by file name. Also warns when numeric parts of
/// the names differ in width, since lexicographic order then disagrees with
/// numeric order.
pub fn scan_frames(dir: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let mut warnings = Vec::new();
    let widths: Vec<usize> = files
        .iter()
        .filter_map(|p| p.file_stem()?.to_str())
        .filter_map(last_digit_run)
        .collect();
    if widths.iter().any(|&w| w != widths[0]) {
        warnings.push(format!(
            "{}: frame file names are not zero-padded to a common width; \
             frames are ordered lexicographically",
            dir.display()
        ));
    }
    Ok((files, warnings))
}

fn last_digit_run(stem: &str) -> Option<usize> {
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    Some(end - start)
}

fn decode(path: &Path) -> Result<(u32, u32, u8, Vec<u8>)> {
    let image_err = |msg: String| Error::from(ParseError::new(path, Location::File, ParseErrorKind::Image(msg)));
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| image_err(e.to_string()))?;
    let (w, h) = (img.width(), img.height());
    match img.color() {
        ColorType::L8 | ColorType::La8 => Ok((w, h, 1, img.into_luma8().into_raw())),
        ColorType::Rgb8 | ColorType::Rgba8 => Ok((w, h, 3, img.into_rgb8().into_raw())),
        other => Err(image_err(format!("unsupported pixel format {other:?}; only 8-bit PNGs are accepted"))),
    }
}

pub fn read_frames(dir: &Path) -> Result<FrameDirectory> {
    let (files, warnings) = scan_frames(dir)?;
    if files.is_empty() {
        return Err(ParseError::new(dir, Location::File, ParseErrorKind::Empty).into());
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut shape = None;
    for path in &files {
        let (w, h, c, data) = decode(path)?;
        let (ew, eh, ec) = *shape.get_or_insert((w, h, c));
        if (w, h, c) != (ew, eh, ec) {
            return Err(ParseError::new(
                path,
                Location::File,
                ParseErrorKind::FrameShape {
                    expected_w: ew,
                    expected_h: eh,
                    expected_c: ec,
                    found_w: w,
                    found_h: h,
                    found_c: c,
                },
            )
            .into());
        }
        frames.push(data);
    }
    let (w, h, c) = shape.expect("at least one frame");
    Ok(FrameDirectory {
        source: FrameSource::new(frames, w, h, c)?,
        warnings,
    })
}

/// Writes `frame_000000.png`, `frame_000001.png`, ... into `dir`, creating it.
pub fn write_frames(dir: &Path, source: &FrameSource) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (w, h) = (source.width(), source.height());
    for (i, frame) in source.frames().iter().enumerate() {
        let path = dir.join(format!("frame_{i:06}.png"));
        let img = match source.channels() {
            1 => image::GrayImage::from_raw(w, h, frame.clone()).map(DynamicImage::ImageLuma8),
            _ => image::RgbImage::from_raw(w, h, frame.clone()).map(DynamicImage::ImageRgb8),
        }
        .expect("frame buffer matches its declared shape");
        img.save(&path)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
