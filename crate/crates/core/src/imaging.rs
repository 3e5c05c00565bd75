//! Image decoding, PNG frame output and GIF assembly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::gif::{GifEncoder, Repeat};
use image::codecs::png::PngEncoder;
use image::{Delay, ExtendedColorType, Frame, ImageEncoder, ImageFormat, ImageReader, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::engine::{FrameEvent, FrameSink, FrameTag};
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub path: PathBuf,
    pub generation: u64,
    pub fraction: f64,
    pub tag: FrameTag,
}

/// Decodes a PNG, JPEG or BMP file into an RGB raster. Alpha is dropped and
/// grayscale is expanded.
pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let unreadable = |source| Error::UnreadableFile {
        path: path.to_path_buf(),
        source,
    };
    let reader = ImageReader::open(path).map_err(unreadable)?;
    let reader = reader.with_guessed_format().map_err(unreadable)?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Bmp) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    let decoded = reader.decode().map_err(|e| Error::DecodeError {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = decoded.into_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    Raster::new(w, h, pixels)
}

/// `frame_g{generation:09}_p{permille:04}.png`
pub fn frame_file_name(generation: u64, fraction: f64) -> String {
    let permille = (fraction * 1000.0).round() as u64;
    format!("frame_g{generation:09}_p{permille:04}.png")
}

pub fn encode_png(raster: &Raster) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf)
        .write_image(
            &raster.to_rgb_bytes(),
            raster.width() as u32,
            raster.height() as u32,
            ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::io("<png buffer>", e))?;
    Ok(buf)
}

/// Writes a lossless PNG frame into `out_dir` under the deterministic frame name.
pub fn write_frame(
    raster: &Raster,
    out_dir: impl AsRef<Path>,
    generation: u64,
    fraction: f64,
    tag: FrameTag,
) -> Result<FrameRecord> {
    let path = out_dir.as_ref().join(frame_file_name(generation, fraction));
    let bytes = encode_png(raster)?;
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(FrameRecord {
        path,
        generation,
        fraction,
        tag,
    })
}

/// Builds a looping GIF from the frames in order.
pub fn assemble_animation(frames: &[FrameRecord], out_path: impl AsRef<Path>, frame_delay_ms: u32) -> Result<()> {
    let out_path = out_path.as_ref();
    if frames.is_empty() {
        return Err(Error::EmptyFrameList);
    }
    let rasters = frames
        .iter()
        .map(|f| load_raster(&f.path))
        .collect::<Result<Vec<_>>>()?;
    let reference = &rasters[0];
    if let Some(bad) = rasters.iter().find(|r| !r.same_dims(reference)) {
        return Err(Error::DimensionMismatch {
            left_width: reference.width(),
            left_height: reference.height(),
            right_width: bad.width(),
            right_height: bad.height(),
        });
    }

    let file = File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut writer = BufWriter::new(file);
    {
        let mut encoder = GifEncoder::new_with_speed(&mut writer, 10);
        encoder.set_repeat(Repeat::Infinite).map_err(|e| Error::io(out_path, e))?;
        for raster in &rasters {
            let rgba: Vec<u8> = raster.pixels().iter().flat_map(|p| [p[0], p[1], p[2], 255]).collect();
            let image = RgbaImage::from_raw(raster.width() as u32, raster.height() as u32, rgba)
                .expect("buffer sized from raster dims");
            let frame = Frame::from_parts(image, 0, 0, Delay::from_numer_denom_ms(frame_delay_ms, 1));
            encoder.encode_frame(frame).map_err(|e| Error::io(out_path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(out_path, e))
}

/// Frame sink that writes every frame as a PNG into one directory.
#[derive(Debug)]
pub struct PngDirSink {
    dir: PathBuf,
    records: Vec<FrameRecord>,
}

impl PngDirSink {
    /// Creates `dir` if needed.
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<FrameRecord> {
        self.records
    }
}

impl FrameSink for PngDirSink {
    fn emit(&mut self, frame: FrameEvent<'_>) -> Result<Option<String>> {
        let record = write_frame(frame.raster, &self.dir, frame.generation, frame.fraction, frame.tag)?;
        let name = record
            .path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.records.push(record);
        Ok(Some(name))
    }
}
