//! Gramian Angular Field imaging of 1-D series.
//!
//! A series is min-max rescaled into [-1, 1], each value becomes an angle
//! `φ = arccos(x̃)`, and the image holds pairwise trigonometric functions of
//! those angles: `cos(φi + φj)` for the summation field (GASF) or
//! `sin(φi − φj)` for the difference field (GADF). Long series are reduced to
//! a small square image either by bilinear resizing of the full field or by
//! piecewise aggregate approximation of the series before the field is built.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::signal_io::HeartbeatRecord;

mod resize;

pub use resize::{paa, resize_bilinear};

/// Series rescaled to [-1, 1] with its polar encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    values: Vec<f64>,
    angles: Vec<f64>,
    radii: Vec<f64>,
}

impl NormalizedSeries {
    /// Wraps values that are already in [-1, 1] (e.g. a PAA of a rescaled
    /// series). Values are clamped before taking the arccosine.
    pub fn from_normalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("empty series".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("series contains non-finite values".into()));
        }
        let n = values.len();
        let values: Vec<f64> = values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let angles = values.iter().map(|v| v.acos()).collect();
        let radii = (1..=n).map(|t| t as f64 / n as f64).collect();
        Ok(Self {
            values,
            angles,
            radii,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Min-max rescaling into [-1, 1]. A constant series maps to all zeros.
pub fn rescale(series: &[f64]) -> Result<NormalizedSeries> {
    if series.is_empty() {
        return Err(Error::Argument("empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("series contains non-finite values".into()));
    }
    let (min, max) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    let values = if range == 0.0 {
        vec![0.0; series.len()]
    } else {
        series
            .iter()
            .map(|&x| ((x - max) + (x - min)) / range)
            .collect()
    };
    NormalizedSeries::from_normalized(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GafKind {
    #[default]
    Gasf,
    Gadf,
}

impl FromStr for GafKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gasf" => Ok(Self::Gasf),
            "gadf" => Ok(Self::Gadf),
            other => Err(Error::Argument(format!("unknown field kind {other:?}"))),
        }
    }
}

impl fmt::Display for GafKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GafKind::Gasf => "gasf",
            GafKind::Gadf => "gadf",
        })
    }
}

/// Square row-major field matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GafMatrix {
    size: usize,
    kind: GafKind,
    entries: Vec<f64>,
}

impl GafMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> GafKind {
        self.kind
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }
}

/// Summation field `cos(φi + φj)`. Only the upper triangle is evaluated; the
/// lower triangle is a copy, so the result is exactly symmetric.
pub fn gasf(ns: &NormalizedSeries) -> GafMatrix {
    let n = ns.len();
    let phi = ns.angles();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = (phi[i] + phi[j]).cos();
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    GafMatrix {
        size: n,
        kind: GafKind::Gasf,
        entries,
    }
}

/// Difference field `sin(φi − φj)`, exactly antisymmetric with a zero diagonal.
pub fn gadf(ns: &NormalizedSeries) -> GafMatrix {
    let n = ns.len();
    let phi = ns.angles();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (phi[i] - phi[j]).sin();
            entries[i * n + j] = v;
            entries[j * n + i] = -v;
        }
    }
    GafMatrix {
        size: n,
        kind: GafKind::Gadf,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Build the full field, then resize it bilinearly.
    #[default]
    Bilinear,
    /// Shrink the rescaled series with PAA, then build the field.
    Paa,
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bilinear" | "image-bilinear" => Ok(Self::Bilinear),
            "paa" | "series-paa" => Ok(Self::Paa),
            other => Err(Error::Argument(format!("unknown reduction {other:?}"))),
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reduction::Bilinear => "bilinear",
            Reduction::Paa => "paa",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: GafKind,
    pub reduction: Reduction,
    pub target_size: usize,
    pub channels: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: GafKind::Gasf,
            reduction: Reduction::Bilinear,
            target_size: 32,
            channels: 3,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_size < 2 {
            return Err(Error::Config(format!(
                "target size must be at least 2, got {}",
                self.target_size
            )));
        }
        if self.channels < 1 {
            return Err(Error::Config("at least one channel is required".into()));
        }
        Ok(())
    }
}

/// `height × width × channels` image, channels-last, values in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GafImage {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl GafImage {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 || pixels.len() != height * width * channels {
            return Err(Error::Argument(format!(
                "{} pixels do not fill a {height}x{width}x{channels} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Argument("image pixels must lie in [-1, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a row-major plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.pixels
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// `[h, w, c]` `f32` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(
            &[self.height, self.width, self.channels],
            self.pixels.iter().map(|&v| v as f32).collect(),
        )
        .expect("image dims are consistent")
    }
}

/// Full pipeline for one heartbeat: rescale, optional PAA, field, optional
/// bilinear resize, channel replication.
pub fn encode(record: &HeartbeatRecord, cfg: &EncoderConfig) -> Result<GafImage> {
    encode_series(record.samples(), cfg)
}

pub fn encode_series(series: &[f64], cfg: &EncoderConfig) -> Result<GafImage> {
    cfg.validate()?;
    let mut ns = rescale(series)?;
    if cfg.reduction == Reduction::Paa {
        if cfg.target_size > ns.len() {
            return Err(Error::Config(format!(
                "PAA cannot grow a series of {} samples to {}",
                ns.len(),
                cfg.target_size
            )));
        }
        ns = NormalizedSeries::from_normalized(paa(ns.values(), cfg.target_size)?)?;
    }
    let field = match cfg.kind {
        GafKind::Gasf => gasf(&ns),
        GafKind::Gadf => gadf(&ns),
    };
    let size = cfg.target_size;
    let plane = match cfg.reduction {
        Reduction::Bilinear => {
            resize_bilinear(field.entries(), field.size(), field.size(), size, size)?
        }
        Reduction::Paa => field.entries,
    };
    let channels = cfg.channels;
    let mut pixels = Vec::with_capacity(plane.len() * channels);
    for v in plane {
        let v = v.clamp(-1.0, 1.0);
        pixels.extend(std::iter::repeat_n(v, channels));
    }
    Ok(GafImage {
        height: size,
        width: size,
        channels,
        pixels,
    })
}

/// Encodes every record into one `[n, size, size, channels]` tensor. Runs on
/// the current rayon pool; the result does not depend on the pool size.
pub fn encode_batch(records: &[HeartbeatRecord], cfg: &EncoderConfig) -> Result<Tensor> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::Argument("no records to encode".into()));
    }
    let images: Vec<Tensor> = records
        .par_iter()
        .map(|r| encode(r, cfg).map(|img| img.to_tensor()))
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(images.len() * images[0].len());
    for img in images {
        data.extend_from_slice(img.data());
    }
    Tensor::from_vec(
        &[
            records.len(),
            cfg.target_size,
            cfg.target_size,
            cfg.channels,
        ],
        data,
    )
}

/// Maps a pixel value in [-1, 1] to a grey level.
pub fn to_gray_level(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0).round() as u8
}

/// Writes channel 0 as an 8-bit grayscale PNG.
pub fn export_image(img: &GafImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.plane(0).into_iter().map(to_gray_level).collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        img.width as u32,
        img.height as u32,
        image::ExtendedColorType::L8,
        image::ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image(other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn rescale_endpoints() {
        let ns = rescale(&[0.0, 1.0]).unwrap();
        assert_eq!(ns.values(), &[-1.0, 1.0]);
        assert!(close(ns.angles(), &[PI, 0.0], 1e-15));
        assert_eq!(ns.radii(), &[0.5, 1.0]);
    }

    #[test]
    fn rescale_spanning_range() {
        let ns = rescale(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(ns.values(), &[-1.0, 0.0, 1.0]);
        assert!(close(ns.angles(), &[PI, FRAC_PI_2, 0.0], 1e-15));
    }

    #[test]
    fn constant_series_is_centred() {
        let ns = rescale(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(ns.values(), &[0.0; 3]);
        assert!(close(ns.angles(), &[FRAC_PI_2; 3], 1e-15));
        assert!(gasf(&ns).entries().iter().all(|&v| (v + 1.0).abs() < 1e-15));
        assert!(gadf(&ns).entries().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rescale_rejects_bad_input() {
        assert!(rescale(&[]).is_err());
        assert!(rescale(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn gasf_two_point() {
        let g = gasf(&rescale(&[0.0, 1.0]).unwrap());
        assert!(close(g.entries(), &[1.0, -1.0, -1.0, 1.0], 1e-12));
    }

    #[test]
    fn gasf_quarter_turns() {
        let g = gasf(&rescale(&[-1.0, 0.0, 1.0]).unwrap());
        let expected = [1.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0];
        assert!(close(g.entries(), &expected, 1e-12));
    }

    #[test]
    fn gadf_examples() {
        let g = gadf(&rescale(&[0.0, 1.0]).unwrap());
        assert!(close(g.entries(), &[0.0; 4], 1e-12));
        let g = gadf(&rescale(&[-1.0, 0.0, 1.0]).unwrap());
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        assert!(close(g.entries(), &expected, 1e-12));
    }

    #[test]
    fn default_encoding_shape() {
        let samples: Vec<f64> = (0..187).map(|i| ((i as f64) / 9.0).sin()).collect();
        let rec = HeartbeatRecord::new(samples, 0).unwrap();
        let img = encode(&rec, &EncoderConfig::default()).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (32, 32, 3));
        for px in img.pixels().chunks(3) {
            assert!(px[0] == px[1] && px[1] == px[2]);
            assert!((-1.0..=1.0).contains(&px[0]));
        }
    }

    #[test]
    fn full_size_bilinear_is_raw_gasf() {
        let samples: Vec<f64> = (0..187)
            .map(|i| ((i * 7919) % 101) as f64 / 100.0)
            .collect();
        let rec = HeartbeatRecord::new(samples.clone(), 0).unwrap();
        let cfg = EncoderConfig {
            target_size: 187,
            channels: 1,
            ..Default::default()
        };
        let img = encode(&rec, &cfg).unwrap();
        let raw = gasf(&rescale(&samples).unwrap());
        assert!(close(img.pixels(), raw.entries(), 1e-9));
    }

    #[test]
    fn paa_and_bilinear_paths_differ() {
        let samples: Vec<f64> = (0..187).map(|i| ((i as f64) / 5.0).sin().abs()).collect();
        let rec = HeartbeatRecord::new(samples, 0).unwrap();
        let a = encode(&rec, &EncoderConfig::default()).unwrap();
        let b = encode(
            &rec,
            &EncoderConfig {
                reduction: Reduction::Paa,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((b.height(), b.width(), b.channels()), (32, 32, 3));
        assert_ne!(a.pixels(), b.pixels());
    }

    #[test]
    fn config_validation() {
        let bad = EncoderConfig {
            target_size: 1,
            ..Default::default()
        };
        assert!(encode_series(&[0.0, 1.0, 2.0], &bad).is_err());
        let bad = EncoderConfig {
            channels: 0,
            ..Default::default()
        };
        assert!(encode_series(&[0.0, 1.0, 2.0], &bad).is_err());
    }

    #[test]
    fn gray_levels() {
        assert_eq!(to_gray_level(-1.0), 0);
        assert_eq!(to_gray_level(1.0), 255);
        assert_eq!(to_gray_level(0.0), 128);
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("GADF".parse::<GafKind>().unwrap(), GafKind::Gadf);
        assert_eq!("paa".parse::<Reduction>().unwrap(), Reduction::Paa);
        assert!("mtf".parse::<GafKind>().is_err());
    }
}
