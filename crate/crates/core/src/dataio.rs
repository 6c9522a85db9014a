//! File formats: MNIST-family IDX images, CIFAR-10 binary batches, binary
//! PGM/PPM, and the `MPMQ` checkpoint that stores a compressed image.
//!
//! Every parser works on an in-memory byte slice and reports failures as
//! [`Error::Parse`] with the byte offset where decoding stopped.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ansatz::{param_count, AnsatzKind, CircuitTemplate};
use crate::error::{Error, Result};
use crate::postproc::{quantize, rescale_probs, ChannelStats, Domain, ImageTensor};
use crate::statevec::{run_circuit, MAX_QUBITS};

// ---------------------------------------------------------------------------
// IDX

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_HEADER_LEN: usize = 16;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::parse(
                bytes.len(),
                format!("header truncated: need {} bytes, file has {}", offset + 4, bytes.len()),
            )
        })
}

/// Parses an IDX image file (`ubyte`, three dimensions).
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<ImageTensor>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::parse(
            0,
            format!("expected image magic 0x{IDX_IMAGE_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::parse(8, format!("image dimensions {rows}x{cols} must be positive")));
    }
    let per_image = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::parse(8, "image dimensions overflow"))?;
    let expected = count
        .checked_mul(per_image)
        .ok_or_else(|| Error::parse(4, "image count overflows"))?;
    let actual = bytes.len() - IDX_HEADER_LEN;
    if actual != expected {
        return Err(Error::parse(
            IDX_HEADER_LEN + expected.min(actual),
            format!("pixel section holds {actual} bytes, expected {expected} for {count} images of {rows}x{cols}"),
        ));
    }
    bytes[IDX_HEADER_LEN..]
        .chunks_exact(per_image)
        .map(|px| ImageTensor::from_bytes(cols, rows, 1, px))
        .collect()
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<ImageTensor>> {
    parse_idx_images(&fs::read(path)?)
}

/// Serializes single-channel byte images of equal size as an IDX file.
pub fn encode_idx_images(images: &[ImageTensor]) -> Result<Vec<u8>> {
    let first = images
        .first()
        .ok_or_else(|| Error::Contract("no images to encode".into()))?;
    let mut out = Vec::new();
    out.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(first.height() as u32).to_be_bytes());
    out.extend_from_slice(&(first.width() as u32).to_be_bytes());
    for img in images {
        if !img.same_shape(first) || img.channels() != 1 {
            return Err(Error::Contract("IDX images must share one single-channel shape".into()));
        }
        out.extend(img.to_bytes()?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CIFAR-10

pub const CIFAR_RECORD_LEN: usize = 3073;
const CIFAR_SIDE: usize = 32;

/// Number of records in a CIFAR-10 binary batch.
pub fn cifar10_len(bytes: &[u8]) -> Result<usize> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(Error::parse(
            bytes.len() - bytes.len() % CIFAR_RECORD_LEN,
            format!(
                "file length {} is not a positive multiple of the {CIFAR_RECORD_LEN}-byte record",
                bytes.len()
            ),
        ));
    }
    Ok(bytes.len() / CIFAR_RECORD_LEN)
}

/// Decodes record `index` (label byte, then R, G, B planes of 1024 bytes).
pub fn parse_cifar10(bytes: &[u8], index: usize) -> Result<(u8, ImageTensor)> {
    let records = cifar10_len(bytes)?;
    if index >= records {
        return Err(Error::Config(format!(
            "record index {index} out of range for {records} records"
        )));
    }
    let record = &bytes[index * CIFAR_RECORD_LEN..(index + 1) * CIFAR_RECORD_LEN];
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let planes: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            record[1 + c * plane..1 + (c + 1) * plane]
                .iter()
                .map(|&b| f64::from(b))
                .collect()
        })
        .collect();
    let image = ImageTensor::from_planes(CIFAR_SIDE, CIFAR_SIDE, Domain::Byte, &planes)?;
    Ok((record[0], image))
}

pub fn load_cifar10(path: impl AsRef<Path>, index: usize) -> Result<ImageTensor> {
    parse_cifar10(&fs::read(path)?, index).map(|(_, img)| img)
}

// ---------------------------------------------------------------------------
// PGM / PPM

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(usize::from(b - b'0')))
                .ok_or_else(|| Error::parse(start, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        Ok(value)
    }
}

/// Parses a binary PGM (`P5`) or PPM (`P6`) image with maxval 255.
pub fn parse_pnm(bytes: &[u8]) -> Result<ImageTensor> {
    let magic = bytes
        .get(..2)
        .ok_or_else(|| Error::parse(bytes.len(), "file too short for a PNM magic number"))?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        [b'P', d] if (b'1'..=b'7').contains(d) => {
            return Err(Error::parse(
                0,
                format!("unsupported PNM variant P{}: only binary P5/P6 are accepted", *d as char),
            ))
        }
        _ => return Err(Error::parse(0, "not a PNM file")),
    };
    let mut reader = HeaderReader { bytes, pos: 2 };
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    let maxval_at = reader.pos;
    let maxval = reader.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(2, format!("image dimensions {width}x{height} must be positive")));
    }
    if maxval != 255 {
        return Err(Error::parse(maxval_at, format!("maxval {maxval} unsupported, expected 255")));
    }
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        _ => return Err(Error::parse(reader.pos, "expected whitespace after maxval")),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::parse(2, "image dimensions overflow"))?;
    let data = &bytes[reader.pos..];
    if data.len() != expected {
        return Err(Error::parse(
            reader.pos + data.len().min(expected),
            format!("raster holds {} bytes, expected {expected}", data.len()),
        ));
    }
    ImageTensor::from_bytes(width, height, channels, data)
}

/// Encodes a byte image as `P5` (one channel) or `P6` (three channels).
pub fn encode_pnm(image: &ImageTensor) -> Result<Vec<u8>> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Contract(format!("cannot write {c}-channel PNM"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.to_bytes()?);
    Ok(out)
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<ImageTensor> {
    parse_pnm(&fs::read(path)?)
}

pub fn write_pnm(path: impl AsRef<Path>, image: &ImageTensor) -> Result<()> {
    fs::write(path, encode_pnm(image)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Resampling

/// Overlap weights of each output cell with each source cell along one axis.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|i| {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)) / scale;
                    (overlap > 0.0).then_some((i, overlap))
                })
                .collect()
        })
        .collect()
}

/// Box-filter resampling: every output pixel averages the source area it
/// covers. Byte images are re-quantized with round-half-up.
pub fn downsample_area(image: &ImageTensor, width: usize, height: usize) -> Result<ImageTensor> {
    if width == 0 || height == 0 || width > image.width() || height > image.height() {
        return Err(Error::Config(format!(
            "cannot downsample {}x{} to {width}x{height}",
            image.width(),
            image.height()
        )));
    }
    let wx = area_weights(image.width(), width);
    let wy = area_weights(image.height(), height);
    let planes: Vec<Vec<f64>> = (0..image.channels())
        .map(|c| {
            let mut out = Vec::with_capacity(width * height);
            for row in &wy {
                for col in &wx {
                    let mut acc = 0.0;
                    for &(r, a) in row {
                        for &(q, b) in col {
                            acc += a * b * image.get(r, q, c);
                        }
                    }
                    out.push(match image.domain() {
                        Domain::Byte => acc.round().clamp(0.0, 255.0),
                        Domain::Unit => acc.clamp(0.0, 1.0),
                    });
                }
            }
            out
        })
        .collect();
    ImageTensor::from_planes(width, height, image.domain(), &planes)
}

// ---------------------------------------------------------------------------
// Dataset references

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Mnist,
    #[serde(rename = "fashion-mnist")]
    FashionMnist,
    Cifar10,
    Raw,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "fashion-mnist" | "fashion_mnist" | "fashionmnist" => Ok(DatasetKind::FashionMnist),
            "cifar10" | "cifar-10" => Ok(DatasetKind::Cifar10),
            "raw" | "pnm" => Ok(DatasetKind::Raw),
            other => Err(Error::Config(format!(
                "unknown dataset kind '{other}' (expected mnist, fashion-mnist, cifar10 or raw)"
            ))),
        }
    }
}

/// One image inside a dataset file, or a standalone PGM/PPM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub kind: DatasetKind,
    pub path: PathBuf,
    pub index: usize,
}

impl DatasetRef {
    pub fn load(&self) -> Result<ImageTensor> {
        match self.kind {
            DatasetKind::Mnist | DatasetKind::FashionMnist => {
                let mut images = load_idx_images(&self.path)?;
                let count = images.len();
                if self.index >= count {
                    return Err(Error::Config(format!(
                        "record index {} out of range for {count} images",
                        self.index
                    )));
                }
                Ok(images.swap_remove(self.index))
            }
            DatasetKind::Cifar10 => load_cifar10(&self.path, self.index),
            DatasetKind::Raw => read_pnm(&self.path),
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MPMQ";
pub const CHECKPOINT_VERSION: u16 = 1;
/// Magic, version, ansatz, qubits, layers, width, height, channels.
pub const CHECKPOINT_HEADER_LEN: usize = 4 + 2 + 1 + 1 + 2 + 2 + 2 + 1;
const CRC_LEN: usize = 4;

/// The compressed representation of an image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub ansatz: AnsatzKind,
    pub num_qubits: usize,
    pub layers: usize,
    pub width: usize,
    pub height: usize,
    /// One entry per channel.
    pub stats: Vec<ChannelStats>,
    /// One parameter vector per channel.
    pub params: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn channels(&self) -> usize {
        self.stats.len()
    }

    pub fn param_count(&self) -> Result<usize> {
        param_count(self.ansatz, self.num_qubits, self.layers)
    }

    pub fn template(&self) -> Result<CircuitTemplate> {
        self.ansatz.build(self.num_qubits, self.layers)
    }

    pub fn pcr(&self) -> Result<f64> {
        Ok(crate::metrics::pcr(self.param_count()?, self.width, self.height))
    }

    /// Encoded size in bytes.
    pub fn byte_len(&self) -> Result<usize> {
        Ok(CHECKPOINT_HEADER_LEN + self.channels() * (16 + 8 * self.param_count()?) + CRC_LEN)
    }

    /// Checks the structural invariants shared by encoder and decoder.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::integrity(None, msg));
        if self.num_qubits < 2 || self.num_qubits > MAX_QUBITS {
            return bad(format!("qubit count {} out of range", self.num_qubits));
        }
        if self.layers == 0 || self.layers > usize::from(u16::MAX) {
            return bad(format!("layer count {} out of range", self.layers));
        }
        if self.width == 0
            || self.height == 0
            || self.width > usize::from(u16::MAX)
            || self.height > usize::from(u16::MAX)
        {
            return bad(format!("image size {}x{} out of range", self.width, self.height));
        }
        if self.width * self.height > 1usize << self.num_qubits {
            return bad(format!(
                "{}x{} pixels exceed the {}-qubit register",
                self.width, self.height, self.num_qubits
            ));
        }
        if !matches!(self.channels(), 1 | 3) || self.params.len() != self.channels() {
            return bad(format!(
                "{} stats entries and {} parameter vectors; expected 1 or 3 of each",
                self.stats.len(),
                self.params.len()
            ));
        }
        for (c, s) in self.stats.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.mu) || !(s.sigma >= 0.0 && s.sigma.is_finite()) {
                return bad(format!("channel {c} statistics ({}, {}) invalid", s.mu, s.sigma));
            }
        }
        let expected = self.param_count()?;
        for (c, p) in self.params.iter().enumerate() {
            if p.len() != expected {
                return bad(format!(
                    "channel {c} has {} parameters, {} m={} layers={} needs {expected}",
                    p.len(),
                    self.ansatz,
                    self.num_qubits,
                    self.layers
                ));
            }
        }
        Ok(())
    }
}

pub fn encode_checkpoint(checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    checkpoint.validate()?;
    let mut out = Vec::with_capacity(checkpoint.byte_len()?);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(checkpoint.ansatz.code());
    out.push(checkpoint.num_qubits as u8);
    out.extend_from_slice(&(checkpoint.layers as u16).to_le_bytes());
    out.extend_from_slice(&(checkpoint.width as u16).to_le_bytes());
    out.extend_from_slice(&(checkpoint.height as u16).to_le_bytes());
    out.push(checkpoint.channels() as u8);
    for s in &checkpoint.stats {
        out.extend_from_slice(&s.mu.to_le_bytes());
        out.extend_from_slice(&s.sigma.to_le_bytes());
    }
    for p in checkpoint.params.iter().flatten() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn u8(&mut self) -> u8 {
        self.take(1)[0]
    }

    fn u16(&mut self) -> u16 {
        let b = self.take(2);
        u16::from_le_bytes([b[0], b[1]])
    }

    fn f64(&mut self) -> f64 {
        let mut b = [0u8; 8];
        b.copy_from_slice(self.take(8));
        f64::from_le_bytes(b)
    }
}

/// Parses the fixed header without touching the payload or the CRC.
pub fn parse_checkpoint_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    if bytes.len() < CHECKPOINT_HEADER_LEN {
        return Err(Error::parse(
            bytes.len(),
            format!("checkpoint header needs {CHECKPOINT_HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::parse(0, "bad magic: not an MPMQ checkpoint"));
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let version = cur.u16();
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(4, format!("unsupported checkpoint version {version}")));
    }
    let code = cur.u8();
    let ansatz = AnsatzKind::from_code(code)
        .ok_or_else(|| Error::parse(6, format!("unknown ansatz code {code}")))?;
    Ok(CheckpointHeader {
        ansatz,
        num_qubits: usize::from(cur.u8()),
        layers: usize::from(cur.u16()),
        width: usize::from(cur.u16()),
        height: usize::from(cur.u16()),
        channels: usize::from(cur.u8()),
    })
}

/// Geometry fields of a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub ansatz: AnsatzKind,
    pub num_qubits: usize,
    pub layers: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let header = parse_checkpoint_header(bytes)?;
    if bytes.len() < CHECKPOINT_HEADER_LEN + CRC_LEN {
        return Err(Error::parse(bytes.len(), "checkpoint truncated before CRC"));
    }
    let body_len = bytes.len() - CRC_LEN;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().expect("4-byte slice"));
    let actual = crc32fast::hash(&bytes[..body_len]);
    if stored != actual {
        return Err(Error::integrity(Some(body_len), format!(
            "CRC mismatch: stored 0x{stored:08x}, computed 0x{actual:08x}"
        )));
    }
    if !matches!(header.channels, 1 | 3) {
        return Err(Error::parse(14, format!("channel count {} must be 1 or 3", header.channels)));
    }
    let n_theta = param_count(header.ansatz, header.num_qubits, header.layers)
        .map_err(|e| Error::integrity(Some(7), format!("invalid geometry: {e}")))?;
    let expected = n_theta
        .checked_mul(8)
        .and_then(|p| p.checked_add(16))
        .and_then(|per| per.checked_mul(header.channels))
        .and_then(|payload| payload.checked_add(CHECKPOINT_HEADER_LEN + CRC_LEN))
        .ok_or_else(|| Error::parse(7, "geometry overflows"))?;
    if bytes.len() != expected {
        return Err(Error::integrity(Some(bytes.len().min(expected)), format!(
            "file holds {} bytes, {} m={} layers={} with {} channel(s) needs {expected}",
            bytes.len(),
            header.ansatz,
            header.num_qubits,
            header.layers,
            header.channels
        )));
    }
    let mut cur = Cursor {
        bytes: &bytes[..body_len],
        pos: CHECKPOINT_HEADER_LEN,
    };
    let stats = (0..header.channels)
        .map(|_| ChannelStats {
            mu: cur.f64(),
            sigma: cur.f64(),
        })
        .collect();
    let params = (0..header.channels)
        .map(|_| (0..n_theta).map(|_| cur.f64()).collect())
        .collect();
    let checkpoint = Checkpoint {
        ansatz: header.ansatz,
        num_qubits: header.num_qubits,
        layers: header.layers,
        width: header.width,
        height: header.height,
        stats,
        params,
    };
    checkpoint.validate().map_err(|e| match e {
        Error::Integrity { message, .. } => Error::integrity(Some(7), message),
        other => other,
    })?;
    Ok(checkpoint)
}

pub fn write_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, encode_checkpoint(checkpoint)?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

/// Runs one channel's circuit and rescales its leading probabilities into
/// a row-major unit plane.
pub fn reconstruct_channel(
    template: &CircuitTemplate,
    params: &[f64],
    pixels: usize,
    stats: ChannelStats,
) -> Result<Vec<f64>> {
    let probs = run_circuit(template, params)?;
    rescale_probs(probs.as_slice(), pixels, stats)
}

/// Unit-domain reconstruction of every channel.
pub fn reconstruct_unit(checkpoint: &Checkpoint) -> Result<ImageTensor> {
    checkpoint.validate()?;
    let template = checkpoint.template()?;
    let pixels = checkpoint.width * checkpoint.height;
    let planes = checkpoint
        .params
        .iter()
        .zip(&checkpoint.stats)
        .map(|(p, s)| reconstruct_channel(&template, p, pixels, *s))
        .collect::<Result<Vec<_>>>()?;
    ImageTensor::from_planes(checkpoint.width, checkpoint.height, Domain::Unit, &planes)
}

/// Decompresses to a byte image (round-half-up quantization).
pub fn decode_checkpoint_to_image(checkpoint: &Checkpoint) -> Result<ImageTensor> {
    let unit = reconstruct_unit(checkpoint)?;
    let bytes: Vec<u8> = unit.values().iter().map(|&v| quantize(v)).collect();
    ImageTensor::from_bytes(unit.width(), unit.height(), unit.channels(), &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_bytes(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX_IMAGE_MAGIC, count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn idx_single_image() {
        let pixels: Vec<u8> = (0..784).map(|i| (i % 251) as u8).collect();
        let images = parse_idx_images(&idx_bytes(1, 28, 28, &pixels)).unwrap();
        assert_eq!(images.len(), 1);
        assert_eq!((images[0].width(), images[0].height()), (28, 28));
        assert_eq!(images[0].get(1, 2, 0), f64::from(pixels[30]));
        assert_eq!(encode_idx_images(&images).unwrap(), idx_bytes(1, 28, 28, &pixels));
    }

    #[test]
    fn idx_label_magic_rejected() {
        let mut b = idx_bytes(1, 28, 28, &[0; 784]);
        b[3] = 0x01;
        let err = parse_idx_images(&b).unwrap_err().to_string();
        assert!(err.contains("expected image magic"), "{err}");
    }

    #[test]
    fn idx_truncation_reports_lengths() {
        let b = idx_bytes(2, 28, 28, &[0; 784 + 100]);
        match parse_idx_images(&b) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("884") && message.contains("1568"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_idx_images(&b[..10]), Err(Error::Parse { .. })));
    }

    fn cifar_record(label: u8, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend((0..3072).map(fill));
        r
    }

    #[test]
    fn cifar_records() {
        let mut file = cifar_record(3, |_| 7);
        file.extend(cifar_record(9, |i| (i / 1024) as u8 * 100 + (i % 1024 % 7) as u8));
        let (label, first) = parse_cifar10(&file, 0).unwrap();
        assert_eq!(label, 3);
        assert!(first.values().iter().all(|&v| v == 7.0));
        let (label, second) = parse_cifar10(&file, 1).unwrap();
        assert_eq!(label, 9);
        assert_eq!(second.channels(), 3);
        // pixel (0, 5): plane offset 5 → value 5 % 7 = 5 in R, 105 in G, 205 in B
        assert_eq!(second.get(0, 5, 0), 5.0);
        assert_eq!(second.get(0, 5, 1), 105.0);
        assert_eq!(second.get(0, 5, 2), 205.0);
        assert!(matches!(parse_cifar10(&file, 2), Err(Error::Config(_))));
        assert!(matches!(parse_cifar10(&file[..3000], 0), Err(Error::Parse { .. })));
    }

    #[test]
    fn pnm_roundtrip_and_header() {
        let img = ImageTensor::from_bytes(2, 2, 1, &[0, 64, 128, 255]).unwrap();
        let enc = encode_pnm(&img).unwrap();
        assert_eq!(parse_pnm(&enc).unwrap(), img);
        let big = ImageTensor::from_bytes(28, 28, 1, &[9; 784]).unwrap();
        assert!(encode_pnm(&big).unwrap().starts_with(b"P5\n28 28\n255\n"));
        let rgb = ImageTensor::from_bytes(1, 2, 3, &[1, 2, 3, 4, 5, 6]).unwrap();
        let enc = encode_pnm(&rgb).unwrap();
        assert!(enc.starts_with(b"P6\n1 2\n255\n"));
        assert_eq!(parse_pnm(&enc).unwrap(), rgb);
    }

    #[test]
    fn pnm_rejections() {
        let err = parse_pnm(b"P2\n2 2\n255\n0 0 0 0").unwrap_err().to_string();
        assert!(err.contains("unsupported PNM variant P2"), "{err}");
        assert!(parse_pnm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(parse_pnm(b"P5\n2 2\n255\n\0").is_err());
        assert!(parse_pnm(b"GIF89a").is_err());
        let commented = b"P5\n# a comment\n1 1\n255\n\x2a";
        assert_eq!(parse_pnm(commented).unwrap().values(), &[42.0]);
    }

    #[test]
    fn area_downsample() {
        let img = ImageTensor::from_bytes(4, 2, 1, &[0, 100, 200, 100, 100, 100, 0, 0]).unwrap();
        let half = downsample_area(&img, 2, 1).unwrap();
        assert_eq!(half.values(), &[75.0, 75.0]);
        let same = downsample_area(&img, 4, 2).unwrap();
        assert_eq!(same, img);
        // 28 → 16 keeps a constant image constant
        let flat = ImageTensor::from_bytes(28, 28, 1, &[77; 784]).unwrap();
        let small = downsample_area(&flat, 16, 16).unwrap();
        assert!(small.values().iter().all(|&v| v == 77.0));
        assert!(downsample_area(&img, 5, 1).is_err());
    }

    fn sample_checkpoint(channels: usize) -> Checkpoint {
        let n = param_count(AnsatzKind::Mpm, 10, 15).unwrap();
        Checkpoint {
            ansatz: AnsatzKind::Mpm,
            num_qubits: 10,
            layers: 15,
            width: 28,
            height: 28,
            stats: vec![ChannelStats { mu: 0.13, sigma: 0.31 }; channels],
            params: (0..channels)
                .map(|c| (0..n).map(|i| (i * 7 + c) as f64 * 0.01).collect())
                .collect(),
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_size() {
        let ck = sample_checkpoint(1);
        let bytes = encode_checkpoint(&ck).unwrap();
        assert_eq!(bytes.len(), 15 + 16 + 540 * 8 + 4);
        assert_eq!(bytes.len(), ck.byte_len().unwrap());
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn checkpoint_corruption() {
        let bytes = encode_checkpoint(&sample_checkpoint(3)).unwrap();
        let mut flipped = bytes.clone();
        flipped[CHECKPOINT_HEADER_LEN + 48 + 100] ^= 0x10;
        assert!(matches!(decode_checkpoint(&flipped), Err(Error::Integrity { .. })));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_checkpoint(&magic), Err(Error::Parse { offset: 0, .. })));
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn checkpoint_rejects_count_mismatch() {
        let mut ck = sample_checkpoint(1);
        ck.params[0].pop();
        assert!(matches!(encode_checkpoint(&ck), Err(Error::Integrity { .. })));
        let mut ck = sample_checkpoint(1);
        ck.width = 64;
        assert!(matches!(encode_checkpoint(&ck), Err(Error::Integrity { .. })));
    }

    #[test]
    fn zero_angle_two_qubit_decode() {
        // All-zero MPM on two qubits leaves |00>: probabilities [1,0,0,0].
        // Standardized: z = [√3, -1/√3, -1/√3, -1/√3]; with μ=0.5, σ=0.2
        // outputs are 0.5 + 0.2·z.
        let ck = Checkpoint {
            ansatz: AnsatzKind::Mpm,
            num_qubits: 2,
            layers: 1,
            width: 2,
            height: 2,
            stats: vec![ChannelStats { mu: 0.5, sigma: 0.2 }],
            params: vec![vec![0.0; 4]],
        };
        let img = decode_checkpoint_to_image(&ck).unwrap();
        let hi = quantize(0.5 + 0.2 * 3f64.sqrt());
        let lo = quantize(0.5 - 0.2 / 3f64.sqrt());
        assert_eq!(img.to_bytes().unwrap(), vec![hi, lo, lo, lo]);
        assert_eq!(img.to_bytes().unwrap(), vec![216, 98, 98, 98]);
        assert_eq!(decode_checkpoint_to_image(&ck).unwrap(), img);
    }
}
