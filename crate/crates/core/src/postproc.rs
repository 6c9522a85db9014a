//! Classical side of the pipeline: normalization, probability-to-image
//! rescaling, the MSE loss and the vector-Jacobian product of the rescale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spread guard for the standard deviation of the probability sub-vector.
pub const SPREAD_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Integer intensities in `[0, 255]`.
    Byte,
    /// Real intensities in `[0, 1]`.
    Unit,
}

/// `W×H×C` pixel array, row-major with interleaved channels:
/// value `(row, col, ch)` lives at `(row·W + col)·C + ch`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    width: usize,
    height: usize,
    channels: usize,
    domain: Domain,
    values: Vec<f64>,
}

impl ImageTensor {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        domain: Domain,
        values: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Contract(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if values.len() != expected {
            return Err(Error::Contract(format!(
                "expected {expected} values for {width}x{height}x{channels}, got {}",
                values.len()
            )));
        }
        let upper = match domain {
            Domain::Byte => 255.0,
            Domain::Unit => 1.0,
        };
        if let Some(bad) = values.iter().position(|v| !(0.0..=upper).contains(v)) {
            return Err(Error::Contract(format!(
                "value {} at index {bad} outside {domain:?} domain",
                values[bad]
            )));
        }
        Ok(ImageTensor {
            width,
            height,
            channels,
            domain,
            values,
        })
    }

    pub fn from_bytes(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            Domain::Byte,
            bytes.iter().map(|&b| f64::from(b)).collect(),
        )
    }

    /// Builds a single-channel unit image from a row-major plane.
    pub fn from_unit_plane(width: usize, height: usize, plane: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, Domain::Unit, plane)
    }

    /// Interleaves per-channel row-major planes into one image.
    pub fn from_planes(width: usize, height: usize, domain: Domain, planes: &[Vec<f64>]) -> Result<Self> {
        let channels = planes.len();
        let n = width * height;
        if let Some(p) = planes.iter().find(|p| p.len() != n) {
            return Err(Error::Contract(format!(
                "plane has {} values, expected {n}",
                p.len()
            )));
        }
        let mut values = Vec::with_capacity(n * channels);
        for i in 0..n {
            values.extend(planes.iter().map(|p| p[i]));
        }
        Self::new(width, height, channels, domain, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[(row * self.width + col) * self.channels + channel]
    }

    /// Row-major plane of one channel.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        assert!(channel < self.channels, "channel {channel} out of range");
        self.values
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    fn with_values(&self, domain: Domain, values: Vec<f64>) -> ImageTensor {
        ImageTensor {
            width: self.width,
            height: self.height,
            channels: self.channels,
            domain,
            values,
        }
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Byte values; requires the byte domain.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.domain != Domain::Byte {
            return Err(Error::Contract("byte export needs a byte-domain image".into()));
        }
        Ok(self.values.iter().map(|&v| v as u8).collect())
    }
}

/// Maps a byte image to `[0, 1]` by exact division by 255.
pub fn normalize(image: &ImageTensor) -> Result<ImageTensor> {
    if image.domain != Domain::Byte {
        return Err(Error::Contract("normalize expects a byte-domain image".into()));
    }
    Ok(image.with_values(Domain::Unit, image.values.iter().map(|v| v / 255.0).collect()))
}

/// Quantizes a unit image to bytes, rounding half up.
pub fn denormalize(image: &ImageTensor) -> Result<ImageTensor> {
    if image.domain != Domain::Unit {
        return Err(Error::Contract("denormalize expects a unit-domain image".into()));
    }
    Ok(image.with_values(
        Domain::Byte,
        image.values.iter().map(|&v| f64::from(quantize(v))).collect(),
    ))
}

/// Round-half-up quantization of a unit value to a byte.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Mean and population standard deviation of a normalized channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mu: f64,
    pub sigma: f64,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn channel_stats(channel: &[f64]) -> Result<ChannelStats> {
    if channel.is_empty() {
        return Err(Error::Contract("channel statistics of an empty channel".into()));
    }
    let (mu, sigma) = mean_and_std(channel);
    Ok(ChannelStats { mu, sigma })
}

/// Takes the first `pixels` probabilities, standardizes them, maps them to
/// the target moments and clips to `[0, 1]`.
pub fn rescale_probs(probs: &[f64], pixels: usize, stats: ChannelStats) -> Result<Vec<f64>> {
    if pixels == 0 || pixels > probs.len() {
        return Err(Error::Contract(format!(
            "pixel count {pixels} not in 1..={}",
            probs.len()
        )));
    }
    let head = &probs[..pixels];
    let (mean, std) = mean_and_std(head);
    let spread = std.max(SPREAD_EPS);
    Ok(head
        .iter()
        .map(|p| ((p - mean) / spread * stats.sigma + stats.mu).clamp(0.0, 1.0))
        .collect())
}

pub fn mse_loss(recon: &[f64], target: &[f64]) -> Result<f64> {
    if recon.len() != target.len() || recon.is_empty() {
        return Err(Error::Contract(format!(
            "mse over vectors of length {} and {}",
            recon.len(),
            target.len()
        )));
    }
    Ok(recon
        .iter()
        .zip(target)
        .map(|(r, t)| (r - t).powi(2))
        .sum::<f64>()
        / recon.len() as f64)
}

/// `dL/dr = 2(r - t)/N` for the MSE loss.
pub fn mse_grad(recon: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if recon.len() != target.len() || recon.is_empty() {
        return Err(Error::Contract(format!(
            "mse gradient over vectors of length {} and {}",
            recon.len(),
            target.len()
        )));
    }
    let scale = 2.0 / recon.len() as f64;
    Ok(recon.iter().zip(target).map(|(r, t)| scale * (r - t)).collect())
}

/// Pulls `upstream = dL/dr` back through [`rescale_probs`] to `dL/dp'`,
/// differentiating through the sub-vector mean and spread. Outputs that
/// clip contribute nothing; boundary values count as inside.
pub fn rescale_jacobian_vjp(sub: &[f64], stats: ChannelStats, upstream: &[f64]) -> Result<Vec<f64>> {
    if sub.len() != upstream.len() || sub.is_empty() {
        return Err(Error::Contract(format!(
            "vjp over vectors of length {} and {}",
            sub.len(),
            upstream.len()
        )));
    }
    let n = sub.len() as f64;
    let (mean, std) = mean_and_std(sub);
    if std <= SPREAD_EPS {
        return Ok(vec![0.0; sub.len()]);
    }
    let z: Vec<f64> = sub.iter().map(|p| (p - mean) / std).collect();
    // Mask upstream entries whose pre-clip output lies outside [0, 1].
    let masked: Vec<f64> = z
        .iter()
        .zip(upstream)
        .map(|(zi, u)| {
            let pre = zi * stats.sigma + stats.mu;
            if (0.0..=1.0).contains(&pre) {
                *u
            } else {
                0.0
            }
        })
        .collect();
    let sum_u: f64 = masked.iter().sum();
    let sum_uz: f64 = masked.iter().zip(&z).map(|(u, zi)| u * zi).sum();
    let scale = stats.sigma / std;
    Ok(masked
        .iter()
        .zip(&z)
        .map(|(u, zj)| scale * (u - sum_u / n - zj * sum_uz / n))
        .collect())
}
