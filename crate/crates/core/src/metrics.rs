//! Reconstruction quality: PSNR, SSIM and the parameter compression ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postproc::{mse_loss, Domain, ImageTensor};

/// Gaussian-window SSIM settings. Dynamic range `L` is 1 for unit images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// PSNR in dB for a given MSE with peak value 1. Zero MSE gives `+inf`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

fn check_pair(x: &ImageTensor, y: &ImageTensor) -> Result<()> {
    if !x.same_shape(y) {
        return Err(Error::Contract(format!(
            "image shapes differ: {}x{}x{} vs {}x{}x{}",
            x.width(),
            x.height(),
            x.channels(),
            y.width(),
            y.height(),
            y.channels()
        )));
    }
    if x.domain() != Domain::Unit || y.domain() != Domain::Unit {
        return Err(Error::Contract("quality metrics expect unit-domain images".into()));
    }
    Ok(())
}

/// PSNR over all values of two unit images.
pub fn psnr(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    check_pair(x, y)?;
    Ok(psnr_from_mse(mse_loss(x.values(), y.values())?))
}

/// Mean SSIM of two single-channel row-major planes over the valid region
/// (window positions fully inside the image, no padding).
pub fn ssim_plane(
    x: &[f64],
    y: &[f64],
    width: usize,
    height: usize,
    config: &SsimConfig,
) -> Result<f64> {
    if x.len() != width * height || y.len() != width * height {
        return Err(Error::Contract("plane length does not match geometry".into()));
    }
    let win = config.window;
    if width < win || height < win {
        return Err(Error::Contract(format!(
            "image {width}x{height} is smaller than the {win}x{win} SSIM window"
        )));
    }
    let kernel = config.kernel();
    let out_w = width - win + 1;
    let out_h = height - win + 1;

    // Horizontal pass over the five moment images.
    let mut horiz = vec![[0.0f64; 5]; height * out_w];
    for row in 0..height {
        for col in 0..out_w {
            let mut acc = [0.0f64; 5];
            for (k, w) in kernel.iter().enumerate() {
                let i = row * width + col + k;
                let (a, b) = (x[i], y[i]);
                acc[0] += w * a;
                acc[1] += w * b;
                acc[2] += w * (a * a);
                acc[3] += w * (b * b);
                acc[4] += w * (a * b);
            }
            horiz[row * out_w + col] = acc;
        }
    }

    let (c1, c2) = (config.c1(), config.c2());
    let mut total = 0.0;
    for row in 0..out_h {
        for col in 0..out_w {
            let mut m = [0.0f64; 5];
            for (k, w) in kernel.iter().enumerate() {
                let h = &horiz[(row + k) * out_w + col];
                for (acc, v) in m.iter_mut().zip(h) {
                    *acc += w * v;
                }
            }
            let [mx, my, exx, eyy, exy] = m;
            let vx = exx - mx * mx;
            let vy = eyy - my * my;
            let cov = exy - mx * my;
            let num = (2.0 * (mx * my) + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
        }
    }
    Ok(total / (out_w * out_h) as f64)
}

/// Mean SSIM over channels.
pub fn ssim(x: &ImageTensor, y: &ImageTensor, config: &SsimConfig) -> Result<f64> {
    check_pair(x, y)?;
    let mut sum = 0.0;
    for c in 0..x.channels() {
        sum += ssim_plane(&x.channel(c), &y.channel(c), x.width(), x.height(), config)?;
    }
    Ok(sum / x.channels() as f64)
}

/// Parameters per channel over pixels per channel.
pub fn pcr(n_theta: usize, width: usize, height: usize) -> f64 {
    n_theta as f64 / (width * height) as f64
}

/// Quality of one reconstructed channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelQuality {
    /// `+inf` for a bit-identical channel.
    pub psnr_db: f64,
    /// `None` when the image is smaller than the SSIM window.
    pub ssim: Option<f64>,
}

/// Two-decimal strings mirroring how results are tabulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayFields {
    pub psnr_db: String,
    pub ssim: Option<String>,
    pub pcr: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub n_theta: Option<usize>,
    pub pcr: Option<f64>,
    /// Per-channel PSNR; `null` marks an identical channel.
    pub psnr_db: Vec<Option<f64>>,
    pub psnr_mean_db: Option<f64>,
    /// True when any channel is identical, making the mean infinite.
    pub identical: bool,
    pub ssim: Vec<Option<f64>>,
    pub ssim_mean: Option<f64>,
    pub display: DisplayFields,
}

impl QualityReport {
    /// Mean PSNR with `+inf` restored for identical channels.
    pub fn psnr_mean(&self) -> f64 {
        self.psnr_mean_db.unwrap_or(f64::INFINITY)
    }
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Averages per-channel metrics into a report.
pub fn multichannel_report(
    channels: &[ChannelQuality],
    width: usize,
    height: usize,
    n_theta: Option<usize>,
) -> Result<QualityReport> {
    if channels.is_empty() {
        return Err(Error::Contract("quality report needs at least one channel".into()));
    }
    let n = channels.len() as f64;
    let psnr_mean = channels.iter().map(|c| c.psnr_db).sum::<f64>() / n;
    let ssim_mean = channels
        .iter()
        .map(|c| c.ssim)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    let pcr = n_theta.map(|k| pcr(k, width, height));
    let identical = channels.iter().any(|c| c.psnr_db.is_infinite());
    Ok(QualityReport {
        width,
        height,
        channels: channels.len(),
        n_theta,
        pcr,
        psnr_db: channels.iter().map(|c| finite_or_none(c.psnr_db)).collect(),
        psnr_mean_db: finite_or_none(psnr_mean),
        identical,
        ssim: channels.iter().map(|c| c.ssim).collect(),
        ssim_mean,
        display: DisplayFields {
            psnr_db: if psnr_mean.is_finite() {
                format!("{psnr_mean:.2}")
            } else {
                "inf".into()
            },
            ssim: ssim_mean.map(|s| format!("{s:.2}")),
            pcr: pcr.map(|p| format!("{p:.2}")),
        },
    })
}

/// Per-channel PSNR and SSIM of `recon` against `original`, both unit-domain.
pub fn evaluate(
    original: &ImageTensor,
    recon: &ImageTensor,
    n_theta: Option<usize>,
) -> Result<QualityReport> {
    check_pair(original, recon)?;
    let config = SsimConfig::default();
    let (w, h) = (original.width(), original.height());
    let mut per_channel = Vec::with_capacity(original.channels());
    for c in 0..original.channels() {
        let (a, b) = (original.channel(c), recon.channel(c));
        let psnr_db = psnr_from_mse(mse_loss(&a, &b)?);
        let ssim = if w >= config.window && h >= config.window {
            Some(ssim_plane(&a, &b, w, h, &config)?)
        } else {
            None
        };
        per_channel.push(ChannelQuality { psnr_db, ssim });
    }
    multichannel_report(&per_channel, w, h, n_theta)
}
