//! End-to-end compression of a byte image into a [`Checkpoint`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{qubits_for_pixels, AnsatzKind};
use crate::dataio::{decode_checkpoint_to_image, reconstruct_unit, Checkpoint};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, QualityReport};
use crate::optimize::{train_channel, TrainConfig, TrainTrace};
use crate::postproc::{channel_stats, normalize, Domain, ImageTensor};
use crate::statevec::MAX_QUBITS;

/// Result of compressing one image.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Compressed {
    pub checkpoint: Checkpoint,
    /// One trace per channel.
    pub traces: Vec<TrainTrace>,
    /// Quality of the unit-domain reconstruction, before quantization.
    pub quality: QualityReport,
    /// Quality of the decoded byte image against the original bytes.
    pub quality_quantized: QualityReport,
}

/// Seed used for channel `c`; channels get distinct initializations.
pub fn channel_seed(seed: u64, channel: usize) -> u64 {
    seed.wrapping_add(channel as u64)
}

/// Trains one circuit per channel and packages the result.
///
/// Channels train concurrently on the current rayon pool. Each channel's
/// run is deterministic, so the output does not depend on the pool size.
pub fn compress(
    image: &ImageTensor,
    ansatz: AnsatzKind,
    layers: usize,
    config: &TrainConfig,
) -> Result<Compressed> {
    if image.domain() != Domain::Byte {
        return Err(Error::Contract("compress expects a byte-domain image".into()));
    }
    config.validate()?;
    let pixels = image.pixel_count();
    if pixels > 1 << MAX_QUBITS || image.width() > usize::from(u16::MAX) || image.height() > usize::from(u16::MAX) {
        return Err(Error::Config(format!(
            "{}x{} image needs more than {MAX_QUBITS} qubits",
            image.width(),
            image.height()
        )));
    }
    let num_qubits = qubits_for_pixels(pixels);
    let template = ansatz.build(num_qubits, layers)?;
    let unit = normalize(image)?;

    let outcomes = (0..image.channels())
        .into_par_iter()
        .map(|c| {
            let target = unit.channel(c);
            let stats = channel_stats(&target)?;
            let channel_config = TrainConfig {
                seed: channel_seed(config.seed, c),
                ..config.clone()
            };
            let trace = train_channel(&template, &target, stats, &channel_config)?;
            Ok((stats, trace))
        })
        .collect::<Result<Vec<_>>>()?;

    let (stats, traces): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let checkpoint = Checkpoint {
        ansatz,
        num_qubits,
        layers,
        width: image.width(),
        height: image.height(),
        stats,
        params: traces.iter().map(|t| t.final_params.clone()).collect(),
    };
    let n_theta = Some(template.param_count());
    let quality = evaluate(&unit, &reconstruct_unit(&checkpoint)?, n_theta)?;
    let decoded = normalize(&decode_checkpoint_to_image(&checkpoint)?)?;
    let quality_quantized = evaluate(&unit, &decoded, n_theta)?;
    Ok(Compressed {
        checkpoint,
        traces,
        quality,
        quality_quantized,
    })
}
