//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use mpmqir_core::ansatz::CircuitTemplate;
use mpmqir_core::dataio::read_pnm;
use mpmqir_core::metrics::{ssim, SsimConfig};
use mpmqir_core::postproc::normalize;
use mpmqir_core::statevec::{Gate, GateKind};
use num_complex::Complex64;
use rand::Rng;
use serde::Deserialize;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn mnist_fixture() -> PathBuf {
    fixture("mnist-sample-images.idx3-ubyte")
}

#[derive(Deserialize)]
struct Golden {
    name: String,
    a: String,
    b: String,
    ssim: f64,
}

/// Expected values come from scikit-image `structural_similarity` with
/// Gaussian weights, σ = 1.5, population covariance and unit data range.
pub fn ssim_golden_cases() -> Vec<(String, f64, f64)> {
    let dir = fixture("ssim");
    let cases: Vec<Golden> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).unwrap()).unwrap();
    cases
        .into_iter()
        .map(|g| {
            let a = normalize(&read_pnm(dir.join(&g.a)).unwrap()).unwrap();
            let b = normalize(&read_pnm(dir.join(&g.b)).unwrap()).unwrap();
            (g.name, ssim(&a, &b, &SsimConfig::default()).unwrap(), g.ssim)
        })
        .collect()
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug)]
pub struct Dense {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl Dense {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Dense { dim, data }
    }

    pub fn mul(&self, rhs: &Dense) -> Dense {
        let n = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        Dense { dim: n, data }
    }

    pub fn add(&self, rhs: &Dense) -> Dense {
        Dense {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Dense) -> Dense {
        let (a, b) = (self.dim, rhs.dim);
        let n = a * b;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..a {
            for j in 0..a {
                for k in 0..b {
                    for l in 0..b {
                        data[(i * b + k) * n + (j * b + l)] = self.data[i * a + j] * rhs.data[k * b + l];
                    }
                }
            }
        }
        Dense { dim: n, data }
    }

    pub fn first_column(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.data[i * self.dim]).collect()
    }
}

fn mat2(a: [[Complex64; 2]; 2]) -> Dense {
    Dense {
        dim: 2,
        data: vec![a[0][0], a[0][1], a[1][0], a[1][1]],
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Textbook single-qubit matrices.
pub fn single_qubit(kind: GateKind, theta: f64) -> Dense {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    match kind {
        GateKind::Rx | GateKind::Crx => mat2([[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]]),
        GateKind::Ry | GateKind::Cry => mat2([[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]]),
        GateKind::Rz | GateKind::Crz => mat2([[c(co, -si), c(0.0, 0.0)], [c(0.0, 0.0), c(co, si)]]),
        GateKind::Cnot => mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]),
    }
}

/// Embeds `ops` (qubit → 2×2) into an `m`-qubit operator. Qubit 0 is the
/// least significant bit, so it is the rightmost Kronecker factor.
fn embed(m: usize, ops: &[(usize, Dense)]) -> Dense {
    let mut out = Dense::identity(1);
    for q in (0..m).rev() {
        let factor = ops
            .iter()
            .find(|(t, _)| *t == q)
            .map_or_else(|| Dense::identity(2), |(_, d)| d.clone());
        out = out.kron(&factor);
    }
    out
}

pub fn gate_matrix(m: usize, gate: &Gate, theta: f64) -> Dense {
    let u = single_qubit(gate.kind, theta);
    match gate.control {
        None => embed(m, &[(gate.target, u)]),
        Some(ctl) => {
            let p0 = mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
            let p1 = mat2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
            embed(m, &[(ctl, p0)]).add(&embed(m, &[(ctl, p1), (gate.target, u)]))
        }
    }
}

/// Probabilities from the full circuit unitary applied to `|0…0⟩`.
pub fn oracle_probabilities(template: &CircuitTemplate, params: &[f64]) -> Vec<f64> {
    let m = template.num_qubits();
    let mut u = Dense::identity(1 << m);
    for gate in template.gates() {
        let theta = gate.param_slot.map_or(0.0, |k| params[k]);
        u = gate_matrix(m, gate, theta).mul(&u);
    }
    u.first_column().iter().map(|a| a.norm_sqr()).collect()
}

/// Random gate list on `m ≥ 2` qubits using at most `max_params` slots.
pub fn random_gates<R: Rng>(rng: &mut R, m: usize, len: usize, max_params: usize) -> Vec<Gate> {
    let mut gates = Vec::with_capacity(len);
    let mut slot = 0;
    while gates.len() < len {
        let target = rng.gen_range(0..m);
        let mut ctl = rng.gen_range(0..m - 1);
        if ctl >= target {
            ctl += 1;
        }
        let choice = if slot < max_params { rng.gen_range(0..7) } else { 6 };
        let gate = match choice {
            0 => Gate::rx(target, slot),
            1 => Gate::ry(target, slot),
            2 => Gate::rz(target, slot),
            3 => Gate::crx(ctl, target, slot),
            4 => Gate::cry(ctl, target, slot),
            5 => Gate::crz(ctl, target, slot),
            _ => Gate::cnot(ctl, target),
        };
        if gate.param_slot.is_some() {
            slot += 1;
        }
        gates.push(gate);
    }
    gates
}

/// Parser under fuzz.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Idx,
    Cifar,
    Pnm,
    Mpmq,
}

pub fn parse_any(format: Format, bytes: &[u8]) -> mpmqir_core::Result<()> {
    use mpmqir_core::dataio::*;
    match format {
        Format::Idx => parse_idx_images(bytes).map(drop),
        Format::Cifar => parse_cifar10(bytes, 0).map(drop),
        Format::Pnm => parse_pnm(bytes).map(drop),
        Format::Mpmq => decode_checkpoint(bytes).and_then(|ck| decode_checkpoint_to_image(&ck)).map(drop),
    }
}

/// Well-formed inputs the mutators start from.
pub fn seed_corpus() -> Vec<(Format, Vec<u8>)> {
    use mpmqir_core::ansatz::AnsatzKind;
    use mpmqir_core::dataio::{encode_checkpoint, encode_idx_images, encode_pnm, Checkpoint};
    use mpmqir_core::postproc::{ChannelStats, ImageTensor};

    let gray = ImageTensor::from_bytes(5, 3, 1, &(0..15).map(|i| i * 17).collect::<Vec<u8>>()).unwrap();
    let rgb = ImageTensor::from_bytes(2, 2, 3, &(0..12).map(|i| i * 20).collect::<Vec<u8>>()).unwrap();
    let idx_small = encode_idx_images(&[gray.clone(), gray.clone()]).unwrap();
    let idx_mnist = std::fs::read(mnist_fixture()).unwrap();
    let cifar: Vec<u8> = (0..2 * 3073).map(|i| (i * 7 % 256) as u8).collect();
    let mut commented = b"P5\n# comment\n5 3\n255\n".to_vec();
    commented.extend(gray.to_bytes().unwrap());
    let checkpoint = |channels: usize| Checkpoint {
        ansatz: AnsatzKind::Mpm,
        num_qubits: 4,
        layers: 1,
        width: 4,
        height: 3,
        stats: vec![ChannelStats { mu: 0.4, sigma: 0.2 }; channels],
        params: vec![(0..12).map(|k| 0.3 * k as f64).collect(); channels],
    };
    vec![
        (Format::Idx, idx_small),
        (Format::Idx, idx_mnist),
        (Format::Cifar, cifar),
        (Format::Pnm, encode_pnm(&gray).unwrap()),
        (Format::Pnm, encode_pnm(&rgb).unwrap()),
        (Format::Pnm, commented),
        (Format::Mpmq, encode_checkpoint(&checkpoint(1)).unwrap()),
        (Format::Mpmq, encode_checkpoint(&checkpoint(3)).unwrap()),
    ]
}

/// Applies one to four random edits: bit flips, byte overwrites with
/// boundary values, truncation, extension, or an insertion or deletion.
pub fn mutate<R: Rng>(rng: &mut R, input: &[u8]) -> Vec<u8> {
    let mut out = input.to_vec();
    for _ in 0..rng.gen_range(1..=4) {
        let len = out.len();
        match rng.gen_range(0..6) {
            0 if len > 0 => {
                let i = rng.gen_range(0..len);
                out[i] ^= 1 << rng.gen_range(0..8);
            }
            1 if len > 0 => {
                // Header fields sit near the front; bias edits there.
                let i = rng.gen_range(0..len.min(24));
                out[i] = *[0u8, 1, 2, 3, 0x7f, 0x80, 0xff, b' ', b'#', b'\n', b'9']
                    .get(rng.gen_range(0..11))
                    .unwrap();
            }
            2 => out.truncate(rng.gen_range(0..=len)),
            3 => {
                let extra = rng.gen_range(1..16);
                out.extend((0..extra).map(|_| rng.gen::<u8>()));
            }
            4 if len > 0 => {
                let i = rng.gen_range(0..=len);
                out.insert(i, rng.gen());
            }
            _ if len > 0 => {
                out.remove(rng.gen_range(0..len));
            }
            _ => out.push(rng.gen()),
        }
    }
    out
}

/// Outcome of fuzzing one format.
#[derive(Debug, Default)]
pub struct FuzzTally {
    pub cases: usize,
    pub accepted: usize,
    pub positioned_errors: usize,
    pub unpositioned: Vec<String>,
    pub panics: usize,
}

/// Runs `per_seed` mutants of every seed input through its parser.
pub fn fuzz_corpus(per_seed: usize, seed: u64) -> FuzzTally {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut tally = FuzzTally::default();
    for (format, input) in seed_corpus() {
        for _ in 0..per_seed {
            let mutant = mutate(&mut rng, &input);
            tally.cases += 1;
            match std::panic::catch_unwind(|| parse_any(format, &mutant)) {
                Err(_) => tally.panics += 1,
                Ok(Ok(())) => tally.accepted += 1,
                Ok(Err(e)) => match e.offset() {
                    Some(o) if o <= mutant.len() => tally.positioned_errors += 1,
                    _ => tally.unpositioned.push(format!("{format:?}: {e}")),
                },
            }
        }
    }
    tally
}

/// Checkpoint files written by an independent encoder, with the byte image
/// each one must decode to.
pub fn frozen_checkpoints() -> Vec<(String, Vec<u8>, Vec<u8>)> {
    let dir = fixture("checkpoints");
    let expected: std::collections::BTreeMap<String, Vec<u8>> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected_decode.json")).unwrap()).unwrap();
    expected
        .into_iter()
        .map(|(name, pixels)| {
            let bytes = std::fs::read(dir.join(&name)).unwrap();
            (name, bytes, pixels)
        })
        .collect()
}
