//! Circuit templates for the bidirectional convolutional ansatz and the two
//! baseline families it is compared against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::{Gate, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzKind {
    /// Forward then backward convolution passes over adjacent qubit pairs.
    Mpm,
    /// Forward passes only, with a controlled-RY/RZ integration block after
    /// every second layer.
    Qcnn,
    /// RY/RZ on every qubit, a controlled-RX chain, RY/RZ again.
    Qae,
}

impl AnsatzKind {
    pub const ALL: [AnsatzKind; 3] = [AnsatzKind::Mpm, AnsatzKind::Qcnn, AnsatzKind::Qae];

    pub fn as_str(self) -> &'static str {
        match self {
            AnsatzKind::Mpm => "mpm",
            AnsatzKind::Qcnn => "qcnn",
            AnsatzKind::Qae => "qae",
        }
    }

    /// Byte tag used in checkpoints.
    pub fn code(self) -> u8 {
        match self {
            AnsatzKind::Mpm => 0,
            AnsatzKind::Qcnn => 1,
            AnsatzKind::Qae => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AnsatzKind::Mpm),
            1 => Some(AnsatzKind::Qcnn),
            2 => Some(AnsatzKind::Qae),
            _ => None,
        }
    }

    pub fn build(self, num_qubits: usize, layers: usize) -> Result<CircuitTemplate> {
        match self {
            AnsatzKind::Mpm => build_mpm(num_qubits, layers),
            AnsatzKind::Qcnn => build_qcnn(num_qubits, layers),
            AnsatzKind::Qae => build_qae(num_qubits, layers),
        }
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpm" => Ok(AnsatzKind::Mpm),
            "qcnn" => Ok(AnsatzKind::Qcnn),
            "qae" => Ok(AnsatzKind::Qae),
            other => Err(Error::Config(format!(
                "unknown ansatz '{other}' (expected mpm, qcnn or qae)"
            ))),
        }
    }
}

/// An ordered gate list whose rotation angles index a parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitTemplate {
    num_qubits: usize,
    gates: Vec<Gate>,
    param_count: usize,
    kind: Option<AnsatzKind>,
    layers: usize,
}

impl CircuitTemplate {
    /// Wraps an arbitrary gate list. Parameter slots must cover `0..N`
    /// with each slot used exactly once.
    pub fn from_gates(num_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        Self::assemble(num_qubits, gates, None, 0)
    }

    fn assemble(
        num_qubits: usize,
        gates: Vec<Gate>,
        kind: Option<AnsatzKind>,
        layers: usize,
    ) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::Config(format!(
                "qubit count {num_qubits} outside supported range 1..={MAX_QUBITS}"
            )));
        }
        let mut seen = Vec::new();
        for gate in &gates {
            gate.validate(num_qubits)?;
            if let Some(slot) = gate.param_slot {
                if slot >= seen.len() {
                    seen.resize(slot + 1, false);
                }
                if std::mem::replace(&mut seen[slot], true) {
                    return Err(Error::Contract(format!("parameter slot {slot} used twice")));
                }
            }
        }
        if let Some(gap) = seen.iter().position(|used| !used) {
            return Err(Error::Contract(format!("parameter slot {gap} is unused")));
        }
        Ok(CircuitTemplate {
            num_qubits,
            gates,
            param_count: seen.len(),
            kind,
            layers,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of trainable angles, `N_θ`.
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Builder family, `None` for hand-assembled templates.
    pub fn kind(&self) -> Option<AnsatzKind> {
        self.kind
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// Number of slots carried by controlled rotations.
    pub fn controlled_param_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| g.param_slot.is_some() && g.kind.is_controlled())
            .count()
    }
}

fn check_geometry(num_qubits: usize, layers: usize) -> Result<()> {
    if num_qubits < 2 {
        return Err(Error::Config(format!(
            "ansatz needs at least 2 qubits, got {num_qubits}"
        )));
    }
    if num_qubits > MAX_QUBITS {
        return Err(Error::Config(format!(
            "qubit count {num_qubits} exceeds {MAX_QUBITS}"
        )));
    }
    if layers == 0 {
        return Err(Error::Config("layer count must be at least 1".into()));
    }
    Ok(())
}

struct SlotCounter(usize);

impl SlotCounter {
    fn next(&mut self) -> usize {
        self.0 += 1;
        self.0 - 1
    }
}

/// Forward convolution pass: for each adjacent pair in ascending order,
/// RY on both qubits, CNOT low→high, RZ on the high qubit.
fn forward_pass(m: usize, gates: &mut Vec<Gate>, slots: &mut SlotCounter) {
    for lo in 0..m - 1 {
        let hi = lo + 1;
        gates.push(Gate::ry(lo, slots.next()));
        gates.push(Gate::ry(hi, slots.next()));
        gates.push(Gate::cnot(lo, hi));
        gates.push(Gate::rz(hi, slots.next()));
    }
}

/// Backward convolution pass: pairs in descending order, CNOT high→low
/// followed by RX on the low qubit.
fn backward_pass(m: usize, gates: &mut Vec<Gate>, slots: &mut SlotCounter) {
    for lo in (0..m - 1).rev() {
        let hi = lo + 1;
        gates.push(Gate::cnot(hi, lo));
        gates.push(Gate::rx(lo, slots.next()));
    }
}

/// Bidirectional convolutional ansatz, `4(m-1)` parameters per layer.
pub fn build_mpm(num_qubits: usize, layers: usize) -> Result<CircuitTemplate> {
    check_geometry(num_qubits, layers)?;
    let mut gates = Vec::with_capacity(6 * (num_qubits - 1) * layers);
    let mut slots = SlotCounter(0);
    for _ in 0..layers {
        forward_pass(num_qubits, &mut gates, &mut slots);
        backward_pass(num_qubits, &mut gates, &mut slots);
    }
    CircuitTemplate::assemble(num_qubits, gates, Some(AnsatzKind::Mpm), layers)
}

/// QCNN-style baseline: forward passes, with a CRY+CRZ block over adjacent
/// ascending pairs after every second layer.
pub fn build_qcnn(num_qubits: usize, layers: usize) -> Result<CircuitTemplate> {
    check_geometry(num_qubits, layers)?;
    let mut gates = Vec::new();
    let mut slots = SlotCounter(0);
    for layer in 1..=layers {
        forward_pass(num_qubits, &mut gates, &mut slots);
        if layer % 2 == 0 {
            for lo in 0..num_qubits - 1 {
                gates.push(Gate::cry(lo, lo + 1, slots.next()));
                gates.push(Gate::crz(lo, lo + 1, slots.next()));
            }
        }
    }
    CircuitTemplate::assemble(num_qubits, gates, Some(AnsatzKind::Qcnn), layers)
}

/// Quantum-autoencoder baseline: per layer RY, RZ on all qubits, a CRX chain
/// `q_i → q_{i+1}`, then RY, RZ on all qubits again.
pub fn build_qae(num_qubits: usize, layers: usize) -> Result<CircuitTemplate> {
    check_geometry(num_qubits, layers)?;
    let mut gates = Vec::new();
    let mut slots = SlotCounter(0);
    let rotation_set = |gates: &mut Vec<Gate>, slots: &mut SlotCounter| {
        for q in 0..num_qubits {
            gates.push(Gate::ry(q, slots.next()));
        }
        for q in 0..num_qubits {
            gates.push(Gate::rz(q, slots.next()));
        }
    };
    for _ in 0..layers {
        rotation_set(&mut gates, &mut slots);
        for lo in 0..num_qubits - 1 {
            gates.push(Gate::crx(lo, lo + 1, slots.next()));
        }
        rotation_set(&mut gates, &mut slots);
    }
    CircuitTemplate::assemble(num_qubits, gates, Some(AnsatzKind::Qae), layers)
}

/// Closed-form parameter count of a builder's output.
pub fn param_count(kind: AnsatzKind, num_qubits: usize, layers: usize) -> Result<usize> {
    check_geometry(num_qubits, layers)?;
    let m = num_qubits;
    Ok(match kind {
        AnsatzKind::Mpm => 4 * (m - 1) * layers,
        AnsatzKind::Qcnn => 3 * (m - 1) * layers + 2 * (m - 1) * (layers / 2),
        AnsatzKind::Qae => (5 * m - 1) * layers,
    })
}

/// Largest layer count whose parameter count does not exceed `budget`.
pub fn layers_within_budget(kind: AnsatzKind, num_qubits: usize, budget: usize) -> Option<usize> {
    let mut best = None;
    let mut layers = 1;
    while let Ok(count) = param_count(kind, num_qubits, layers) {
        if count > budget {
            break;
        }
        best = Some(layers);
        layers += 1;
    }
    best
}

/// Smallest register with `2^m >= pixels`, never below the builders' minimum of 2.
pub fn qubits_for_pixels(pixels: usize) -> usize {
    let m = pixels.max(1).next_power_of_two().trailing_zeros() as usize;
    m.max(2)
}
