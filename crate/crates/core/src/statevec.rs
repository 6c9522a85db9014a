//! Dense statevector simulation.
//!
//! Basis index `i` encodes the computational basis state with qubit 0 as
//! the least-significant bit. Rotations follow the half-angle convention
//! `R_P(θ) = exp(-iθP/2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::CircuitTemplate;
use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 16;

/// Pauli axis of a rotation gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cnot,
    Crx,
    Cry,
    Crz,
}

impl GateKind {
    pub fn is_parameterized(self) -> bool {
        !matches!(self, GateKind::Cnot)
    }

    pub fn is_controlled(self) -> bool {
        matches!(
            self,
            GateKind::Cnot | GateKind::Crx | GateKind::Cry | GateKind::Crz
        )
    }

    /// Rotation axis, `None` for CNOT.
    pub fn axis(self) -> Option<Pauli> {
        match self {
            GateKind::Rx | GateKind::Crx => Some(Pauli::X),
            GateKind::Ry | GateKind::Cry => Some(Pauli::Y),
            GateKind::Rz | GateKind::Crz => Some(Pauli::Z),
            GateKind::Cnot => None,
        }
    }
}

/// One gate of a circuit template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub control: Option<usize>,
    pub target: usize,
    /// Index into the parameter vector; `None` exactly for CNOT.
    pub param_slot: Option<usize>,
}

impl Gate {
    pub fn rx(target: usize, slot: usize) -> Self {
        Self::single(GateKind::Rx, target, slot)
    }

    pub fn ry(target: usize, slot: usize) -> Self {
        Self::single(GateKind::Ry, target, slot)
    }

    pub fn rz(target: usize, slot: usize) -> Self {
        Self::single(GateKind::Rz, target, slot)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::Cnot,
            control: Some(control),
            target,
            param_slot: None,
        }
    }

    pub fn crx(control: usize, target: usize, slot: usize) -> Self {
        Self::controlled(GateKind::Crx, control, target, slot)
    }

    pub fn cry(control: usize, target: usize, slot: usize) -> Self {
        Self::controlled(GateKind::Cry, control, target, slot)
    }

    pub fn crz(control: usize, target: usize, slot: usize) -> Self {
        Self::controlled(GateKind::Crz, control, target, slot)
    }

    fn single(kind: GateKind, target: usize, slot: usize) -> Self {
        Gate {
            kind,
            control: None,
            target,
            param_slot: Some(slot),
        }
    }

    fn controlled(kind: GateKind, control: usize, target: usize, slot: usize) -> Self {
        Gate {
            kind,
            control: Some(control),
            target,
            param_slot: Some(slot),
        }
    }

    /// Checks qubit indices and slot presence against an `m`-qubit register.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        if self.target >= num_qubits {
            return Err(Error::Contract(format!(
                "target qubit {} out of range for {num_qubits} qubits",
                self.target
            )));
        }
        match (self.kind.is_controlled(), self.control) {
            (true, Some(c)) if c >= num_qubits => {
                return Err(Error::Contract(format!(
                    "control qubit {c} out of range for {num_qubits} qubits"
                )))
            }
            (true, Some(c)) if c == self.target => {
                return Err(Error::Contract(format!(
                    "control and target coincide on qubit {c}"
                )))
            }
            (true, None) => {
                return Err(Error::Contract(format!(
                    "{:?} gate is missing its control qubit",
                    self.kind
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Contract(format!(
                    "{:?} gate does not take a control qubit",
                    self.kind
                )))
            }
            _ => {}
        }
        if self.kind.is_parameterized() != self.param_slot.is_some() {
            return Err(Error::Contract(format!(
                "{:?} gate has inconsistent parameter slot {:?}",
                self.kind, self.param_slot
            )));
        }
        Ok(())
    }
}

/// Measurement distribution `p_i = |<i|psi>|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `2^m` complex amplitudes of an `m`-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// Prepares `|0...0>` on `num_qubits` qubits.
pub fn init_zero_state(num_qubits: usize) -> Result<StateVector> {
    if !(1..=MAX_QUBITS).contains(&num_qubits) {
        return Err(Error::Config(format!(
            "qubit count {num_qubits} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector {
        num_qubits,
        amplitudes,
    })
}

impl StateVector {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Builds a state from raw amplitudes. The length must be a power of two
    /// within the supported register size; normalization is not enforced.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Contract(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "qubit count {num_qubits} exceeds {MAX_QUBITS}"
            )));
        }
        Ok(StateVector {
            num_qubits,
            amplitudes,
        })
    }

    /// Resets to `|0...0>` without reallocating.
    pub fn reset(&mut self) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[0] = Complex64::new(1.0, 0.0);
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> ProbabilityVector {
        ProbabilityVector(self.amplitudes.iter().map(|a| a.norm_sqr()).collect())
    }

    /// Applies `gate`; `theta` must be present exactly when the gate is parameterized.
    pub fn apply_gate(&mut self, gate: &Gate, theta: Option<f64>) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match (gate.kind.is_parameterized(), theta) {
            (true, None) => {
                return Err(Error::Contract(format!(
                    "{:?} gate requires an angle",
                    gate.kind
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Contract(format!(
                    "{:?} gate takes no angle",
                    gate.kind
                )))
            }
            _ => {}
        }
        self.apply_unchecked(gate, theta.unwrap_or(0.0));
        Ok(())
    }

    /// Applies a gate already validated against this register.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate, theta: f64) {
        let cmask = gate.control.map_or(0, |c| 1usize << c);
        match gate.kind.axis() {
            None => self.apply_x(gate.target, cmask),
            Some(axis) => self.apply_rotation(axis, gate.target, cmask, theta),
        }
    }

    /// Applies the inverse of a validated gate.
    pub(crate) fn apply_inverse_unchecked(&mut self, gate: &Gate, theta: f64) {
        self.apply_unchecked(gate, -theta);
    }

    /// Multiplies by the rotation generator `P` on the target, restricted to
    /// the control-set subspace for controlled rotations. CNOT is ignored.
    pub(crate) fn apply_generator(&mut self, gate: &Gate) {
        let cmask = gate.control.map_or(0, |c| 1usize << c);
        let Some(axis) = gate.kind.axis() else {
            return;
        };
        if cmask != 0 {
            // Zero the control-off subspace: the generator of a controlled
            // rotation is |1><1| (x) P.
            for (i, a) in self.amplitudes.iter_mut().enumerate() {
                if i & cmask == 0 {
                    *a = Complex64::new(0.0, 0.0);
                }
            }
        }
        let i_unit = Complex64::new(0.0, 1.0);
        self.for_each_pair(gate.target, cmask, |a0, a1| match axis {
            Pauli::X => std::mem::swap(a0, a1),
            Pauli::Y => {
                let (x0, x1) = (*a0, *a1);
                *a0 = -i_unit * x1;
                *a1 = i_unit * x0;
            }
            Pauli::Z => *a1 = -*a1,
        });
    }

    fn apply_x(&mut self, target: usize, cmask: usize) {
        self.for_each_pair(target, cmask, std::mem::swap);
    }

    fn apply_rotation(&mut self, axis: Pauli, target: usize, cmask: usize, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        match axis {
            Pauli::X => {
                let mis = Complex64::new(0.0, -s);
                self.for_each_pair(target, cmask, |a0, a1| {
                    let (x0, x1) = (*a0, *a1);
                    *a0 = x0 * c + x1 * mis;
                    *a1 = x0 * mis + x1 * c;
                });
            }
            Pauli::Y => {
                self.for_each_pair(target, cmask, |a0, a1| {
                    let (x0, x1) = (*a0, *a1);
                    *a0 = x0 * c - x1 * s;
                    *a1 = x0 * s + x1 * c;
                });
            }
            Pauli::Z => {
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                self.for_each_pair(target, cmask, |a0, a1| {
                    *a0 *= lo;
                    *a1 *= hi;
                });
            }
        }
    }

    /// Visits every amplitude pair `(i, i | 1<<target)` with the target bit
    /// clear in `i` and all `cmask` bits set.
    #[inline]
    fn for_each_pair<F>(&mut self, target: usize, cmask: usize, mut f: F)
    where
        F: FnMut(&mut Complex64, &mut Complex64),
    {
        let stride = 1usize << target;
        for (k, chunk) in self.amplitudes.chunks_exact_mut(2 * stride).enumerate() {
            let offset = k * 2 * stride;
            let (lo, hi) = chunk.split_at_mut(stride);
            if cmask == 0 {
                for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                    f(a0, a1);
                }
            } else {
                for (j, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    if (offset + j) & cmask == cmask {
                        f(a0, a1);
                    }
                }
            }
        }
    }
}

/// Runs `template` from `|0...0>` into `state`, which must have the
/// template's register size. Reuses the buffer across calls.
pub(crate) fn evolve_into(template: &CircuitTemplate, params: &[f64], state: &mut StateVector) {
    state.reset();
    for gate in template.gates() {
        let theta = gate.param_slot.map_or(0.0, |k| params[k]);
        state.apply_unchecked(gate, theta);
    }
}

pub(crate) fn check_param_len(template: &CircuitTemplate, params: &[f64]) -> Result<()> {
    if params.len() != template.param_count() {
        return Err(Error::Contract(format!(
            "parameter vector has length {}, template expects {}",
            params.len(),
            template.param_count()
        )));
    }
    Ok(())
}

/// Returns `|<i|U(theta)|0...0>|^2` for every basis state `i`.
pub fn run_circuit(template: &CircuitTemplate, params: &[f64]) -> Result<ProbabilityVector> {
    check_param_len(template, params)?;
    let mut state = init_zero_state(template.num_qubits())?;
    evolve_into(template, params, &mut state);
    Ok(state.probabilities())
}
