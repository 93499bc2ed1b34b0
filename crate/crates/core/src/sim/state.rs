use num_complex::Complex64;

use crate::circuit::{Circuit, Gate, GateKind, Qubits};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Dense statevector over `n` qubits; qubit `q` is bit `q` of the basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if index >= 1 << n {
            return Err(Error::Dimension(format!("basis index {index} for {n} qubits")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the norm 1 within 1e-8.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Dimension(format!("{len} amplitudes is not a power of two")));
        }
        let s = StateVector {
            n: len.trailing_zeros() as usize,
            amps,
        };
        let norm = s.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(s)
    }

    pub(crate) fn from_raw(n: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n);
        StateVector { n, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies `gate` with angle `theta` (ignored for H).
    pub fn apply(&mut self, gate: &Gate, theta: f64) {
        match gate.qubits {
            Qubits::Single(q) => self.apply_single(gate.kind, q, theta),
            Qubits::Pair(a, b) => self.apply_pair(gate.kind, a, b, theta),
        }
    }

    /// Applies the inverse of `gate(theta)`.
    pub fn apply_inverse(&mut self, gate: &Gate, theta: f64) {
        // H is self-inverse; the rotations invert by negating the angle
        self.apply(gate, -theta);
    }

    fn apply_single(&mut self, kind: GateKind, q: usize, theta: f64) {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let m: [[Complex64; 2]; 2] = match kind {
            GateKind::H => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            GateKind::Rx => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            GateKind::Ry => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            GateKind::Rz => {
                let zero = Complex64::new(0.0, 0.0);
                [[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]]
            }
            _ => unreachable!("two-qubit kind on one qubit"),
        };
        let bit = 1usize << q;
        for i0 in (0..self.amps.len()).filter(|i| i & bit == 0) {
            let i1 = i0 | bit;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_pair(&mut self, kind: GateKind, a: usize, b: usize, theta: f64) {
        let (ba, bb) = (1usize << a, 1usize << b);
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        match kind {
            GateKind::ZZ => {
                let same = Complex64::new(c, -s);
                let diff = Complex64::new(c, s);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    let parity = ((i & ba) != 0) ^ ((i & bb) != 0);
                    *amp *= if parity { diff } else { same };
                }
            }
            GateKind::XX | GateKind::YY => {
                // exp(-i θ/2 P) = c I - i s P, P flips both bits with a sign
                let mis = Complex64::new(0.0, -s);
                for i in 0..self.amps.len() {
                    if i & ba != 0 {
                        continue;
                    }
                    // pairs (i, i ^ ba ^ bb) visited once: i has bit a clear
                    let j = i ^ ba ^ bb;
                    let (ai, aj) = (self.amps[i], self.amps[j]);
                    let (si, sj) = match kind {
                        GateKind::XX => (1.0, 1.0),
                        _ => {
                            // Y⊗Y: equal bits -> -1, different bits -> +1
                            let equal = (i & bb) == 0;
                            if equal {
                                (-1.0, -1.0)
                            } else {
                                (1.0, 1.0)
                            }
                        }
                    };
                    self.amps[i] = c * ai + mis * (sj * aj);
                    self.amps[j] = c * aj + mis * (si * ai);
                }
            }
            GateKind::SwapP => {
                // exp(-i θ (I+XX+YY+ZZ)/2) = exp(-i θ SWAP)
                let (ct, st) = (theta.cos(), theta.sin());
                let sym = Complex64::new(ct, -st);
                let mis = Complex64::new(0.0, -st);
                for i in 0..self.amps.len() {
                    let (xa, xb) = (i & ba != 0, i & bb != 0);
                    if xa == xb {
                        self.amps[i] *= sym;
                    } else if xa {
                        let j = i ^ ba ^ bb;
                        let (ai, aj) = (self.amps[i], self.amps[j]);
                        self.amps[i] = ct * ai + mis * aj;
                        self.amps[j] = ct * aj + mis * ai;
                    }
                }
            }
            _ => unreachable!("single-qubit kind on a pair"),
        }
    }

    /// Applies the rotation generator `G` of `gate` (`U = exp(-i θ G/2)`), returning `G|ψ>`.
    pub(crate) fn generator_applied(&self, gate: &Gate) -> StateVector {
        let mut out = self.clone();
        let amps = &mut out.amps;
        match (gate.kind, gate.qubits) {
            (GateKind::Rx, Qubits::Single(q)) => {
                let bit = 1 << q;
                for i in 0..amps.len() {
                    amps[i] = self.amps[i ^ bit];
                }
            }
            (GateKind::Ry, Qubits::Single(q)) => {
                let bit = 1 << q;
                for i in 0..amps.len() {
                    // Y|0> = i|1>, Y|1> = -i|0>
                    let src = self.amps[i ^ bit];
                    amps[i] = if i & bit != 0 { I * src } else { -I * src };
                }
            }
            (GateKind::Rz, Qubits::Single(q)) => {
                let bit = 1 << q;
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = -*a;
                    }
                }
            }
            (GateKind::XX, Qubits::Pair(a, b)) => {
                let m = (1 << a) | (1 << b);
                for i in 0..amps.len() {
                    amps[i] = self.amps[i ^ m];
                }
            }
            (GateKind::YY, Qubits::Pair(a, b)) => {
                let (ba, bb) = (1 << a, 1 << b);
                for i in 0..amps.len() {
                    let equal = ((i & ba) != 0) == ((i & bb) != 0);
                    let src = self.amps[i ^ ba ^ bb];
                    amps[i] = if equal { -src } else { src };
                }
            }
            (GateKind::ZZ, Qubits::Pair(a, b)) => {
                let (ba, bb) = (1 << a, 1 << b);
                for (i, amp) in amps.iter_mut().enumerate() {
                    if ((i & ba) != 0) != ((i & bb) != 0) {
                        *amp = -*amp;
                    }
                }
            }
            (GateKind::SwapP, Qubits::Pair(a, b)) => {
                // I + XX + YY + ZZ = 2 SWAP
                let (ba, bb) = (1 << a, 1 << b);
                for i in 0..amps.len() {
                    let j = if ((i & ba) != 0) != ((i & bb) != 0) {
                        i ^ ba ^ bb
                    } else {
                        i
                    };
                    amps[i] = 2.0 * self.amps[j];
                }
            }
            (kind, _) => unreachable!("no generator for {kind}"),
        }
        out
    }
}

fn check_params(circuit: &Circuit, params: &[f64]) -> Result<()> {
    let expected = circuit.num_params();
    if params.len() != expected {
        return Err(Error::Dimension(format!(
            "{} parameters given, circuit has {expected}",
            params.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_run(circuit: &Circuit, params: &[f64], init: &StateVector) -> Result<()> {
    circuit.ensure_valid()?;
    check_params(circuit, params)?;
    if init.n != circuit.n {
        return Err(Error::Dimension(format!(
            "state has {} qubits, circuit {}",
            init.n, circuit.n
        )));
    }
    Ok(())
}

/// Applies every gate of `circuit` in list order; parameters are consumed in list order.
pub fn run_circuit(circuit: &Circuit, params: &[f64], init: &StateVector) -> Result<StateVector> {
    check_run(circuit, params, init)?;
    let mut state = init.clone();
    apply_circuit(&mut state, circuit, params);
    Ok(state)
}

pub(crate) fn apply_circuit(state: &mut StateVector, circuit: &Circuit, params: &[f64]) {
    let mut p = 0;
    for g in &circuit.gates {
        let theta = if g.kind.is_parameterized() {
            p += 1;
            params[p - 1]
        } else {
            0.0
        };
        state.apply(g, theta);
    }
}

/// Loads `x / ||x||` as real amplitudes.
pub fn amplitude_encode(x: &[f64]) -> Result<StateVector> {
    if x.is_empty() || !x.len().is_power_of_two() {
        return Err(Error::Dimension(format!(
            "amplitude encoding needs a power-of-two length, got {}",
            x.len()
        )));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("cannot encode a zero vector".into()));
    }
    let amps = x.iter().map(|&v| Complex64::new(v / norm, 0.0)).collect();
    Ok(StateVector::from_raw(x.len().trailing_zeros() as usize, amps))
}
