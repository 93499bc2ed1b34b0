use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::state::StateVector;
use crate::error::{Error, Result};

/// Pauli string stored as X and Z bitmasks; a qubit set in both masks carries Y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    pub x: u64,
    pub z: u64,
}

impl PauliWord {
    pub fn identity() -> Self {
        PauliWord { x: 0, z: 0 }
    }

    /// Builds a word from `(qubit, 'X' | 'Y' | 'Z')` factors.
    pub fn from_factors(factors: &[(usize, char)]) -> Result<Self> {
        let mut w = PauliWord::identity();
        for &(q, p) in factors {
            if q >= 64 {
                return Err(Error::InvalidArgument(format!("qubit {q} out of range")));
            }
            let bit = 1u64 << q;
            if (w.x | w.z) & bit != 0 {
                return Err(Error::InvalidArgument(format!("qubit {q} repeated in word")));
            }
            match p.to_ascii_uppercase() {
                'X' => w.x |= bit,
                'Y' => {
                    w.x |= bit;
                    w.z |= bit
                }
                'Z' => w.z |= bit,
                'I' => {}
                other => return Err(Error::InvalidArgument(format!("unknown Pauli {other:?}"))),
            }
        }
        Ok(w)
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn max_qubit(&self) -> Option<usize> {
        let m = self.x | self.z;
        (m != 0).then(|| 63 - m.leading_zeros() as usize)
    }

    /// Matrix element `<i|P|j>` is nonzero only for `i = j ^ x`; returns the phase for column `j`.
    #[inline]
    fn phase(&self, j: usize) -> Complex64 {
        // P = i^{nY} X^x Z^z up to the ordering of XZ = -iY on each Y site
        let ny = self.y_count();
        let sign = if ((j as u64) & self.z).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        let ip = match ny % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        ip * sign
    }

    /// Returns `P|ψ>`.
    pub fn apply(&self, state: &StateVector) -> StateVector {
        let amps = state.amplitudes();
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        let x = self.x as usize;
        for (j, &a) in amps.iter().enumerate() {
            out[j ^ x] = self.phase(j) * a;
        }
        StateVector::from_raw(state.num_qubits(), out)
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(top) = self.max_qubit() else {
            return write!(f, "I");
        };
        let mut first = true;
        for q in 0..=top {
            let bit = 1u64 << q;
            let c = match (self.x & bit != 0, self.z & bit != 0) {
                (true, true) => 'Y',
                (true, false) => 'X',
                (false, true) => 'Z',
                _ => continue,
            };
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{c}{q}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = Error;

    /// Parses `"Z0 Z1"`, `"X3"` or `"I"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("i") || s.is_empty() {
            return Ok(PauliWord::identity());
        }
        let mut factors = Vec::new();
        for tok in s.split_whitespace() {
            let mut chars = tok.chars();
            let p = chars.next().unwrap();
            let q: usize = chars
                .as_str()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad Pauli factor {tok:?}")))?;
            factors.push((q, p));
        }
        PauliWord::from_factors(&factors)
    }
}

/// Real-weighted sum of Pauli words on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliObservable {
    n: usize,
    terms: Vec<(f64, PauliWord)>,
}

impl PauliObservable {
    pub fn new(n: usize, terms: Vec<(f64, PauliWord)>) -> Result<Self> {
        for (_, w) in &terms {
            if let Some(top) = w.max_qubit() {
                if top >= n {
                    return Err(Error::InvalidArgument(format!(
                        "term {w} acts outside {n} qubits"
                    )));
                }
            }
        }
        Ok(PauliObservable { n, terms })
    }

    pub fn z(q: usize) -> Self {
        PauliObservable {
            n: q + 1,
            terms: vec![(1.0, PauliWord { x: 0, z: 1 << q })],
        }
    }

    pub fn x(q: usize) -> Self {
        PauliObservable {
            n: q + 1,
            terms: vec![(1.0, PauliWord { x: 1 << q, z: 0 })],
        }
    }

    /// `Σ w_q Z_q`.
    pub fn weighted_z(weights: &[f64]) -> Self {
        PauliObservable {
            n: weights.len(),
            terms: weights
                .iter()
                .enumerate()
                .map(|(q, &w)| (w, PauliWord { x: 0, z: 1 << q }))
                .collect(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliWord)] {
        &self.terms
    }

    /// Returns `O|ψ>`; the state may carry more qubits than the observable.
    pub fn apply(&self, state: &StateVector) -> StateVector {
        let amps = state.amplitudes();
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for &(c, w) in &self.terms {
            let x = w.x as usize;
            for (j, &a) in amps.iter().enumerate() {
                out[j ^ x] += c * w.phase(j) * a;
            }
        }
        StateVector::from_raw(state.num_qubits(), out)
    }

    /// Dense matrix of the observable in the computational basis.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge {
                n: self.n,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for &(c, w) in &self.terms {
            for j in 0..dim {
                m[(j ^ w.x as usize, j)] += c * w.phase(j);
            }
        }
        Ok(m)
    }
}

/// Largest register handled by the dense eigensolver.
pub const MAX_DENSE_QUBITS: usize = 12;

/// `<ψ|O|ψ>`, real for a Hermitian observable.
pub fn expectation(state: &StateVector, obs: &PauliObservable) -> Result<f64> {
    if obs.n > state.num_qubits() {
        return Err(Error::Dimension(format!(
            "observable on {} qubits, state on {}",
            obs.n,
            state.num_qubits()
        )));
    }
    let amps = state.amplitudes();
    let mut total = 0.0;
    for &(c, w) in &obs.terms {
        let x = w.x as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &a) in amps.iter().enumerate() {
            acc += amps[j ^ x].conj() * w.phase(j) * a;
        }
        total += c * acc.re;
    }
    Ok(total)
}

/// Exact ground-state energy by dense diagonalization (`n <= 12`).
pub fn exact_ground_energy(obs: &PauliObservable) -> Result<f64> {
    if obs.n > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge {
            n: obs.n,
            limit: MAX_DENSE_QUBITS,
        });
    }
    let dim = 1usize << obs.n;
    let real = obs.terms.iter().all(|(_, w)| w.y_count() % 2 == 0);
    let min = if real {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for &(c, w) in &obs.terms {
            for j in 0..dim {
                m[(j ^ w.x as usize, j)] += c * w.phase(j).re;
            }
        }
        SymmetricEigen::new(m).eigenvalues.min()
    } else {
        let m = obs.to_dense()?;
        SymmetricEigen::new(m).eigenvalues.min()
    };
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_matrix(p: char) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match p {
            'I' => [[l, o], [o, l]],
            'X' => [[o, l], [l, o]],
            'Y' => [[o, -i], [i, o]],
            'Z' => [[l, o], [o, -l]],
            _ => unreachable!(),
        }
    }

    /// Kronecker product with qubit 0 as the least significant index.
    fn kron_word(word: &[char]) -> DMatrix<Complex64> {
        let dim = 1 << word.len();
        DMatrix::from_fn(dim, dim, |r, c| {
            word.iter()
                .enumerate()
                .map(|(q, &p)| pauli_matrix(p)[(r >> q) & 1][(c >> q) & 1])
                .product()
        })
    }

    #[test]
    fn bitmask_phases_match_kronecker_products() {
        let letters = ['I', 'X', 'Y', 'Z'];
        for code in 0..64 {
            let word: Vec<char> = (0..3).map(|q| letters[(code >> (2 * q)) & 3]).collect();
            let factors: Vec<(usize, char)> = word.iter().copied().enumerate().collect();
            let w = PauliWord::from_factors(&factors).unwrap();
            let obs = PauliObservable::new(3, vec![(1.0, w)]).unwrap();
            let dense = obs.to_dense().unwrap();
            let reference = kron_word(&word);
            assert!((dense - reference).norm() < 1e-12, "{word:?}");
        }
    }

    #[test]
    fn word_text_round_trip() {
        let w: PauliWord = "Z0 Y2 X5".parse().unwrap();
        assert_eq!(w.to_string(), "Z0 Y2 X5");
        assert_eq!(w.y_count(), 1);
        assert_eq!("I".parse::<PauliWord>().unwrap(), PauliWord::identity());
        assert!("Q1".parse::<PauliWord>().is_err());
        assert!("Z1 X1".parse::<PauliWord>().is_err());
    }

    #[test]
    fn expectation_matches_dense() {
        let obs = PauliObservable::new(
            2,
            vec![
                (0.5, "Z0 Z1".parse().unwrap()),
                (-1.25, "X0".parse().unwrap()),
                (0.75, "Y0 Y1".parse().unwrap()),
                (0.3, "X0 Y1".parse().unwrap()),
            ],
        )
        .unwrap();
        let amps: Vec<Complex64> = (0..4)
            .map(|i| Complex64::new(0.3 + i as f64 * 0.1, 0.2 - i as f64 * 0.15))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s = StateVector::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();
        let m = obs.to_dense().unwrap();
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let reference = (v.adjoint() * &m * &v)[(0, 0)].re;
        assert!((expectation(&s, &obs).unwrap() - reference).abs() < 1e-12);
        let applied = obs.apply(&s);
        assert!((s.inner(&applied).re - reference).abs() < 1e-12);
    }

    #[test]
    fn ground_energy_small_cases() {
        // -Z0 - Z1 has ground energy -2; X0 X1 + Y0 Y1 has spectrum {-2, 0, 0, 2}
        let a = PauliObservable::new(2, vec![(-1.0, "Z0".parse().unwrap()), (-1.0, "Z1".parse().unwrap())]).unwrap();
        assert!((exact_ground_energy(&a).unwrap() + 2.0).abs() < 1e-12);
        let b = PauliObservable::new(2, vec![(1.0, "X0 X1".parse().unwrap()), (1.0, "Y0 Y1".parse().unwrap())]).unwrap();
        assert!((exact_ground_energy(&b).unwrap() + 2.0).abs() < 1e-12);
        // Y0 alone forces the complex path
        let c = PauliObservable::new(1, vec![(3.0, "Y0".parse().unwrap())]).unwrap();
        assert!((exact_ground_energy(&c).unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_large_rejected() {
        let obs = PauliObservable::weighted_z(&[1.0; 13]);
        assert!(matches!(
            exact_ground_energy(&obs),
            Err(Error::TooLarge { n: 13, limit: 12 })
        ));
    }
}
