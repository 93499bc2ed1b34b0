use super::list::Circuit;
use crate::error::{Error, Result};

/// Occupancy tensor of shape `[depth, qubit, gate type]` with zero padding up to the cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitImage {
    pub depth: usize,
    pub qubits: usize,
    pub channels: usize,
    /// Row-major `[depth][qubit][channel]`.
    pub data: Vec<f64>,
}

impl CircuitImage {
    pub fn zeros(depth: usize, qubits: usize, channels: usize) -> Self {
        CircuitImage {
            depth,
            qubits,
            channels,
            data: vec![0.0; depth * qubits * channels],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.depth, self.qubits, self.channels]
    }

    #[inline]
    pub fn index(&self, d: usize, q: usize, k: usize) -> usize {
        (d * self.qubits + q) * self.channels + k
    }

    pub fn get(&self, d: usize, q: usize, k: usize) -> f64 {
        self.data[self.index(d, q, k)]
    }

    pub fn set(&mut self, d: usize, q: usize, k: usize, v: f64) {
        let i = self.index(d, q, k);
        self.data[i] = v;
    }

    /// Number of occupied (depth, qubit, channel) cells.
    pub fn occupancy(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Reindexes the qubit axis: output qubit `perm[q]` receives input qubit `q`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<CircuitImage> {
        check_permutation(perm, self.qubits)?;
        let mut out = CircuitImage::zeros(self.depth, self.qubits, self.channels);
        for d in 0..self.depth {
            for q in 0..self.qubits {
                let src = self.index(d, q, 0);
                let dst = out.index(d, perm[q], 0);
                out.data[dst..dst + self.channels]
                    .copy_from_slice(&self.data[src..src + self.channels]);
            }
        }
        Ok(out)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

impl Circuit {
    /// Encodes the circuit as an image with `depth_cutoff` layers; deeper circuits are rejected.
    pub fn to_image(&self, depth_cutoff: usize) -> Result<CircuitImage> {
        let layering = self.compute_layers()?;
        if layering.depth > depth_cutoff {
            return Err(Error::TooDeep {
                depth: layering.depth,
                cutoff: depth_cutoff,
            });
        }
        let mut img = CircuitImage::zeros(depth_cutoff, self.n, self.gate_set.len());
        for (g, &d) in self.gates.iter().zip(&layering.layer_of) {
            let k = self.gate_set.id_of(g.kind).expect("validated");
            for q in g.qubits.iter() {
                img.set(d, q, k, 1.0);
            }
        }
        Ok(img)
    }
}
