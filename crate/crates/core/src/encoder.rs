//! Partially block Markov superposition encoding.
//!
//! Each block `t` carries its information symbols `u^(t)` unchanged and the
//! parity `p^(t) = v^(t) + sum_{i=1..m} Pi_i(v^(t-i))`. After `L` data blocks,
//! `m` termination blocks encode the all-zero source vector.

use rand::seq::SliceRandom;

use crate::codes::ComponentCode;
use crate::error::{Error, Result};
use crate::group::Element;
use crate::lattice::NestedLatticeCodebook;
use crate::rng::{stream_rng, Stream};

/// Symbol permutation with `w[j] = v[perm[j]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    pub fn identity(len: usize) -> Self {
        let perm: Vec<usize> = (0..len).collect();
        Interleaver {
            inverse: perm.clone(),
            perm,
        }
    }

    pub fn from_permutation(perm: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; perm.len()];
        for (j, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inverse[p] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "not a permutation: entry {p} at position {j}"
                )));
            }
            inverse[p] = j;
        }
        Ok(Interleaver { perm, inverse })
    }

    /// Uniform random permutation (Fisher-Yates) on stream `index`.
    pub fn random(len: usize, master_seed: u64, index: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut stream_rng(master_seed, Stream::Interleaver, index));
        Self::from_permutation(perm).expect("shuffle yields a permutation")
    }

    /// The `m` interleavers `Pi_1..Pi_m` of an experiment.
    pub fn family(len: usize, m: usize, master_seed: u64) -> Vec<Self> {
        (1..=m as u64).map(|i| Self::random(len, master_seed, i)).collect()
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn apply<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| v[p]).collect()
    }
}

/// One transmitted block `x^(t) = (u^(t), p^(t))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedBlock {
    pub info: Vec<Element>,
    pub parity: Vec<Element>,
}

impl EncodedBlock {
    pub fn symbols(&self) -> impl Iterator<Item = Element> + '_ {
        self.info.iter().chain(&self.parity).copied()
    }
}

#[derive(Clone, Debug)]
pub struct PbmstEncoder {
    code: ComponentCode,
    interleavers: Vec<Interleaver>,
}

impl PbmstEncoder {
    pub fn new(code: ComponentCode, interleavers: Vec<Interleaver>) -> Result<Self> {
        let len = code.spec().parity_len();
        if let Some(bad) = interleavers.iter().find(|p| p.len() != len) {
            return Err(Error::LengthMismatch {
                context: "interleaver",
                expected: len,
                found: bad.len(),
            });
        }
        Ok(PbmstEncoder { code, interleavers })
    }

    pub fn memory(&self) -> usize {
        self.interleavers.len()
    }

    pub fn code(&self) -> &ComponentCode {
        &self.code
    }

    pub fn interleavers(&self) -> &[Interleaver] {
        &self.interleavers
    }

    /// Quantizes `L` source blocks of `k*dim` samples each and emits the
    /// `L+m` transmitted blocks.
    pub fn encode_stream(&self, cb: &NestedLatticeCodebook, source_blocks: &[Vec<f64>]) -> Result<Vec<EncodedBlock>> {
        let want = self.code.spec().k() * cb.dim();
        let mut info = Vec::with_capacity(source_blocks.len());
        for s in source_blocks {
            if s.len() != want {
                return Err(Error::LengthMismatch {
                    context: "source block",
                    expected: want,
                    found: s.len(),
                });
            }
            info.push(cb.quantize_block(s)?);
        }
        self.encode_symbols(cb, &info)
    }

    /// Same as [`encode_stream`](Self::encode_stream) for already quantized blocks.
    pub fn encode_symbols(&self, cb: &NestedLatticeCodebook, info_blocks: &[Vec<Element>]) -> Result<Vec<EncodedBlock>> {
        let group = self.code.group();
        if group.order() != cb.order() {
            return Err(Error::GroupMismatch {
                expected: cb.order(),
                found: group.order(),
            });
        }
        let k = self.code.spec().k();
        let m = self.memory();
        let zero_symbol = cb.quantize(&vec![0.0; cb.dim()]);
        let terminal = vec![zero_symbol; k];
        // history[i] holds v^(t-1-i)
        let mut history: Vec<Vec<Element>> = vec![vec![group.identity(); self.code.spec().parity_len()]; m];
        let mut out = Vec::with_capacity(info_blocks.len() + m);
        for u in info_blocks.iter().chain(std::iter::repeat_n(&terminal, m)) {
            let v = self.code.encode(u)?;
            let mut p = v.clone();
            for (pi, past) in self.interleavers.iter().zip(&history) {
                for (pj, &src) in p.iter_mut().zip(pi.permutation()) {
                    *pj = group.add(*pj, past[src]);
                }
            }
            if m > 0 {
                history.rotate_right(1);
                history[0] = v;
            }
            out.push(EncodedBlock { info: u.clone(), parity: p });
        }
        Ok(out)
    }
}

/// Effective rate `kL / (n (L+m))`.
pub fn effective_rate(k: usize, n: usize, blocks: usize, m: usize) -> f64 {
    (k * blocks) as f64 / (n * (blocks + m)) as f64
}
