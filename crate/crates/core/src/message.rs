//! Probability vectors over group elements and the node operations on them.
//!
//! Messages live in the linear domain. Every normalization clamps entries to
//! [`PROB_FLOOR`] so that products never collapse to exact zeros.
//!
//! The slice kernels (`*_into`) are what the decoder runs in its inner loops;
//! [`Message`] wraps them with validation for library users.

use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup};

/// Lower bound applied to every entry at normalization.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    probs: Vec<f64>,
}

impl Message {
    pub fn uniform(q: usize) -> Self {
        Message {
            probs: vec![1.0 / q as f64; q],
        }
    }

    /// Exact point mass (no floor applied).
    pub fn point_mass(q: usize, g: Element) -> Self {
        let mut probs = vec![0.0; q];
        probs[g] = 1.0;
        Message { probs }
    }

    /// Builds a message from non-negative weights, normalizing them.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMessage("empty message".into()));
        }
        if weights.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidMessage(
                "weights must be finite and non-negative".into(),
            ));
        }
        let mut probs = weights;
        if normalize(&mut probs) {
            return Err(Error::InvalidMessage("weights sum to zero".into()));
        }
        Ok(Message { probs })
    }

    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        Message { probs }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Most likely element; ties go to the lowest index.
    pub fn argmax(&self) -> Element {
        argmax(&self.probs)
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    fn check_group(&self, group: &FiniteAbelianGroup) -> Result<()> {
        if self.len() != group.order() {
            return Err(Error::GroupMismatch {
                expected: group.order(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// `out(h) = sum_{a + b = h} f(a) g(b)`, renormalized.
pub fn group_convolve(group: &FiniteAbelianGroup, f: &Message, g: &Message) -> Result<Message> {
    f.check_group(group)?;
    g.check_group(group)?;
    let mut out = vec![0.0; group.order()];
    convolve_into(group, &f.probs, &g.probs, &mut out);
    if normalize(&mut out) {
        out.fill(1.0 / group.order() as f64);
    }
    Ok(Message::from_normalized(out))
}

/// `out(h) ~ f(h) g(h)`. The flag is set when the product vanishes
/// everywhere, in which case the uniform message is returned.
pub fn pointwise_product(f: &Message, g: &Message) -> Result<(Message, bool)> {
    if f.len() != g.len() {
        return Err(Error::GroupMismatch {
            expected: f.len(),
            found: g.len(),
        });
    }
    let mut out: Vec<f64> = f.probs.iter().zip(&g.probs).map(|(a, b)| a * b).collect();
    let degenerate = normalize(&mut out);
    if degenerate {
        out.fill(1.0 / f.len() as f64);
    }
    Ok((Message::from_normalized(out), degenerate))
}

/// Normalizes in place and clamps to [`PROB_FLOOR`]. Returns `true` when the
/// input had no usable mass (zero or non-finite sum); the slice is then left
/// uniform.
#[inline]
pub(crate) fn normalize(p: &mut [f64]) -> bool {
    let sum: f64 = p.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        let u = 1.0 / p.len() as f64;
        p.fill(u);
        return true;
    }
    let inv = 1.0 / sum;
    for x in p.iter_mut() {
        *x = (*x * inv).max(PROB_FLOOR);
    }
    false
}

/// `out(h) = sum_{a + b = h} f(a) g(b)` without normalization.
#[inline]
pub(crate) fn convolve_into(group: &FiniteAbelianGroup, f: &[f64], g: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (a, &fa) in f.iter().enumerate() {
        let row = group.add_row(a);
        for (b, &gb) in g.iter().enumerate() {
            out[row[b] as usize] += fa * gb;
        }
    }
}

/// `out(h) = sum_{a - b = h} f(a) g(b)` without normalization, i.e. the law of
/// `A - B` for independent `A ~ f`, `B ~ g`.
#[inline]
pub(crate) fn convolve_sub_into(
    group: &FiniteAbelianGroup,
    f: &[f64],
    g: &[f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    let neg = group.neg_table();
    for (b, &gb) in g.iter().enumerate() {
        let row = group.add_row(neg[b] as usize);
        for (a, &fa) in f.iter().enumerate() {
            out[row[a] as usize] += fa * gb;
        }
    }
}

/// `out(h) = p(h + w)`: the law of `X - w` when `X ~ p`.
#[inline]
pub(crate) fn shift_into(group: &FiniteAbelianGroup, p: &[f64], w: Element, out: &mut [f64]) {
    let row = group.add_row(w);
    for (h, slot) in out.iter_mut().enumerate() {
        *slot = p[row[h] as usize];
    }
}

#[inline]
pub(crate) fn argmax(p: &[f64]) -> Element {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}
