//! Real AWGN channel carrying lattice points directly.
//!
//! Codebook points are sent without renormalization. The SNR is measured
//! against the power `P` per real dimension of an encoded pilot stream, so
//! `noise_var = P / 10^(snr_db / 10)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::encoder::{EncodedBlock, PbmstEncoder};
use crate::error::{Error, Result};
use crate::lattice::NestedLatticeCodebook;
use crate::message::Message;
use crate::rng::{stream_rng, Stream};
use crate::source::SourceModel;

/// Channel symbols per pilot stream used by [`calibrate_power`].
pub const PILOT_SYMBOLS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub noise_var: f64,
    pub power: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, power: f64, seed: u64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidParameter(format!("signal power {power} must be positive")));
        }
        if !snr_db.is_finite() {
            return Err(Error::InvalidParameter(format!("SNR {snr_db} dB is not finite")));
        }
        Ok(ChannelConfig {
            snr_db,
            noise_var: power / 10f64.powf(snr_db / 10.0),
            power,
            seed,
        })
    }

    /// Adds noise on the frame's own stream. The unit-variance draws depend
    /// only on `seed` and `frame`, not on the SNR.
    pub fn transmit(&self, cb: &NestedLatticeCodebook, blocks: &[EncodedBlock], frame: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(self.seed, Stream::Noise, frame);
        let sigma = self.noise_var.sqrt();
        blocks
            .iter()
            .map(|b| {
                let mut y = Vec::with_capacity((b.info.len() + b.parity.len()) * cb.dim());
                for g in b.symbols() {
                    for &c in cb.point(g) {
                        let z: f64 = rng.sample(StandardNormal);
                        y.push(c + sigma * z);
                    }
                }
                y
            })
            .collect()
    }

    /// Normalized `Pr{y | g}` over the codebook.
    pub fn likelihoods(&self, cb: &NestedLatticeCodebook, y: &[f64]) -> Result<Message> {
        if y.len() != cb.dim() {
            return Err(Error::LengthMismatch {
                context: "received symbol",
                expected: cb.dim(),
                found: y.len(),
            });
        }
        let mut out = vec![0.0; cb.order()];
        likelihood_into(cb, y, self.noise_var, &mut out);
        Ok(Message::from_normalized(out))
    }
}

/// Writes the normalized likelihoods of `y` into `out` and returns
/// `ln sum_g f(y | g)`, the log of the normalizing constant with the full
/// Gaussian density.
pub(crate) fn likelihood_into(cb: &NestedLatticeCodebook, y: &[f64], noise_var: f64, out: &mut [f64]) -> f64 {
    let dim = cb.dim();
    let mut max_e = f64::NEG_INFINITY;
    for (o, p) in out.iter_mut().zip(cb.points_flat().chunks_exact(dim)) {
        let d2: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        *o = -d2 / (2.0 * noise_var);
        max_e = max_e.max(*o);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max_e).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    max_e + total.ln() - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI * noise_var).ln()
}

/// Mean squared coordinate of the steady-state blocks `t in [m, L)` of a
/// pilot stream with at least [`PILOT_SYMBOLS`] channel symbols.
pub fn calibrate_power(cb: &NestedLatticeCodebook, encoder: &PbmstEncoder, source: &SourceModel, seed: u64) -> Result<f64> {
    let spec = encoder.code().spec();
    let m = encoder.memory();
    let steady = PILOT_SYMBOLS.div_ceil(spec.length()).max(1);
    let blocks = m + steady;
    let mut rng = stream_rng(seed, Stream::Pilot, 0);
    let mut src = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        src.push(source.draw_with(&mut rng, spec.k() * cb.dim())?);
    }
    let encoded = encoder.encode_stream(cb, &src)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for b in &encoded[m..blocks] {
        for g in b.symbols() {
            sum += cb.point(g).iter().map(|c| c * c).sum::<f64>();
            count += cb.dim();
        }
    }
    Ok(sum / count as f64)
}
