//! Distortion accounting and reference SNR limits on the real AWGN channel,
//! where one channel use carries `C = 0.5 log2(1 + SNR)` bits.

use crate::error::{Error, Result};

/// Reported SDR when the distortion is zero.
pub const SDR_CAP_DB: f64 = 300.0;

/// Mean squared error per sample.
pub fn distortion(s: &[f64], s_hat: &[f64]) -> Result<f64> {
    if s.len() != s_hat.len() {
        return Err(Error::LengthMismatch {
            context: "distortion",
            expected: s.len(),
            found: s_hat.len(),
        });
    }
    if s.is_empty() {
        return Err(Error::InvalidParameter("distortion of an empty sequence".into()));
    }
    Ok(s.iter().zip(s_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / s.len() as f64)
}

/// `10 log10(1 / D)`, capped at [`SDR_CAP_DB`].
pub fn sdr_db(d: f64) -> f64 {
    if d <= 0.0 {
        return SDR_CAP_DB;
    }
    (-10.0 * d.log10()).min(SDR_CAP_DB)
}

fn snr_db_for_rate(bits_per_use: f64) -> f64 {
    if bits_per_use <= 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (2f64.powf(2.0 * bits_per_use) - 1.0).log10()
}

/// Smallest SNR at which `entropy_bits` per `dim`-dimensional symbol fit
/// into the channel at `source_to_channel` (`R_s / R_c`) samples per use.
pub fn constrained_limit_db(entropy_bits: f64, dim: usize, source_to_channel: f64) -> f64 {
    snr_db_for_rate(entropy_bits / dim as f64 * source_to_channel)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Opta {
    /// `R(D)` in bits per source sample.
    pub rate_bits: f64,
    /// `-inf` when `D = 1` (no coding needed).
    pub snr_db: f64,
}

/// Gaussian rate-distortion bound for unit-variance sources at `bandwidth`
/// (`R_c / R_s`) channel uses per sample.
pub fn opta(d: f64, bandwidth: f64) -> Result<Opta> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::InvalidParameter(format!("distortion {d} outside (0, 1]")));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth ratio {bandwidth} must be positive")));
    }
    let rate_bits = 0.5 * (1.0 / d).log2();
    Ok(Opta {
        rate_bits,
        snr_db: snr_db_for_rate(rate_bits / bandwidth),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitReport {
    pub entropy_bits: f64,
    pub dim: usize,
    pub distortion: f64,
    /// `R_c / R_s`.
    pub bandwidth: f64,
    pub rate_per_use: f64,
    pub constrained_snr_db: f64,
    pub opta_rate_bits: f64,
    pub opta_snr_db: f64,
}

impl LimitReport {
    pub fn new(entropy_bits: f64, dim: usize, distortion: f64, bandwidth: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let o = opta(distortion, bandwidth)?;
        Ok(LimitReport {
            entropy_bits,
            dim,
            distortion,
            bandwidth,
            rate_per_use: entropy_bits / dim as f64 / bandwidth,
            constrained_snr_db: constrained_limit_db(entropy_bits, dim, 1.0 / bandwidth),
            opta_rate_bits: o.rate_bits,
            opta_snr_db: o.snr_db,
        })
    }

    /// `key = value` lines.
    pub fn to_kv(&self) -> String {
        let opta_snr = if self.opta_snr_db == f64::NEG_INFINITY {
            "-inf (no coding needed)".to_string()
        } else {
            self.opta_snr_db.to_string()
        };
        format!(
            "quantizer_entropy_bits = {}\ndimension = {}\nquantizer_distortion = {}\nbandwidth_ratio = {}\n\
             rate_per_channel_use = {}\nconstrained_snr_db = {}\nopta_rate_bits = {}\nopta_snr_db = {}\n",
            self.entropy_bits,
            self.dim,
            self.distortion,
            self.bandwidth,
            self.rate_per_use,
            self.constrained_snr_db,
            self.opta_rate_bits,
            opta_snr,
        )
    }
}
