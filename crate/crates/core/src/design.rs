//! Quantizer design: distortion/entropy evaluation, the scale search, and
//! the iterative scale/shift optimization for two-dimensional codebooks.
//!
//! All searches run on one fixed sample set (common random numbers), so the
//! objective is a deterministic function of the parameters.

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, NestedLatticeCodebook};
use crate::message::entropy_bits;
use crate::rng::{stream_rng, Stream};
use crate::source::SourceModel;

/// Distortion and entropy of a codebook on some source.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Mean squared error per source sample.
    pub distortion: f64,
    /// Bits per `dim`-dimensional symbol.
    pub entropy_bits: f64,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignResult {
    pub alpha: f64,
    pub shift: Vec<f64>,
    pub distortion: f64,
    pub entropy_bits: f64,
    pub probabilities: Vec<f64>,
    pub codebook: NestedLatticeCodebook,
}

/// Source draws grouped into `dim`-sized vectors.
#[derive(Clone, Debug)]
pub struct SampleSet {
    dim: usize,
    samples: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                context: "sample set",
                expected: dim.max(1),
                found: samples.len(),
            });
        }
        Ok(SampleSet { dim, samples })
    }

    pub fn draw(source: &SourceModel, dim: usize, n_vectors: usize, seed: u64, index: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, Stream::Design, index);
        Self::new(dim, source.draw_with(&mut rng, n_vectors * dim)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Evaluates `cb` on `n_samples` fresh source vectors from the `seed` stream.
pub fn evaluate(cb: &NestedLatticeCodebook, source: &SourceModel, n_samples: usize, seed: u64) -> Result<Evaluation> {
    let set = SampleSet::draw(source, cb.dim(), n_samples, seed, 0)?;
    evaluate_on(cb, &set)
}

/// Empirical distortion and symbol entropy on a fixed sample set.
pub fn evaluate_on(cb: &NestedLatticeCodebook, set: &SampleSet) -> Result<Evaluation> {
    if set.dim() != cb.dim() {
        return Err(Error::LengthMismatch {
            context: "evaluate_on dimension",
            expected: cb.dim(),
            found: set.dim(),
        });
    }
    let mut counts = vec![0u64; cb.order()];
    let mut err = 0.0;
    for s in set.samples().chunks_exact(cb.dim()) {
        let g = cb.quantize(s);
        counts[g] += 1;
        err += cb
            .point(g)
            .iter()
            .zip(s)
            .map(|(p, x)| (p - x) * (p - x))
            .sum::<f64>();
    }
    let n = set.len() as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(Evaluation {
        distortion: err / set.samples().len() as f64,
        entropy_bits: entropy_bits(&probabilities),
        probabilities,
    })
}

/// Bracket and tolerance for the golden-section search over the scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for ScaleSearch {
    fn default() -> Self {
        ScaleSearch {
            lo: 0.1,
            hi: 5.0,
            tol: 1e-3,
        }
    }
}

/// Golden-section minimization of distortion over the scale at a fixed
/// shift. Returns the best `(alpha, distortion)` seen.
pub fn scale_search(
    spec: &LatticeSpec,
    shift: &[f64],
    set: &SampleSet,
    search: ScaleSearch,
) -> Result<(f64, f64)> {
    if !(search.lo > 0.0 && search.lo <= search.hi && search.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid scale search {search:?}"
        )));
    }
    let objective = |alpha: f64| -> Result<f64> {
        let cb = NestedLatticeCodebook::build(spec, alpha, shift)?;
        let d = evaluate_on(&cb, set)?.distortion;
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::NonFiniteObjective(alpha))
        }
    };
    let (mut a, mut b) = (search.lo, search.hi);
    if b - a <= search.tol {
        let mid = 0.5 * (a + b);
        return Ok((mid, objective(mid)?));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while b - a > search.tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

/// Scale-only design of an unshifted `Z/qZ` quantizer.
///
/// Distortion is reported on the search sample set; probabilities and
/// entropy are the closed-form cell masses.
pub fn optimize_scale_1d(
    q: usize,
    source: &SourceModel,
    n_samples: usize,
    seed: u64,
    search: ScaleSearch,
) -> Result<DesignResult> {
    let spec = LatticeSpec::integer(q)?;
    let set = SampleSet::draw(source, 1, n_samples, seed, 0)?;
    let (alpha, _) = scale_search(&spec, &[0.0], &set, search)?;
    finalize(&spec, alpha, &[0.0], source, n_samples, seed)
}

/// Measures a design point on the `seed` stream, the same draws
/// [`evaluate`] uses.
pub fn finalize(
    spec: &LatticeSpec,
    alpha: f64,
    shift: &[f64],
    source: &SourceModel,
    n_samples: usize,
    seed: u64,
) -> Result<DesignResult> {
    let codebook = NestedLatticeCodebook::build(spec, alpha, shift)?;
    let set = SampleSet::draw(source, spec.dim(), n_samples, seed, 0)?;
    let eval = evaluate_on(&codebook, &set)?;
    let probabilities = if spec.dim() == 1 {
        codebook.symbol_probabilities(source, n_samples, seed)?
    } else {
        eval.probabilities
    };
    Ok(DesignResult {
        alpha,
        shift: shift.to_vec(),
        distortion: eval.distortion,
        entropy_bits: entropy_bits(&probabilities),
        probabilities,
        codebook,
    })
}

/// How an accepted shift direction updates the current shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftRule {
    /// `v <- v + delta * v'`.
    Accumulate,
    /// `v <- delta * v'`; candidates are probed around the origin.
    Replace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Design2dOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub search: ScaleSearch,
    pub rule: ShiftRule,
}

impl Default for Design2dOptions {
    fn default() -> Self {
        Design2dOptions {
            initial_step: 1.0,
            min_step: 1e-3,
            n_samples: 1_000_000,
            seed: 0,
            search: ScaleSearch::default(),
            rule: ShiftRule::Accumulate,
        }
    }
}

/// Outcome of the iterative design; `history` holds the search-set
/// distortion after the initial scaling and after every accepted shift.
#[derive(Clone, Debug)]
pub struct Design2dReport {
    pub result: DesignResult,
    pub history: Vec<f64>,
    pub accepted_shifts: usize,
}

/// Iterative scale/shift design of the `A2/3A2` quantizer.
pub fn optimize_2d(source: &SourceModel, options: &Design2dOptions) -> Result<Design2dReport> {
    let set = SampleSet::draw(source, 2, options.n_samples, options.seed, 0)?;
    let (alpha, shift, history, accepted) = optimize_2d_on(&set, options)?;
    let spec = LatticeSpec::hexagonal_a2();
    let result = finalize(&spec, alpha, &shift, source, options.n_samples, options.seed)?;
    Ok(Design2dReport {
        result,
        history,
        accepted_shifts: accepted,
    })
}

/// The iteration itself on a caller-supplied sample set. Returns
/// `(alpha, shift, history, accepted shifts)`.
pub fn optimize_2d_on(
    set: &SampleSet,
    options: &Design2dOptions,
) -> Result<(f64, Vec<f64>, Vec<f64>, usize)> {
    if !(options.initial_step > 0.0) || !(options.min_step > 0.0) {
        return Err(Error::InvalidParameter("shift steps must be positive".into()));
    }
    let spec = LatticeSpec::hexagonal_a2();
    let eval = |alpha: f64, v: &[f64]| -> Result<f64> {
        let cb = NestedLatticeCodebook::build(&spec, alpha, v)?;
        Ok(evaluate_on(&cb, set)?.distortion)
    };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let directions = [[h, h], [-h, h], [h, -h], [-h, -h]];

    let mut shift = vec![0.0, 0.0];
    let (mut alpha, mut dist) = scale_search(&spec, &shift, set, options.search)?;
    let mut history = vec![dist];
    let mut accepted = 0;
    let mut step = options.initial_step;
    loop {
        let base = match options.rule {
            ShiftRule::Accumulate => shift.clone(),
            ShiftRule::Replace => vec![0.0, 0.0],
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for dir in &directions {
            let cand = vec![base[0] + step * dir[0], base[1] + step * dir[1]];
            let d = eval(alpha, &cand)?;
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, cand));
            }
        }
        let (cand_d, cand_v) = best.expect("four directions");
        if cand_d < dist {
            shift = cand_v;
            dist = cand_d;
            let (a, d) = scale_search(&spec, &shift, set, options.search)?;
            if d < dist {
                alpha = a;
                dist = d;
            }
            history.push(dist);
            accepted += 1;
            continue;
        }
        step /= 2.0;
        if step < options.min_step {
            break;
        }
    }
    Ok((alpha, shift, history, accepted))
}
