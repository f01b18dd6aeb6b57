//! Nested lattice codebooks `Lambda / r*Lambda` in one and two dimensions.
//!
//! A codebook holds one representative per coset of the sublattice. The
//! representatives are the lattice points in the Voronoi cell of the
//! sublattice at the origin; the scaled and shifted codebook is
//! `alpha * (G + v)`, i.e. the shaping region moves with the shift. The
//! same points serve as quantizer reproduction levels and as the channel
//! constellation.
//!
//! Boundary points of the Voronoi cell (which occur for `A2/3A2`) are
//! resolved by taking the lexicographically largest candidate, which gives
//! the representative set `{0, +-g1, +-g2, +-(g1-g2), g1+g2, 2g1-g2}`.

use std::fmt::Write as _;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup};
use crate::rng::{stream_rng, Stream};
use crate::source::SourceModel;

const TIE_TOL: f64 = 1e-9;

/// Display letters for `A2/3A2`, indexed by canonical element index `3*c1 + c2`.
const A2_LETTERS: [&str; 9] = ["o", "c", "f", "b", "g", "a", "e", "d", "h"];

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    dim: usize,
    basis: Vec<Vec<f64>>,
    ratio: usize,
    hexagonal: bool,
}

impl LatticeSpec {
    /// `Z / qZ`.
    pub fn integer(q: usize) -> Result<Self> {
        Self::new(vec![vec![1.0]], q)
    }

    /// The hexagonal lattice `A2` nested with `3*A2`.
    pub fn hexagonal_a2() -> Self {
        let h = 3f64.sqrt() / 6.0;
        let mut spec = Self::new(vec![vec![0.5, h], vec![0.5, -h]], 3).expect("A2 basis is valid");
        spec.hexagonal = true;
        spec
    }

    pub fn new(basis: Vec<Vec<f64>>, ratio: usize) -> Result<Self> {
        let dim = basis.len();
        if !(1..=2).contains(&dim) || basis.iter().any(|b| b.len() != dim) {
            return Err(Error::InvalidLattice(format!(
                "only 1- and 2-dimensional square bases are supported, got {dim} vectors"
            )));
        }
        if basis.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidLattice("non-finite basis entry".into()));
        }
        let det = if dim == 1 {
            basis[0][0]
        } else {
            basis[0][0] * basis[1][1] - basis[0][1] * basis[1][0]
        };
        if det.abs() < 1e-12 {
            return Err(Error::InvalidLattice("basis vectors are linearly dependent".into()));
        }
        if ratio < 2 || ratio.checked_pow(dim as u32).is_none_or(|q| q > 256) {
            return Err(Error::InvalidLattice(format!(
                "unsupported nesting ratio {ratio} in dimension {dim}"
            )));
        }
        Ok(LatticeSpec {
            dim,
            basis,
            ratio,
            hexagonal: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn order(&self) -> usize {
        self.ratio.pow(self.dim as u32)
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn group(&self) -> FiniteAbelianGroup {
        FiniteAbelianGroup::direct_product(&vec![self.ratio; self.dim])
            .expect("validated at construction")
    }

    /// Short name used in codebook files, e.g. `Z/3Z` or `A2/3A2`.
    pub fn name(&self) -> String {
        if self.hexagonal {
            "A2/3A2".to_string()
        } else if self.dim == 1 && self.basis[0][0] == 1.0 {
            format!("Z/{}Z", self.ratio)
        } else {
            format!("custom{}d/{}", self.dim, self.ratio)
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        match lower.as_str() {
            "a2/3a2" | "a2" | "hex" => Ok(Self::hexagonal_a2()),
            _ => {
                let q = lower
                    .strip_prefix("z/")
                    .and_then(|s| s.strip_suffix('z'))
                    .or_else(|| lower.strip_prefix('z'))
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse(format!("unknown lattice '{name}'")))?;
                Self::integer(q)
            }
        }
    }

    fn point_of(&self, coeffs: &[i64]) -> Vec<f64> {
        (0..self.dim)
            .map(|d| {
                coeffs
                    .iter()
                    .zip(&self.basis)
                    .map(|(&c, b)| c as f64 * b[d])
                    .sum()
            })
            .collect()
    }

    /// Coset representatives in the sublattice's Voronoi cell, indexed by
    /// group element, together with their integer coefficients.
    fn representatives(&self) -> Vec<(Vec<i64>, Vec<f64>)> {
        let group = self.group();
        let r = self.ratio as i64;
        let span: Vec<i64> = (-3..=3).collect();
        (0..group.order())
            .map(|g| {
                let coset: Vec<i64> = group.coordinates(g).iter().map(|&c| c as i64).collect();
                let mut best: Option<(f64, Vec<i64>, Vec<f64>)> = None;
                let mut shifts = vec![vec![]];
                for _ in 0..self.dim {
                    shifts = shifts
                        .into_iter()
                        .flat_map(|p: Vec<i64>| {
                            span.iter().map(move |&k| {
                                let mut p = p.clone();
                                p.push(k);
                                p
                            })
                        })
                        .collect();
                }
                for k in shifts {
                    let coeffs: Vec<i64> = coset.iter().zip(&k).map(|(c, k)| c + r * k).collect();
                    let x = self.point_of(&coeffs);
                    let norm: f64 = x.iter().map(|v| v * v).sum();
                    let better = match &best {
                        None => true,
                        Some((bn, _, bx)) => {
                            norm < bn - TIE_TOL
                                || ((norm - bn).abs() <= TIE_TOL && lex_greater(&x, bx))
                        }
                    };
                    if better {
                        best = Some((norm, coeffs, x));
                    }
                }
                let (_, coeffs, x) = best.expect("search span is non-empty");
                (coeffs, x)
            })
            .collect()
    }
}

fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > TIE_TOL {
            return x > y;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestedLatticeCodebook {
    spec: LatticeSpec,
    group: FiniteAbelianGroup,
    alpha: f64,
    shift: Vec<f64>,
    /// Flattened `q x dim` coordinates.
    points: Vec<f64>,
    labels: Vec<String>,
}

impl NestedLatticeCodebook {
    pub fn build(spec: &LatticeSpec, alpha: f64, shift: &[f64]) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive and finite, got {alpha}"
            )));
        }
        if shift.len() != spec.dim || shift.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shift must be a finite {}-vector",
                spec.dim
            )));
        }
        let group = spec.group();
        let reps = spec.representatives();
        let mut points = Vec::with_capacity(reps.len() * spec.dim);
        let mut labels = Vec::with_capacity(reps.len());
        for (g, (coeffs, x)) in reps.iter().enumerate() {
            points.extend(x.iter().zip(shift).map(|(xi, vi)| alpha * (xi + vi)));
            labels.push(if spec.hexagonal {
                A2_LETTERS[g].to_string()
            } else if spec.dim == 1 {
                if coeffs[0] > 0 {
                    format!("+{}", coeffs[0])
                } else {
                    coeffs[0].to_string()
                }
            } else {
                format!("({},{})", coeffs[0], coeffs[1])
            });
        }
        Ok(NestedLatticeCodebook {
            spec: spec.clone(),
            group,
            alpha,
            shift: shift.to_vec(),
            points,
            labels,
        })
    }

    /// Unshifted `Z/qZ` codebook with scale `alpha`.
    pub fn integer(q: usize, alpha: f64) -> Result<Self> {
        Self::build(&LatticeSpec::integer(q)?, alpha, &[0.0])
    }

    pub fn hexagonal(alpha: f64, shift: [f64; 2]) -> Result<Self> {
        Self::build(&LatticeSpec::hexagonal_a2(), alpha, &shift)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn order(&self) -> usize {
        self.group.order()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn label(&self, g: Element) -> &str {
        &self.labels[g]
    }

    /// Representative point of element `g`.
    #[inline]
    pub fn point(&self, g: Element) -> &[f64] {
        &self.points[g * self.spec.dim..(g + 1) * self.spec.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn modulate(&self, g: Element) -> Result<Vec<f64>> {
        self.group.check_element(g)?;
        Ok(self.point(g).to_vec())
    }

    /// Nearest representative point; ties go to the lowest index.
    #[inline]
    pub fn quantize(&self, s: &[f64]) -> Element {
        debug_assert_eq!(s.len(), self.spec.dim);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (g, p) in self.points.chunks_exact(self.spec.dim).enumerate() {
            let d: f64 = p.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = g;
            }
        }
        best
    }

    /// Quantizes consecutive `dim`-sized chunks of `samples`.
    pub fn quantize_block(&self, samples: &[f64]) -> Result<Vec<Element>> {
        if !samples.len().is_multiple_of(self.spec.dim) {
            return Err(Error::LengthMismatch {
                context: "quantize_block",
                expected: samples.len().div_ceil(self.spec.dim) * self.spec.dim,
                found: samples.len(),
            });
        }
        Ok(samples
            .chunks_exact(self.spec.dim)
            .map(|s| self.quantize(s))
            .collect())
    }

    /// Reconstruction of a block of elements as flat coordinates.
    pub fn modulate_block(&self, elements: &[Element]) -> Vec<f64> {
        elements
            .iter()
            .flat_map(|&g| self.point(g).iter().copied())
            .collect()
    }

    /// Sorted cell boundaries of a one-dimensional codebook, as
    /// `(element, lower, upper)` with infinite outer edges.
    pub fn cells_1d(&self) -> Option<Vec<(Element, f64, f64)>> {
        if self.spec.dim != 1 {
            return None;
        }
        let mut order: Vec<Element> = (0..self.order()).collect();
        order.sort_by(|&a, &b| self.points[a].total_cmp(&self.points[b]));
        let mut cells = Vec::with_capacity(order.len());
        for (i, &g) in order.iter().enumerate() {
            let lo = if i == 0 {
                f64::NEG_INFINITY
            } else {
                0.5 * (self.points[order[i - 1]] + self.points[g])
            };
            let hi = if i + 1 == order.len() {
                f64::INFINITY
            } else {
                0.5 * (self.points[g] + self.points[order[i + 1]])
            };
            cells.push((g, lo, hi));
        }
        Some(cells)
    }

    /// Probability of each element's quantization cell under `source`.
    ///
    /// One-dimensional codebooks use the Gaussian CDF directly (every source
    /// model has standard normal marginals). Two-dimensional codebooks use a
    /// Monte-Carlo estimate over `n_samples` source vectors drawn from the
    /// `seed` stream.
    pub fn symbol_probabilities(
        &self,
        source: &SourceModel,
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        match self.cells_1d() {
            Some(cells) => {
                let mut p = vec![0.0; self.order()];
                for (g, lo, hi) in cells {
                    p[g] = std_normal_cdf(hi) - std_normal_cdf(lo);
                }
                Ok(p)
            }
            None => self.monte_carlo_probabilities(source, n_samples, seed),
        }
    }

    /// Monte-Carlo estimate of the cell probabilities, any dimension.
    pub fn monte_carlo_probabilities(
        &self,
        source: &SourceModel,
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be positive".into()));
        }
        let mut rng = stream_rng(seed, Stream::Probabilities, 0);
        let draws = source.draw_with(&mut rng, n_samples * self.spec.dim)?;
        let mut counts = vec![0u64; self.order()];
        for s in draws.chunks_exact(self.spec.dim) {
            counts[self.quantize(s)] += 1;
        }
        Ok(counts
            .into_iter()
            .map(|c| c as f64 / n_samples as f64)
            .collect())
    }

    /// Plain-text table: a key-value header followed by one line per element
    /// (`index label coordinates.. probability`).
    pub fn to_table(&self, probabilities: &[f64]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nested lattice codebook");
        let _ = writeln!(out, "lattice = {}", self.spec.name());
        let _ = writeln!(out, "dim = {}", self.spec.dim);
        let _ = writeln!(out, "order = {}", self.order());
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "shift = {}", join(&self.shift));
        let _ = writeln!(out, "# index label coordinates probability");
        for g in 0..self.order() {
            let p = probabilities.get(g).copied().unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{} {} {} {}",
                g,
                self.labels[g],
                join(self.point(g)),
                p
            );
        }
        out
    }

    /// Parses [`to_table`](Self::to_table) output, rebuilding the codebook
    /// from its header and checking the listed coordinates against it.
    pub fn from_table(text: &str) -> Result<(Self, Vec<f64>)> {
        let mut lattice = None;
        let mut alpha = None;
        let mut shift = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "lattice" => lattice = Some(LatticeSpec::from_name(v)?),
                    "alpha" => alpha = Some(parse_f64(v)?),
                    "shift" => {
                        shift = Some(
                            v.split_whitespace()
                                .map(parse_f64)
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    "dim" | "order" => {}
                    other => return Err(Error::Parse(format!("unknown codebook key '{other}'"))),
                }
            } else {
                rows.push(line.to_string());
            }
        }
        let spec = lattice.ok_or_else(|| Error::Parse("missing 'lattice'".into()))?;
        let alpha = alpha.ok_or_else(|| Error::Parse("missing 'alpha'".into()))?;
        let shift = shift.ok_or_else(|| Error::Parse("missing 'shift'".into()))?;
        let cb = Self::build(&spec, alpha, &shift)?;
        if rows.len() != cb.order() {
            return Err(Error::Parse(format!(
                "expected {} codebook rows, found {}",
                cb.order(),
                rows.len()
            )));
        }
        let mut probs = vec![0.0; cb.order()];
        for row in rows {
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != 3 + cb.dim() {
                return Err(Error::Parse(format!("malformed codebook row '{row}'")));
            }
            let g: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad index in '{row}'")))?;
            cb.group.check_element(g)?;
            for (d, field) in fields[2..2 + cb.dim()].iter().enumerate() {
                let x = parse_f64(field)?;
                if (x - cb.point(g)[d]).abs() > 1e-9 * (1.0 + x.abs()) {
                    return Err(Error::Parse(format!(
                        "coordinate mismatch for element {g}: file has {x}, lattice gives {}",
                        cb.point(g)[d]
                    )));
                }
            }
            probs[g] = parse_f64(fields[2 + cb.dim()])?;
        }
        Ok((cb, probs))
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: '{s}'")))
}
