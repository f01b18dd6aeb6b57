//! Iterative sliding-window decoding over the normal graph of the
//! superposition code.
//!
//! Every layer `s` has one `=` node and one `+` node per parity position and
//! a single code node `C`. Edge `i` of the `+` node at `(s, j)` carries the
//! interleaved parity `V^(s-i)_{perm_i[j]}` (edge 0 is the layer's own
//! parity). Edges into a decided layer are dead: its contribution has been
//! removed from the channel evidence by cancelation, so the edge is skipped
//! in every update.

use std::fmt::Write as _;

use crate::codes::{CodeScratch, ComponentCode};
use crate::channel::likelihood_into;
use crate::encoder::PbmstEncoder;
use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup};
use crate::lattice::NestedLatticeCodebook;
use crate::message::{argmax, convolve_into, convolve_sub_into, normalize, shift_into};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CancelMode {
    /// Index shift by the decided parity symbol.
    Hard,
    /// Full group convolution with the decided parity message.
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoderConfig {
    /// Decoding delay `d`: the window spans layers `t..=t+d`.
    pub window: usize,
    pub max_iters: usize,
    pub epsilon: f64,
    pub cancel: CancelMode,
}

impl DecoderConfig {
    pub fn new(window: usize) -> Self {
        DecoderConfig {
            window,
            max_iters: 18,
            epsilon: 1e-4,
            cancel: CancelMode::Hard,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stopping threshold {} must be positive",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// One iteration of the window targeting `layer`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub layer: usize,
    pub iteration: usize,
    pub entropy: f64,
    pub symbol_errors: Option<usize>,
}

impl TraceRecord {
    pub fn to_line(&self) -> String {
        let mut s = format!("layer={} iter={} h={:.9}", self.layer, self.iteration, self.entropy);
        if let Some(e) = self.symbol_errors {
            let _ = write!(s, " errors={e}");
        }
        s
    }
}

#[derive(Clone, Debug, Default)]
pub struct Decoded {
    /// Decided information symbols of the `L` data blocks.
    pub info: Vec<Vec<Element>>,
    /// Iterations spent on each data block.
    pub iterations: Vec<usize>,
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone, Debug)]
pub struct WindowDecoder {
    code: ComponentCode,
    codebook: NestedLatticeCodebook,
    prior: Vec<f64>,
    /// `perms[i]` is `Pi_i`; `perms[0]` is the identity.
    perms: Vec<Vec<usize>>,
    inverses: Vec<Vec<usize>>,
    data_blocks: usize,
    config: DecoderConfig,
}

impl WindowDecoder {
    /// `prior` is the source distribution over codebook elements; it scales
    /// the channel evidence of every information symbol.
    pub fn new(
        encoder: &PbmstEncoder,
        codebook: &NestedLatticeCodebook,
        prior: &[f64],
        data_blocks: usize,
        config: DecoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        let q = codebook.order();
        if encoder.code().group().order() != q {
            return Err(Error::GroupMismatch {
                expected: q,
                found: encoder.code().group().order(),
            });
        }
        if prior.len() != q {
            return Err(Error::LengthMismatch {
                context: "source prior",
                expected: q,
                found: prior.len(),
            });
        }
        if data_blocks == 0 {
            return Err(Error::InvalidParameter("no data blocks to decode".into()));
        }
        let p = encoder.code().spec().parity_len();
        let identity: Vec<usize> = (0..p).collect();
        let mut perms = vec![identity.clone()];
        let mut inverses = vec![identity];
        for pi in encoder.interleavers() {
            perms.push(pi.permutation().to_vec());
            inverses.push(pi.inverse().to_vec());
        }
        Ok(WindowDecoder {
            code: encoder.code().clone(),
            codebook: codebook.clone(),
            prior: prior.to_vec(),
            perms,
            inverses,
            data_blocks,
            config,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn memory(&self) -> usize {
        self.perms.len() - 1
    }

    pub fn decode(&self, received: &[Vec<f64>], noise_var: f64) -> Result<Decoded> {
        self.run(received, noise_var, false, None)
    }

    /// Decodes while recording one [`TraceRecord`] per iteration; symbol
    /// errors are counted when the transmitted information blocks are given.
    pub fn decode_traced(&self, received: &[Vec<f64>], noise_var: f64, truth: Option<&[Vec<Element>]>) -> Result<Decoded> {
        self.run(received, noise_var, true, truth)
    }

    fn run(&self, received: &[Vec<f64>], noise_var: f64, tracing: bool, truth: Option<&[Vec<Element>]>) -> Result<Decoded> {
        let layers = self.data_blocks + self.memory();
        if received.len() != layers {
            return Err(Error::LengthMismatch {
                context: "received blocks",
                expected: layers,
                found: received.len(),
            });
        }
        let want = self.code.spec().length() * self.codebook.dim();
        if let Some(bad) = received.iter().find(|y| y.len() != want) {
            return Err(Error::LengthMismatch {
                context: "received block",
                expected: want,
                found: bad.len(),
            });
        }
        if let Some(t) = truth {
            if t.len() < self.data_blocks {
                return Err(Error::LengthMismatch {
                    context: "reference blocks",
                    expected: self.data_blocks,
                    found: t.len(),
                });
            }
        }
        if !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be positive")));
        }
        let mut st = State::new(self, received, noise_var);
        let mut out = Decoded::default();
        let d = self.config.window;
        for t in 0..self.data_blocks {
            let end = (t + d).min(layers - 1);
            let mut h_prev = 0.0;
            let mut iters = 0;
            for it in 1..=self.config.max_iters {
                for s in t..=end {
                    st.process_layer(s, t, end);
                }
                for s in (t..=end).rev() {
                    st.process_layer(s, t, end);
                }
                let h = st.entropy_rate(t);
                iters = it;
                if tracing {
                    let symbol_errors = truth.map(|tr| {
                        st.decide(t).iter().zip(&tr[t]).filter(|(a, b)| a != b).count()
                    });
                    out.trace.push(TraceRecord {
                        layer: t,
                        iteration: it,
                        entropy: h,
                        symbol_errors,
                    });
                }
                let stop = (h - h_prev).abs() < self.config.epsilon;
                h_prev = h;
                if stop {
                    break;
                }
            }
            let u_hat = st.decide(t);
            let v_hat = self.code.encode(&u_hat)?;
            st.cancel(t, &v_hat);
            out.info.push(u_hat);
            out.iterations.push(iters);
        }
        Ok(out)
    }
}

/// Entropy-rate estimate of a received block from the code-side information
/// messages, the `+`-side parity messages and the channel likelihoods.
///
/// Likelihoods are passed normalized together with the log of their
/// normalizing constant, so `f(y | g) = exp(ln_z) * lik(g)`. Returned in bits
/// per symbol.
pub fn entropy_rate(
    code_info: &[f64],
    lik_info: &[f64],
    ln_z_info: &[f64],
    plus_parity: &[f64],
    lik_parity: &[f64],
    ln_z_parity: &[f64],
    q: usize,
) -> f64 {
    let part = |msg: &[f64], lik: &[f64], ln_z: &[f64]| -> f64 {
        let total: f64 = msg
            .chunks_exact(q)
            .zip(lik.chunks_exact(q))
            .zip(ln_z)
            .map(|((m, l), z)| m.iter().zip(l).map(|(a, b)| a * b).sum::<f64>().ln() + z)
            .sum();
        total / ln_z.len() as f64
    };
    -(part(code_info, lik_info, ln_z_info) + part(plus_parity, lik_parity, ln_z_parity)) / std::f64::consts::LN_2
}

/// Removes a decided parity symbol `w` from a parity evidence message:
/// `out(h) = sum_g v(g) p(h + g)`, i.e. the law of `P - V` for `V ~ v`.
/// With a point mass `v = delta_w` this is `out(h) = p(h + w)`.
pub fn cancel_soft(group: &FiniteAbelianGroup, p: &[f64], v: &[f64], out: &mut [f64]) {
    convolve_sub_into(group, p, v, out);
}

/// `out = law of A + B` (or `A - B` when `SUB`), unrolled for cyclic groups
/// of compile-time order `Q`.
#[inline(always)]
fn conv_q<const Q: usize, const SUB: bool>(cyclic: bool, group: &FiniteAbelianGroup, f: &[f64], g: &[f64], out: &mut [f64]) {
    if Q != 0 && cyclic {
        let f: &[f64; Q] = f.try_into().unwrap();
        let g: &[f64; Q] = g.try_into().unwrap();
        let out: &mut [f64; Q] = out.try_into().unwrap();
        *out = [0.0; Q];
        for a in 0..Q {
            for b in 0..Q {
                let h = if SUB { (a + Q - b) % Q } else { (a + b) % Q };
                out[h] += f[a] * g[b];
            }
        }
    } else if SUB {
        convolve_sub_into(group, f, g, out);
    } else {
        convolve_into(group, f, g, out);
    }
}

struct State<'a> {
    dec: &'a WindowDecoder,
    q: usize,
    p: usize,
    edges: usize,
    cyclic: bool,
    lik_u: Vec<f64>,
    lnz_u: Vec<f64>,
    ch_u: Vec<f64>,
    ch_p: Vec<f64>,
    lnz_p: Vec<f64>,
    to_plus: Vec<f64>,
    from_plus: Vec<f64>,
    to_c: Vec<f64>,
    ext_u: Vec<f64>,
    ext_v: Vec<f64>,
    code_scratch: CodeScratch,
    work: Vec<f64>,
    offsets: Vec<usize>,
}

impl<'a> State<'a> {
    fn new(dec: &'a WindowDecoder, received: &[Vec<f64>], noise_var: f64) -> Self {
        let cb = &dec.codebook;
        let q = cb.order();
        let dim = cb.dim();
        let k = dec.code.spec().k();
        let p = dec.code.spec().parity_len();
        let edges = dec.perms.len();
        let layers = received.len();
        let uniform = 1.0 / q as f64;
        let terminal = cb.quantize(&vec![0.0; dim]);

        let mut lik_u = vec![0.0; layers * k * q];
        let mut lnz_u = vec![0.0; layers * k];
        let mut ch_u = vec![0.0; layers * k * q];
        let mut ch_p = vec![0.0; layers * p * q];
        let mut lnz_p = vec![0.0; layers * p];
        for (s, y) in received.iter().enumerate() {
            for j in 0..k {
                let at = (s * k + j) * q;
                let lik = &mut lik_u[at..at + q];
                lnz_u[s * k + j] = likelihood_into(cb, &y[j * dim..(j + 1) * dim], noise_var, lik);
                let ch = &mut ch_u[at..at + q];
                if s < dec.data_blocks {
                    for ((c, l), pr) in ch.iter_mut().zip(lik.iter()).zip(&dec.prior) {
                        *c = l * pr;
                    }
                    normalize(ch);
                } else {
                    // termination blocks carry the known quantization of 0
                    ch.fill(0.0);
                    ch[terminal] = 1.0;
                }
            }
            for j in 0..p {
                let at = (s * p + j) * q;
                let yy = &y[(k + j) * dim..(k + j + 1) * dim];
                lnz_p[s * p + j] = likelihood_into(cb, yy, noise_var, &mut ch_p[at..at + q]);
            }
        }
        State {
            dec,
            q,
            p,
            edges,
            cyclic: dec.code.group().factors().len() == 1,
            lik_u,
            lnz_u,
            ch_u,
            ch_p,
            lnz_p,
            to_plus: vec![uniform; layers * edges * p * q],
            from_plus: vec![uniform; layers * edges * p * q],
            to_c: vec![uniform; layers * p * q],
            ext_u: vec![uniform; layers * k * q],
            ext_v: vec![uniform; layers * p * q],
            code_scratch: CodeScratch::default(),
            work: Vec::new(),
            offsets: Vec::new(),
        }
    }

    #[inline]
    fn edge(&self, s: usize, i: usize, j: usize) -> usize {
        ((s * self.edges + i) * self.p + j) * self.q
    }

    /// Schedule `+ -> Pi -> = -> C -> = -> Pi -> +` for layer `s` while block
    /// `t` is the target and `end` the last layer of the window.
    fn process_layer(&mut self, s: usize, t: usize, end: usize) {
        match self.q {
            3 => self.process_layer_q::<3>(s, t, end),
            5 => self.process_layer_q::<5>(s, t, end),
            9 => self.process_layer_q::<9>(s, t, end),
            _ => self.process_layer_q::<0>(s, t, end),
        }
    }

    /// `Q` fixes the alphabet size at compile time (0: taken from the codebook).
    fn process_layer_q<const Q: usize>(&mut self, s: usize, t: usize, end: usize) {
        self.plus_to_own_parity::<Q>(s, t);
        self.equal_and_code::<Q>(s, end);
        self.plus_to_earlier_parity::<Q>(s, t);
    }

    /// `+` node output on edge 0: law of `P - sum_i W_i` over live edges.
    fn plus_to_own_parity<const Q: usize>(&mut self, s: usize, t: usize) {
        let (q, p, edges) = (if Q == 0 { self.q } else { Q }, self.p, self.edges);
        let group = self.dec.code.group();
        let cyclic = self.cyclic;
        self.work.resize(2 * q, 0.0);
        let (acc, tmp) = self.work.split_at_mut(q);
        for j in 0..p {
            let ch = (s * p + j) * q;
            acc.copy_from_slice(&self.ch_p[ch..ch + q]);
            for i in 1..edges {
                if s < t + i {
                    break;
                }
                let e = ((s * edges + i) * p + j) * q;
                conv_q::<Q, true>(cyclic, group, acc, &self.to_plus[e..e + q], tmp);
                acc.copy_from_slice(tmp);
            }
            normalize(acc);
            let e = (s * edges * p + j) * q;
            self.from_plus[e..e + q].copy_from_slice(acc);
        }
    }

    /// `=` nodes to `C`, the code node, then `=` nodes back out to every
    /// `+` node inside the window.
    fn equal_and_code<const Q: usize>(&mut self, s: usize, end: usize) {
        let (q, p, edges) = (if Q == 0 { self.q } else { Q }, self.p, self.edges);
        let k = self.dec.code.spec().k();
        let live = edges.min(end - s + 1);
        // offsets[j * live + i]: edge i of the `+` node fed by V^(s)_j
        self.offsets.clear();
        for j in 0..p {
            for (i, inv_i) in self.dec.inverses.iter().enumerate().take(live) {
                self.offsets.push((((s + i) * edges + i) * p + inv_i[j]) * q);
            }
        }
        for (j, offs) in self.offsets.chunks_exact(live).enumerate() {
            let out = &mut self.to_c[(s * p + j) * q..(s * p + j + 1) * q];
            out.copy_from_slice(&self.from_plus[offs[0]..offs[0] + q]);
            for &e in &offs[1..] {
                let f = &self.from_plus[e..e + q];
                for x in 0..q {
                    out[x] *= f[x];
                }
            }
            normalize(out);
        }

        let (ui, pi) = ((s * k) * q, (s * p) * q);
        self.dec.code.map_decode_flat(
            &self.ch_u[ui..ui + k * q],
            &self.to_c[pi..pi + p * q],
            &mut self.ext_u[ui..ui + k * q],
            &mut self.ext_v[pi..pi + p * q],
            &mut self.code_scratch,
            None,
        );

        // suffix[i] = f_i * .. * f_{live-1}; the running prefix starts at ext_v
        self.work.resize((live + 2) * q, 0.0);
        let (prefix, suffix) = self.work.split_at_mut(q);
        for (j, offs) in self.offsets.chunks_exact(live).enumerate() {
            suffix[live * q..(live + 1) * q].fill(1.0);
            for i in (0..live).rev() {
                let f = &self.from_plus[offs[i]..offs[i] + q];
                let (head, tail) = suffix.split_at_mut((i + 1) * q);
                let (h, t) = (&mut head[i * q..(i + 1) * q], &tail[..q]);
                for x in 0..q {
                    h[x] = f[x] * t[x];
                }
            }
            let ev = (s * p + j) * q;
            prefix.copy_from_slice(&self.ext_v[ev..ev + q]);
            for (i, &e) in offs.iter().enumerate() {
                let sf = &suffix[(i + 1) * q..(i + 2) * q];
                let out = &mut self.to_plus[e..e + q];
                for x in 0..q {
                    out[x] = prefix[x] * sf[x];
                }
                normalize(out);
                let f = &self.from_plus[e..e + q];
                for x in 0..q {
                    prefix[x] *= f[x];
                }
            }
        }
    }

    /// `+` node outputs on the live edges `i >= 1`, by forward-backward over
    /// the live incoming parity messages.
    fn plus_to_earlier_parity<const Q: usize>(&mut self, s: usize, t: usize) {
        let (q, p, edges) = (if Q == 0 { self.q } else { Q }, self.p, self.edges);
        // live edges are 0..=r
        let r = (1..edges).take_while(|&i| s >= t + i).count();
        if r == 0 {
            return;
        }
        let group = self.dec.code.group();
        let cyclic = self.cyclic;
        // fwd[x] = law of P - a_0 - .. - a_{x-1}; bwd[x] = law of a_x + .. + a_r
        self.work.resize(2 * (r + 1) * q, 0.0);
        let (fwd, bwd) = self.work.split_at_mut((r + 1) * q);
        for j in 0..p {
            let ch = (s * p + j) * q;
            fwd[..q].copy_from_slice(&self.ch_p[ch..ch + q]);
            for x in 0..r {
                let e = ((s * edges + x) * p + j) * q;
                let (done, rest) = fwd.split_at_mut((x + 1) * q);
                conv_q::<Q, true>(cyclic, group, &done[x * q..], &self.to_plus[e..e + q], &mut rest[..q]);
            }
            let e = ((s * edges + r) * p + j) * q;
            bwd[r * q..(r + 1) * q].copy_from_slice(&self.to_plus[e..e + q]);
            for x in (2..r).rev() {
                let e = ((s * edges + x) * p + j) * q;
                let (head, tail) = bwd.split_at_mut((x + 1) * q);
                conv_q::<Q, false>(cyclic, group, &self.to_plus[e..e + q], &tail[..q], &mut head[x * q..]);
            }
            for x in 1..=r {
                let e = ((s * edges + x) * p + j) * q;
                let out = &mut self.from_plus[e..e + q];
                if x == r {
                    out.copy_from_slice(&fwd[r * q..(r + 1) * q]);
                } else {
                    conv_q::<Q, true>(cyclic, group, &fwd[x * q..(x + 1) * q], &bwd[(x + 1) * q..(x + 2) * q], out);
                }
                normalize(out);
            }
        }
    }

    /// All earlier layers are decided when `t` is the target, so the `+` node
    /// output towards the channel is the edge-0 message alone.
    fn entropy_rate(&self, t: usize) -> f64 {
        let (q, p) = (self.q, self.p);
        let k = self.dec.code.spec().k();
        let plus: Vec<f64> = (0..p)
            .flat_map(|j| {
                let e = self.edge(t, 0, j);
                self.to_plus[e..e + q].iter().copied()
            })
            .collect();
        entropy_rate(
            &self.ext_u[t * k * q..(t + 1) * k * q],
            &self.lik_u[t * k * q..(t + 1) * k * q],
            &self.lnz_u[t * k..(t + 1) * k],
            &plus,
            &self.ch_p[t * p * q..(t + 1) * p * q],
            &self.lnz_p[t * p..(t + 1) * p],
            q,
        )
    }

    fn decide(&mut self, t: usize) -> Vec<Element> {
        let q = self.q;
        let k = self.dec.code.spec().k();
        self.work.resize(q, 0.0);
        (0..k)
            .map(|j| {
                let at = (t * k + j) * q;
                for ((w, a), b) in self.work.iter_mut().zip(&self.ch_u[at..at + q]).zip(&self.ext_u[at..at + q]) {
                    *w = a * b;
                }
                argmax(&self.work[..q])
            })
            .collect()
    }

    fn cancel(&mut self, t: usize, v_hat: &[Element]) {
        let (q, p) = (self.q, self.p);
        let layers = self.lnz_p.len() / p;
        let group = self.dec.code.group();
        self.work.resize(2 * q, 0.0);
        let (tmp, point) = self.work.split_at_mut(q);
        for i in 1..self.edges {
            let s = t + i;
            if s >= layers {
                break;
            }
            for j in 0..p {
                let w = v_hat[self.dec.perms[i][j]];
                let at = (s * p + j) * q;
                match self.dec.config.cancel {
                    CancelMode::Hard => shift_into(group, &self.ch_p[at..at + q], w, tmp),
                    CancelMode::Soft => {
                        point.fill(0.0);
                        point[w] = 1.0;
                        cancel_soft(group, &self.ch_p[at..at + q], point, tmp);
                    }
                }
                self.ch_p[at..at + q].copy_from_slice(tmp);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::codes::CodeSpec;
    use crate::encoder::Interleaver;
    use crate::group::FiniteAbelianGroup;
    use crate::message::Message;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_and_hard_cancel_agree_on_point_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for grp in [FiniteAbelianGroup::cyclic(3).unwrap(), FiniteAbelianGroup::cyclic(5).unwrap(), FiniteAbelianGroup::product_z3z3()] {
            let q = grp.order();
            for _ in 0..50 {
                let prob: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
                let pm = Message::from_weights(prob).unwrap();
                let w = rng.random_range(0..q);
                let mut hard = vec![0.0; q];
                let mut soft = vec![0.0; q];
                shift_into(&grp, pm.probs(), w, &mut hard);
                cancel_soft(&grp, pm.probs(), Message::point_mass(q, w).probs(), &mut soft);
                for (a, b) in hard.iter().zip(&soft) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cancel_shift_examples() {
        let z5 = FiniteAbelianGroup::cyclic(5).unwrap();
        let p = [0.1, 0.2, 0.3, 0.15, 0.25];
        let mut out = [0.0; 5];
        shift_into(&z5, &p, 0, &mut out);
        assert_eq!(out, p);
        // point mass at 3, decided contribution 1 leaves residual 3 - 1 = 2
        shift_into(&z5, &[0.0, 0.0, 0.0, 1.0, 0.0], 1, &mut out);
        assert_eq!(out, [0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn entropy_fixture() {
        // q = 3, k = 2, one parity symbol
        let code_info = [0.5, 0.3, 0.2, 0.1, 0.1, 0.8];
        let lik_info = [0.6, 0.3, 0.1, 0.2, 0.2, 0.6];
        let lnz_info = [-0.7, -1.1];
        let plus = [0.25, 0.25, 0.5];
        let lik_par = [0.1, 0.7, 0.2];
        let lnz_par = [-0.4];
        let h = entropy_rate(&code_info, &lik_info, &lnz_info, &plus, &lik_par, &lnz_par, 3);
        let y0 = (0.5 * 0.6 + 0.3 * 0.3 + 0.2 * 0.1) * (-0.7f64).exp();
        let y1 = (0.1 * 0.2 + 0.1 * 0.2 + 0.8 * 0.6) * (-1.1f64).exp();
        let y2 = (0.25 * 0.1 + 0.25 * 0.7 + 0.5 * 0.2) * (-0.4f64).exp();
        let want = -(0.5 * (y0.log2() + y1.log2()) + y2.log2());
        assert!((h - want).abs() < 1e-12, "{h} vs {want}");
    }

    fn setup(
        q: usize,
        spec: CodeSpec,
        m: usize,
        seed: u64,
    ) -> (NestedLatticeCodebook, PbmstEncoder, Vec<f64>) {
        let cb = match q {
            3 => NestedLatticeCodebook::integer(3, 1.22).unwrap(),
            5 => NestedLatticeCodebook::integer(5, 0.83).unwrap(),
            _ => NestedLatticeCodebook::hexagonal(2.26, [-0.15, -0.087]).unwrap(),
        };
        let code = ComponentCode::new(spec, cb.group().clone());
        let enc = PbmstEncoder::new(code, Interleaver::family(spec.parity_len(), m, seed)).unwrap();
        let prior = cb
            .symbol_probabilities(&crate::source::SourceModel::memoryless(seed), 200_000, seed)
            .unwrap();
        (cb, enc, prior)
    }

    #[test]
    fn memoryless_window_equals_component_map() {
        let spec = CodeSpec::single_parity_check(3, 2).unwrap();
        let (cb, enc, prior) = setup(3, spec, 0, 1);
        let cfg = ChannelConfig::new(1.0, 0.8, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks: Vec<Vec<usize>> = (0..4).map(|_| (0..spec.k()).map(|_| rng.random_range(0..3)).collect()).collect();
        let tx = enc.encode_symbols(&cb, &blocks).unwrap();
        let y = cfg.transmit(&cb, &tx, 0);
        let dec = WindowDecoder::new(&enc, &cb, &prior, 4, DecoderConfig::new(0)).unwrap();
        let out = dec.decode(&y, cfg.noise_var).unwrap();
        for (t, yt) in y.iter().enumerate() {
            let lik: Vec<Message> = yt.iter().map(|v| cfg.likelihoods(&cb, &[*v]).unwrap()).collect();
            let info: Vec<Message> = lik[..spec.k()]
                .iter()
                .map(|l| Message::from_weights(l.probs().iter().zip(&prior).map(|(a, b)| a * b).collect()).unwrap())
                .collect();
            let ext = enc.code().map_decode(&info, &lik[spec.k()..]).unwrap();
            let want: Vec<usize> = info
                .iter()
                .zip(&ext.info)
                .map(|(a, b)| argmax(&a.probs().iter().zip(b.probs()).map(|(x, y)| x * y).collect::<Vec<_>>()))
                .collect();
            assert_eq!(out.info[t], want);
        }
    }

    #[test]
    fn noiseless_recovery() {
        for m in [0, 1, 2, 4] {
            let spec = CodeSpec::repetition(2, 50).unwrap();
            let (cb, enc, prior) = setup(3, spec, m, 10 + m as u64);
            let src = crate::source::SourceModel::memoryless(m as u64);
            let blocks: Vec<Vec<f64>> = (0..20).map(|t| src.draw_block(50, t).unwrap()).collect();
            let tx = enc.encode_stream(&cb, &blocks).unwrap();
            let cfg = ChannelConfig::new(100.0, 1.0, 1).unwrap();
            let y = cfg.transmit(&cb, &tx, 0);
            let dec = WindowDecoder::new(&enc, &cb, &prior, 20, DecoderConfig::new(2 * m)).unwrap();
            let out = dec.decode(&y, cfg.noise_var).unwrap();
            for t in 0..20 {
                assert_eq!(out.info[t], tx[t].info, "m={m} block {t}");
            }
        }
    }

    #[test]
    fn uniform_evidence_returns_prior_argmax() {
        let spec = CodeSpec::repetition(2, 10).unwrap();
        let (cb, enc, prior) = setup(3, spec, 2, 4);
        // huge noise: every likelihood is flat to machine precision
        let y = vec![vec![0.0; 20]; 5];
        let dec = WindowDecoder::new(&enc, &cb, &prior, 3, DecoderConfig::new(4)).unwrap();
        let out = dec.decode(&y, 1e300).unwrap();
        let best = argmax(&prior);
        assert!(out.info.iter().flatten().all(|&g| g == best));
    }

    #[test]
    fn zero_iterations_fall_back_to_systematic_symbols() {
        let spec = CodeSpec::repetition(2, 40).unwrap();
        let (cb, enc, prior) = setup(5, spec, 3, 5);
        let src = crate::source::SourceModel::memoryless(8);
        let blocks: Vec<Vec<f64>> = (0..6).map(|t| src.draw_block(40, t).unwrap()).collect();
        let tx = enc.encode_stream(&cb, &blocks).unwrap();
        let cfg = ChannelConfig::new(8.0, 1.0, 2).unwrap();
        let y = cfg.transmit(&cb, &tx, 0);
        let mut c = DecoderConfig::new(6);
        c.max_iters = 0;
        let out = WindowDecoder::new(&enc, &cb, &prior, 6, c).unwrap().decode(&y, cfg.noise_var).unwrap();
        for t in 0..6 {
            for j in 0..40 {
                let l = cfg.likelihoods(&cb, &y[t][j..j + 1]).unwrap();
                let post: Vec<f64> = l.probs().iter().zip(&prior).map(|(a, b)| a * b).collect();
                assert_eq!(out.info[t][j], argmax(&post));
            }
        }
        assert!(out.iterations.iter().all(|&i| i == 0));
    }

    #[test]
    fn soft_cancel_decodes_like_hard() {
        let spec = CodeSpec::repetition(2, 30).unwrap();
        let (cb, enc, prior) = setup(9, spec, 2, 7);
        let src = crate::source::SourceModel::memoryless(1);
        let blocks: Vec<Vec<f64>> = (0..8).map(|t| src.draw_block(60, t).unwrap()).collect();
        let tx = enc.encode_stream(&cb, &blocks).unwrap();
        let cfg = ChannelConfig::new(4.0, 1.5, 3).unwrap();
        let y = cfg.transmit(&cb, &tx, 0);
        let hard = WindowDecoder::new(&enc, &cb, &prior, 8, DecoderConfig::new(4)).unwrap().decode(&y, cfg.noise_var).unwrap();
        let mut c = DecoderConfig::new(4);
        c.cancel = CancelMode::Soft;
        let soft = WindowDecoder::new(&enc, &cb, &prior, 8, c).unwrap().decode(&y, cfg.noise_var).unwrap();
        assert_eq!(hard.info, soft.info);
        assert_eq!(hard.iterations, soft.iterations);
    }

    #[test]
    fn trace_records_iterations() {
        let spec = CodeSpec::repetition(2, 20).unwrap();
        let (cb, enc, prior) = setup(3, spec, 1, 2);
        let src = crate::source::SourceModel::memoryless(0);
        let blocks: Vec<Vec<f64>> = (0..3).map(|t| src.draw_block(20, t).unwrap()).collect();
        let tx = enc.encode_stream(&cb, &blocks).unwrap();
        let cfg = ChannelConfig::new(6.0, 0.8, 0).unwrap();
        let y = cfg.transmit(&cb, &tx, 0);
        let truth: Vec<Vec<usize>> = tx.iter().map(|b| b.info.clone()).collect();
        let dec = WindowDecoder::new(&enc, &cb, &prior, 3, DecoderConfig::new(2)).unwrap();
        let out = dec.decode_traced(&y, cfg.noise_var, Some(&truth)).unwrap();
        assert_eq!(out.trace.len(), out.iterations.iter().sum::<usize>());
        assert!(out.trace.iter().all(|r| r.entropy.is_finite() && r.symbol_errors.is_some()));
        assert!(out.trace[0].to_line().starts_with("layer=0 iter=1 h="));
        // identical beliefs on consecutive iterations end the window
        let last = out.trace.iter().filter(|r| r.layer == 0).collect::<Vec<_>>();
        if last.len() < 18 {
            let n = last.len();
            assert!((last[n - 1].entropy - last[n - 2].entropy).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_mismatched_input() {
        let spec = CodeSpec::repetition(2, 10).unwrap();
        let (cb, enc, prior) = setup(3, spec, 2, 4);
        let dec = WindowDecoder::new(&enc, &cb, &prior, 3, DecoderConfig::new(4)).unwrap();
        assert!(dec.decode(&vec![vec![0.0; 20]; 4], 1.0).is_err());
        assert!(dec.decode(&vec![vec![0.0; 19]; 5], 1.0).is_err());
        assert!(WindowDecoder::new(&enc, &cb, &prior[..2], 3, DecoderConfig::new(4)).is_err());
        let mut c = DecoderConfig::new(1);
        c.epsilon = 0.0;
        assert!(WindowDecoder::new(&enc, &cb, &prior, 3, c).is_err());
    }
}
