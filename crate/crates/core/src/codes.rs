//! Short systematic group codes used as the component code of the
//! superposition scheme.
//!
//! Symbol layouts (information `u`, parity `v`):
//!
//! * repetition `[n,1]^B`: `u[b]`, parity copy `c` of `u[b]` at `v[c*B + b]`;
//! * single parity check `[n,n-1]^B`: `u_i[b]` at `u[i*B + b]`,
//!   `v[b] = sum_i u_i[b]`;
//! * time sharing: the `B1` parity-check sub-blocks come first in both `u`
//!   and `v`, followed by the `B2` repetition sub-blocks.
//!
//! Decoding is exact symbol-wise MAP per sub-block and returns extrinsic
//! messages (the posterior with the position's own prior divided out).

use crate::error::{Error, Result};
use crate::group::{Element, FiniteAbelianGroup};
use crate::message::{convolve_into, convolve_sub_into, normalize, Message};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeKind {
    Repetition,
    SingleParityCheck,
    TimeSharing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeSpec {
    pub kind: CodeKind,
    /// Symbols per sub-block.
    pub n: usize,
    /// Parity-check sub-blocks (`B` for a pure SPC product, `B1` when time sharing).
    pub spc_blocks: usize,
    /// Repetition sub-blocks (`B` for a pure repetition product, `B2` when time sharing).
    pub rep_blocks: usize,
}

impl CodeSpec {
    /// `C_r[nB, B]`.
    pub fn repetition(n: usize, b: usize) -> Result<Self> {
        Self::validated(CodeKind::Repetition, n, 0, b)
    }

    /// `C_s[nB, (n-1)B]`.
    pub fn single_parity_check(n: usize, b: usize) -> Result<Self> {
        Self::validated(CodeKind::SingleParityCheck, n, b, 0)
    }

    /// `C[n(B1+B2), B1(n-1)+B2]`.
    pub fn time_sharing(n: usize, b1: usize, b2: usize) -> Result<Self> {
        Self::validated(CodeKind::TimeSharing, n, b1, b2)
    }

    fn validated(kind: CodeKind, n: usize, spc_blocks: usize, rep_blocks: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("sub-block length {n} < 2")));
        }
        if spc_blocks + rep_blocks == 0 {
            return Err(Error::InvalidParameter("code has no sub-blocks".into()));
        }
        Ok(CodeSpec {
            kind,
            n,
            spc_blocks,
            rep_blocks,
        })
    }

    /// Information symbols per codeword.
    pub fn k(&self) -> usize {
        self.spc_blocks * (self.n - 1) + self.rep_blocks
    }

    /// Codeword length.
    pub fn length(&self) -> usize {
        self.n * (self.spc_blocks + self.rep_blocks)
    }

    pub fn parity_len(&self) -> usize {
        self.length() - self.k()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.length() as f64
    }

    fn spc_info(&self) -> usize {
        self.spc_blocks * (self.n - 1)
    }
}

/// Tally of elementary multiply-accumulate steps over group elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub ops: u64,
}

/// Extrinsic output of [`ComponentCode::map_decode`].
#[derive(Clone, Debug)]
pub struct Extrinsics {
    pub info: Vec<Message>,
    pub parity: Vec<Message>,
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct ComponentCode {
    spec: CodeSpec,
    group: FiniteAbelianGroup,
}

#[derive(Default)]
pub(crate) struct CodeScratch {
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl ComponentCode {
    pub fn new(spec: CodeSpec, group: FiniteAbelianGroup) -> Self {
        ComponentCode { spec, group }
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn encode(&self, u: &[Element]) -> Result<Vec<Element>> {
        if u.len() != self.spec.k() {
            return Err(Error::LengthMismatch {
                context: "encode",
                expected: self.spec.k(),
                found: u.len(),
            });
        }
        if let Some(&bad) = u.iter().find(|&&g| g >= self.group.order()) {
            self.group.check_element(bad)?;
        }
        let mut v = vec![0; self.spec.parity_len()];
        self.encode_into(u, &mut v);
        Ok(v)
    }

    pub(crate) fn encode_into(&self, u: &[Element], v: &mut [Element]) {
        let n = self.spec.n;
        let b1 = self.spec.spc_blocks;
        let b2 = self.spec.rep_blocks;
        let (u_spc, u_rep) = u.split_at(self.spec.spc_info());
        let (v_spc, v_rep) = v.split_at_mut(b1);
        for (b, slot) in v_spc.iter_mut().enumerate() {
            *slot = self.group.sum((0..n - 1).map(|i| u_spc[i * b1 + b]));
        }
        for c in 0..n - 1 {
            v_rep[c * b2..(c + 1) * b2].copy_from_slice(u_rep);
        }
    }

    /// Symbol-wise MAP extrinsics for every information and parity position.
    pub fn map_decode(&self, info: &[Message], parity: &[Message]) -> Result<Extrinsics> {
        self.map_decode_counted(info, parity, &mut OpCounter::default())
    }

    pub fn map_decode_counted(
        &self,
        info: &[Message],
        parity: &[Message],
        counter: &mut OpCounter,
    ) -> Result<Extrinsics> {
        let q = self.group.order();
        if info.len() != self.spec.k() {
            return Err(Error::LengthMismatch {
                context: "map_decode information priors",
                expected: self.spec.k(),
                found: info.len(),
            });
        }
        if parity.len() != self.spec.parity_len() {
            return Err(Error::LengthMismatch {
                context: "map_decode parity priors",
                expected: self.spec.parity_len(),
                found: parity.len(),
            });
        }
        if let Some(m) = info.iter().chain(parity).find(|m| m.len() != q) {
            return Err(Error::GroupMismatch {
                expected: q,
                found: m.len(),
            });
        }
        let flat_info: Vec<f64> = info.iter().flat_map(|m| m.probs().iter().copied()).collect();
        let flat_parity: Vec<f64> = parity.iter().flat_map(|m| m.probs().iter().copied()).collect();
        let mut ext_info = vec![0.0; flat_info.len()];
        let mut ext_parity = vec![0.0; flat_parity.len()];
        let degenerate = self.map_decode_flat(
            &flat_info,
            &flat_parity,
            &mut ext_info,
            &mut ext_parity,
            &mut CodeScratch::default(),
            Some(counter),
        );
        let split = |v: Vec<f64>| {
            v.chunks_exact(q)
                .map(|c| Message::from_normalized(c.to_vec()))
                .collect()
        };
        Ok(Extrinsics {
            info: split(ext_info),
            parity: split(ext_parity),
            degenerate,
        })
    }

    /// Flat-buffer MAP decoding (`q` entries per position). Returns `true`
    /// if any output had to fall back to uniform.
    pub(crate) fn map_decode_flat(
        &self,
        info: &[f64],
        parity: &[f64],
        ext_info: &mut [f64],
        ext_parity: &mut [f64],
        scratch: &mut CodeScratch,
        counter: Option<&mut OpCounter>,
    ) -> bool {
        let q = self.group.order();
        let n = self.spec.n;
        let b1 = self.spec.spc_blocks;
        let b2 = self.spec.rep_blocks;
        let split_u = self.spec.spc_info() * q;
        let split_v = b1 * q;
        let mut degenerate = false;
        let mut ops = 0u64;

        if b1 > 0 {
            scratch.prefix.resize(n * q, 0.0);
            scratch.suffix.resize(n * q, 0.0);
            for b in 0..b1 {
                let at_u = |i: usize| (i * b1 + b) * q;
                let pv = &parity[b * q..(b + 1) * q];
                // prefix[i] = law of (v - u_0 - .. - u_{i-1})
                scratch.prefix[..q].copy_from_slice(pv);
                for i in 0..n - 1 {
                    let (done, rest) = scratch.prefix.split_at_mut((i + 1) * q);
                    convolve_sub_into(
                        &self.group,
                        &done[i * q..],
                        &info[at_u(i)..at_u(i) + q],
                        &mut rest[..q],
                    );
                }
                // suffix[i] = law of (u_i + .. + u_{n-2}); suffix[n-1] = point mass at o
                let o = self.group.identity();
                let last = (n - 1) * q;
                scratch.suffix[last..last + q].fill(0.0);
                scratch.suffix[last + o] = 1.0;
                for i in (0..n - 1).rev() {
                    let (head, tail) = scratch.suffix.split_at_mut((i + 1) * q);
                    convolve_into(&self.group, &info[at_u(i)..at_u(i) + q], &tail[..q], &mut head[i * q..]);
                }
                for i in 0..n - 1 {
                    let out = &mut ext_info[at_u(i)..at_u(i) + q];
                    convolve_sub_into(
                        &self.group,
                        &scratch.prefix[i * q..(i + 1) * q],
                        &scratch.suffix[(i + 1) * q..(i + 2) * q],
                        out,
                    );
                    degenerate |= normalize(out);
                }
                let out = &mut ext_parity[b * q..(b + 1) * q];
                out.copy_from_slice(&scratch.suffix[..q]);
                degenerate |= normalize(out);
                ops += (3 * (n - 1) * q * q) as u64;
            }
        }

        if b2 > 0 {
            let info = &info[split_u..];
            let parity = &parity[split_v..];
            let ext_info = &mut ext_info[split_u..];
            let ext_parity = &mut ext_parity[split_v..];
            // replica r = 0 is the information symbol, r >= 1 the parity copies
            let replica = |r: usize, b: usize| -> &[f64] {
                if r == 0 {
                    &info[b * q..(b + 1) * q]
                } else {
                    let at = ((r - 1) * b2 + b) * q;
                    &parity[at..at + q]
                }
            };
            for b in 0..b2 {
                for r in 0..n {
                    let out: &mut [f64] = if r == 0 {
                        &mut ext_info[b * q..(b + 1) * q]
                    } else {
                        let at = ((r - 1) * b2 + b) * q;
                        &mut ext_parity[at..at + q]
                    };
                    out.fill(1.0);
                    for other in (0..n).filter(|&o| o != r) {
                        for (x, y) in out.iter_mut().zip(replica(other, b)) {
                            *x *= y;
                        }
                    }
                    degenerate |= normalize(out);
                }
                ops += (n * (n - 1) * q) as u64;
            }
        }
        if let Some(c) = counter {
            c.ops += ops;
        }
        degenerate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Parity constraints checked position by position from the definitions.
    fn satisfies(spec: &CodeSpec, q: usize, u: &[usize], v: &[usize]) -> bool {
        let (n, b1, b2) = (spec.n, spec.spc_blocks, spec.rep_blocks);
        let spc_ok = (0..b1).all(|b| {
            let s: usize = (0..n - 1).map(|i| u[i * b1 + b]).sum();
            s % q == v[b]
        });
        let rep_ok = (0..b2).all(|b| (0..n - 1).all(|c| v[b1 + c * b2 + b] == u[(n - 1) * b1 + b]));
        spc_ok && rep_ok
    }

    /// Exhaustive MAP over all q^k information words (cyclic groups).
    fn brute_extrinsics(spec: &CodeSpec, q: usize, info: &[Vec<f64>], parity: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let code = ComponentCode::new(*spec, FiniteAbelianGroup::cyclic(q).unwrap());
        let k = spec.k();
        let mut marg_u = vec![vec![0.0; q]; k];
        let mut marg_v = vec![vec![0.0; q]; spec.parity_len()];
        let total = q.pow(k as u32);
        for word in 0..total {
            let mut u = vec![0; k];
            let mut w = word;
            for slot in u.iter_mut() {
                *slot = w % q;
                w /= q;
            }
            let v = code.encode(&u).unwrap();
            let mut weight = 1.0;
            for (i, &x) in u.iter().enumerate() {
                weight *= info[i][x];
            }
            for (j, &x) in v.iter().enumerate() {
                weight *= parity[j][x];
            }
            for (i, &x) in u.iter().enumerate() {
                marg_u[i][x] += weight;
            }
            for (j, &x) in v.iter().enumerate() {
                marg_v[j][x] += weight;
            }
        }
        let ext = |marg: Vec<Vec<f64>>, prior: &[Vec<f64>]| -> Vec<Vec<f64>> {
            marg.into_iter()
                .zip(prior)
                .map(|(m, p)| {
                    let e: Vec<f64> = m.iter().zip(p).map(|(a, b)| a / b).collect();
                    let s: f64 = e.iter().sum();
                    e.into_iter().map(|x| x / s).collect()
                })
                .collect()
        };
        (ext(marg_u, info), ext(marg_v, parity))
    }

    fn random_priors(rng: &mut ChaCha8Rng, count: usize, q: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let w: Vec<f64> = (0..q).map(|_| rng.random_range(0.02..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|x| x / s).collect()
            })
            .collect()
    }

    fn to_msgs(v: &[Vec<f64>]) -> Vec<Message> {
        v.iter().map(|p| Message::from_weights(p.clone()).unwrap()).collect()
    }

    fn specs() -> Vec<CodeSpec> {
        vec![
            CodeSpec::repetition(2, 1).unwrap(),
            CodeSpec::repetition(3, 2).unwrap(),
            CodeSpec::repetition(4, 3).unwrap(),
            CodeSpec::single_parity_check(2, 2).unwrap(),
            CodeSpec::single_parity_check(3, 1).unwrap(),
            CodeSpec::single_parity_check(3, 2).unwrap(),
            CodeSpec::single_parity_check(4, 2).unwrap(),
            CodeSpec::time_sharing(3, 1, 2).unwrap(),
            CodeSpec::time_sharing(2, 2, 3).unwrap(),
        ]
    }

    #[test]
    fn dimensions() {
        let r = CodeSpec::repetition(2, 1000).unwrap();
        assert_eq!((r.k(), r.length(), r.parity_len()), (1000, 2000, 1000));
        let s = CodeSpec::single_parity_check(3, 10).unwrap();
        assert_eq!((s.k(), s.length()), (20, 30));
        let t = CodeSpec::time_sharing(3, 4, 5).unwrap();
        assert_eq!((t.k(), t.length()), (4 * 2 + 5, 3 * 9));
        assert!(CodeSpec::repetition(1, 3).is_err());
        assert!(CodeSpec::time_sharing(3, 0, 0).is_err());
    }

    #[test]
    fn encode_examples() {
        let z3 = FiniteAbelianGroup::cyclic(3).unwrap();
        let rep = ComponentCode::new(CodeSpec::repetition(2, 3).unwrap(), FiniteAbelianGroup::product_z3z3());
        assert_eq!(rep.encode(&[5, 3, 0]).unwrap(), vec![5, 3, 0]);
        let spc = ComponentCode::new(CodeSpec::single_parity_check(3, 1).unwrap(), z3.clone());
        assert_eq!(spc.encode(&[1, 2]).unwrap(), vec![0]);
        assert!(spc.encode(&[1]).is_err());
        assert!(spc.encode(&[1, 3]).is_err());
        for spec in specs() {
            let code = ComponentCode::new(spec, z3.clone());
            let v = code.encode(&vec![0; spec.k()]).unwrap();
            assert!(v.iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn encoder_satisfies_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in [3, 5] {
            let grp = FiniteAbelianGroup::cyclic(q).unwrap();
            for spec in specs() {
                let code = ComponentCode::new(spec, grp.clone());
                for _ in 0..20 {
                    let u: Vec<usize> = (0..spec.k()).map(|_| rng.random_range(0..q)).collect();
                    let v = code.encode(&u).unwrap();
                    assert!(satisfies(&spec, q, &u, &v));
                }
            }
        }
    }

    #[test]
    fn repetition_extrinsic_is_copy_prior() {
        let code = ComponentCode::new(CodeSpec::repetition(2, 1).unwrap(), FiniteAbelianGroup::cyclic(3).unwrap());
        let pu = Message::from_weights(vec![0.2, 0.5, 0.3]).unwrap();
        let pv = Message::from_weights(vec![0.6, 0.1, 0.3]).unwrap();
        let ext = code.map_decode(std::slice::from_ref(&pu), std::slice::from_ref(&pv)).unwrap();
        assert_eq!(ext.info[0], pv);
        assert_eq!(ext.parity[0], pu);
    }

    #[test]
    fn spc_point_mass_fixture() {
        let code = ComponentCode::new(CodeSpec::single_parity_check(3, 1).unwrap(), FiniteAbelianGroup::cyclic(3).unwrap());
        let info = [Message::point_mass(3, 1), Message::uniform(3)];
        let parity = [Message::point_mass(3, 0)];
        let ext = code.map_decode(&info, &parity).unwrap();
        assert_eq!(ext.info[1].argmax(), 2);
        assert!((ext.info[1].probs()[2] - 1.0).abs() < 1e-9);
        let brute = brute_extrinsics(
            code.spec(),
            3,
            &[vec![1e-300, 1.0, 1e-300], vec![1.0 / 3.0; 3]],
            &[vec![1.0, 1e-300, 1e-300]],
        );
        assert!((brute.0[1][2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn map_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for q in [3, 5] {
            let grp = FiniteAbelianGroup::cyclic(q).unwrap();
            for spec in specs() {
                if (q as u64).pow(spec.k() as u32) > 729 {
                    continue;
                }
                let code = ComponentCode::new(spec, grp.clone());
                for _ in 0..100 {
                    let info = random_priors(&mut rng, spec.k(), q);
                    let parity = random_priors(&mut rng, spec.parity_len(), q);
                    let ext = code.map_decode(&to_msgs(&info), &to_msgs(&parity)).unwrap();
                    let (bu, bv) = brute_extrinsics(&spec, q, &info, &parity);
                    for (m, b) in ext.info.iter().zip(&bu).chain(ext.parity.iter().zip(&bv)) {
                        for (x, y) in m.probs().iter().zip(b) {
                            assert!((x - y).abs() < 1e-9, "{spec:?} q={q}: {x} vs {y}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn operation_counts_scale_as_documented() {
        let grp = FiniteAbelianGroup::cyclic(5).unwrap();
        let count = |spec: CodeSpec| {
            let code = ComponentCode::new(spec, grp.clone());
            let info = vec![Message::uniform(5); spec.k()];
            let parity = vec![Message::uniform(5); spec.parity_len()];
            let mut c = OpCounter::default();
            code.map_decode_counted(&info, &parity, &mut c).unwrap();
            c.ops
        };
        // linear in B
        assert_eq!(count(CodeSpec::repetition(3, 20).unwrap()), 2 * count(CodeSpec::repetition(3, 10).unwrap()));
        assert_eq!(
            count(CodeSpec::single_parity_check(3, 20).unwrap()),
            2 * count(CodeSpec::single_parity_check(3, 10).unwrap())
        );
        // repetition O(n q) per sub-block, SPC O(n q^2)
        let rep = count(CodeSpec::repetition(4, 1).unwrap());
        let spc = count(CodeSpec::single_parity_check(4, 1).unwrap());
        assert!(rep <= 4 * 4 * 5);
        assert!(spc <= 3 * 4 * 25);
        assert!(spc > rep);
    }

    #[test]
    fn rejects_bad_inputs() {
        let code = ComponentCode::new(CodeSpec::single_parity_check(3, 1).unwrap(), FiniteAbelianGroup::cyclic(3).unwrap());
        let u3 = Message::uniform(3);
        assert!(code.map_decode(std::slice::from_ref(&u3), std::slice::from_ref(&u3)).is_err());
        assert!(code
            .map_decode(&[u3.clone(), Message::uniform(5)], std::slice::from_ref(&u3))
            .is_err());
    }

    proptest! {
        #[test]
        fn spc_extrinsics_are_normalized(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grp = FiniteAbelianGroup::product_z3z3();
            let spec = CodeSpec::time_sharing(4, 3, 2).unwrap();
            let code = ComponentCode::new(spec, grp);
            let info = random_priors(&mut rng, spec.k(), 9);
            let parity = random_priors(&mut rng, spec.parity_len(), 9);
            let ext = code.map_decode(&to_msgs(&info), &to_msgs(&parity)).unwrap();
            for m in ext.info.iter().chain(&ext.parity) {
                prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
