//! The full trainable parameter set: two encoders and the policy head,
//! with group-level frozen tags.

use super::encoder::EncoderParams;
use super::policy::PolicyParams;
use super::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Ext,
    Eih,
    Pi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<R> {
    pub ext: EncoderParams<R>,
    pub eih: EncoderParams<R>,
    pub pi: PolicyParams<R>,
    pub ext_frozen: bool,
    pub eih_frozen: bool,
    pub pi_frozen: bool,
}

impl<R: Real> ParamSet<R> {
    pub fn init(seed: u64) -> Self {
        Self {
            ext: EncoderParams::init(seed, "ext"),
            eih: EncoderParams::init(seed, "eih"),
            pi: PolicyParams::init(seed),
            ext_frozen: false,
            eih_frozen: false,
            pi_frozen: false,
        }
    }

    pub fn flat_len() -> usize {
        2 * EncoderParams::<R>::flat_len() + PolicyParams::<R>::flat_len()
    }

    /// Flat order: ext, eih, pi.
    pub fn to_flat(&self) -> Vec<R> {
        let mut v = self.ext.to_flat();
        v.extend(self.eih.to_flat());
        v.extend(self.pi.to_flat());
        v
    }

    pub fn from_flat(flat: &[R]) -> Self {
        let e = EncoderParams::<R>::flat_len();
        let p = PolicyParams::<R>::flat_len();
        assert_eq!(flat.len(), 2 * e + p);
        Self {
            ext: EncoderParams::from_flat(&flat[..e]),
            eih: EncoderParams::from_flat(&flat[e..2 * e]),
            pi: PolicyParams::from_flat(&flat[2 * e..]),
            ext_frozen: false,
            eih_frozen: false,
            pi_frozen: false,
        }
    }

    /// Flat index ranges per group.
    pub fn group_range(group: Group) -> std::ops::Range<usize> {
        let e = EncoderParams::<R>::flat_len();
        let p = PolicyParams::<R>::flat_len();
        match group {
            Group::Ext => 0..e,
            Group::Eih => e..2 * e,
            Group::Pi => 2 * e..2 * e + p,
        }
    }

    pub fn frozen(&self, group: Group) -> bool {
        match group {
            Group::Ext => self.ext_frozen,
            Group::Eih => self.eih_frozen,
            Group::Pi => self.pi_frozen,
        }
    }

    /// Named tensors in flat order, for checkpointing.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[R])> {
        let mut out = Vec::new();
        for (prefix, enc) in [("ext", &self.ext), ("eih", &self.eih)] {
            for (i, &(name, len, _)) in super::encoder::TENSORS.iter().enumerate() {
                out.push((format!("{prefix}.{name}"), vec![len], enc.t[i].as_slice()));
            }
        }
        for (i, &(name, len, _)) in super::policy::TENSORS.iter().enumerate() {
            out.push((format!("pi.{name}"), vec![len], self.pi.t[i].as_slice()));
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}
