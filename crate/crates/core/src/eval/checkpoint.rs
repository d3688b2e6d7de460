//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "DGPT"  u32 version  u32 kind  u32 entry_count
//! per entry: u32 name_len, name (UTF-8), u32 rank, rank x u32 dims, f32 values
//! u32 CRC-32 of every preceding byte
//! ```

use std::fmt;
use std::path::Path;

use crate::diffusion::{EpsilonNet, NoiseSchedule};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::gan::{Discriminator, Generator};
use crate::numerics::{ParamSet, Rng, Tensor};

const MAGIC: &[u8; 4] = b"DGPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const SCHEDULE_TENSOR: &str = "schedule.betas";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    EpsilonNet,
    Generator,
    Discriminator,
}

impl ModelKind {
    fn tag(self) -> u32 {
        match self {
            ModelKind::EpsilonNet => 1,
            ModelKind::Generator => 2,
            ModelKind::Discriminator => 3,
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            1 => Ok(ModelKind::EpsilonNet),
            2 => Ok(ModelKind::Generator),
            3 => Ok(ModelKind::Discriminator),
            _ => Err(Error::KindMismatch {
                expected: "a known model kind".into(),
                found: format!("tag {tag}"),
            }),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::EpsilonNet => "epsilon_net",
            ModelKind::Generator => "generator",
            ModelKind::Discriminator => "discriminator",
        })
    }
}

/// A model kind plus its named tensors, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_params(kind: ModelKind, params: &ParamSet) -> Self {
        let tensors = params
            .iter()
            .map(|(n, t)| {
                let plain = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("valid parameter");
                (n.to_string(), plain)
            })
            .collect();
        Self { kind, tensors }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.to_string(),
                found: self.kind.to_string(),
            });
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
        put(&mut out, CHECKPOINT_VERSION);
        put(&mut out, self.kind.tag());
        put(&mut out, self.tensors.len() as u32);
        for (name, t) in &self.tensors {
            put(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put(&mut out, t.shape().len() as u32);
            for &d in t.shape() {
                put(&mut out, d as u32);
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        put(&mut out, crc);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 20 {
            return Err(Error::Truncated("header".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::CrcMismatch { stored, computed });
        }
        let kind = ModelKind::from_tag(r.u32("kind")?)?;
        let count = r.u32("entry count")? as usize;
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        for i in 0..count {
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| Error::invalid(format!("tensor {i} name is not UTF-8")))?
                .to_string();
            if tensors.iter().any(|(n, _)| *n == name) {
                return Err(Error::invalid(format!("duplicate tensor {name:?}")));
            }
            let rank = r.u32("rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u32("dims").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|n| n.checked_mul(4).is_some_and(|b| b <= body.len()))
                .ok_or_else(|| Error::Truncated(format!("tensor {name:?} payload")))?;
            let data = r
                .take(numel * 4, "payload")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if r.pos != body.len() {
            return Err(Error::invalid(format!(
                "{} trailing bytes after the last tensor",
                body.len() - r.pos
            )));
        }
        Ok(Self { kind, tensors })
    }

    /// Copies tensors into `params`, which must name exactly the same tensors
    /// with the same shapes. `extra` lists additional names the caller reads.
    fn load_into(&self, params: &mut ParamSet, extra: &[&str]) -> Result<()> {
        let expected = params.len() + extra.len();
        if self.tensors.len() != expected {
            if let Some(n) = params.names().chain(extra.iter().copied()).find(|n| self.get(n).is_none()) {
                return Err(Error::MissingTensor(n.to_string()));
            }
            return Err(Error::invalid(format!(
                "checkpoint holds {} tensors, expected {expected}",
                self.tensors.len()
            )));
        }
        let mut src = ParamSet::new();
        for (n, t) in &self.tensors {
            if !extra.contains(&n.as_str()) {
                src.push(n.clone(), t.clone())?;
            }
        }
        params.load_from(&src)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Truncated(what.to_string()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fsutil::write_atomic(path, &ckpt.encode())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::decode(&fsutil::read(path)?)
}

/// Networks that round-trip through a [`Checkpoint`].
pub trait Model: Sized {
    const KIND: ModelKind;

    fn to_checkpoint(&self) -> Checkpoint;

    fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self>;
}

/// Channel count implied by a tensor's dimension `axis`, less `minus`.
fn channels_from(ckpt: &Checkpoint, name: &str, axis: usize, div: usize, minus: usize) -> Result<usize> {
    let t = ckpt.require(name)?;
    let d = t
        .shape()
        .get(axis)
        .copied()
        .ok_or_else(|| Error::shape(format!("tensor {name} has shape {:?}", t.shape())))?;
    if d % div != 0 || d / div <= minus {
        return Err(Error::shape(format!("tensor {name} has shape {:?}", t.shape())));
    }
    Ok(d / div - minus)
}

/// Epsilon network together with the schedule it was trained under.
#[derive(Clone, Debug)]
pub struct DdpmModel {
    pub net: EpsilonNet,
    pub schedule: NoiseSchedule,
}

impl Model for DdpmModel {
    const KIND: ModelKind = ModelKind::EpsilonNet;

    fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::from_params(Self::KIND, self.net.params());
        c.tensors.push((SCHEDULE_TENSOR.into(), self.schedule.to_tensor()));
        c
    }

    fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(Self::KIND)?;
        let channels = channels_from(ckpt, "out.weight", 0, 1, 0)?;
        let mut net = EpsilonNet::new(channels, &Rng::new(0))?;
        ckpt.load_into(net.params_mut(), &[SCHEDULE_TENSOR])?;
        let betas = ckpt.require(SCHEDULE_TENSOR)?;
        let schedule = NoiseSchedule::from_betas(betas.data().to_vec())?;
        Ok(Self { net, schedule })
    }
}

impl Model for Generator {
    const KIND: ModelKind = ModelKind::Generator;

    fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(Self::KIND, self.params())
    }

    fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(Self::KIND)?;
        let channels = channels_from(ckpt, "enc1.weight", 1, 2, 0)?;
        let mut g = Generator::new(channels, &Rng::new(0))?;
        ckpt.load_into(g.params_mut(), &[])?;
        Ok(g)
    }
}

impl Model for Discriminator {
    const KIND: ModelKind = ModelKind::Discriminator;

    fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(Self::KIND, self.params())
    }

    fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(Self::KIND)?;
        let channels = channels_from(ckpt, "conv1.weight", 1, 1, 1)?;
        let mut d = Discriminator::new(channels, &Rng::new(0))?;
        ckpt.load_into(d.params_mut(), &[])?;
        Ok(d)
    }
}

pub fn save_model<M: Model>(path: &Path, model: &M) -> Result<()> {
    save_checkpoint(path, &model.to_checkpoint())
}

pub fn load_model<M: Model>(path: &Path) -> Result<M> {
    M::from_checkpoint(&load_checkpoint(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator_bytes() -> Vec<u8> {
        Generator::new(3, &Rng::new(4)).unwrap().to_checkpoint().encode()
    }

    #[test]
    fn decode_encode_is_identity() {
        let bytes = generator_bytes();
        let again = Checkpoint::decode(&bytes).unwrap().encode();
        assert_eq!(bytes, again);
        let g = Generator::from_checkpoint(&Checkpoint::decode(&bytes).unwrap()).unwrap();
        assert_eq!(g.to_checkpoint().encode(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = generator_bytes();
        let mut flipped = bytes.clone();
        flipped[100] ^= 0x01;
        assert!(matches!(Checkpoint::decode(&flipped), Err(Error::CrcMismatch { .. })));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(Checkpoint::decode(&magic), Err(Error::BadMagic)));

        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(Checkpoint::decode(&version), Err(Error::UnsupportedVersion(9))));

        assert!(Checkpoint::decode(&bytes[..bytes.len() - 9]).is_err());
    }

    #[test]
    fn kinds_are_not_interchangeable() {
        let ckpt = Checkpoint::decode(&generator_bytes()).unwrap();
        assert!(matches!(DdpmModel::from_checkpoint(&ckpt), Err(Error::KindMismatch { .. })));
        // Same bytes with the tag rewritten still fail, on tensor names.
        let mut relabeled = ckpt.clone();
        relabeled.kind = ModelKind::EpsilonNet;
        assert!(matches!(DdpmModel::from_checkpoint(&relabeled), Err(Error::MissingTensor(_))));
    }

    #[test]
    fn ddpm_model_keeps_its_schedule() {
        let m = DdpmModel {
            net: EpsilonNet::new(1, &Rng::new(0)).unwrap(),
            schedule: NoiseSchedule::linear(10, 1e-3, 0.05).unwrap(),
        };
        let back = DdpmModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        assert_eq!(back.schedule, m.schedule);
        assert_eq!(back.net.params().value_bytes(), m.net.params().value_bytes());
        assert_eq!(back.net.channels(), 1);
    }

    #[test]
    fn discriminator_round_trips() {
        let d = Discriminator::new(1, &Rng::new(2)).unwrap();
        let back = Discriminator::from_checkpoint(&d.to_checkpoint()).unwrap();
        assert_eq!(back.channels(), 1);
        assert_eq!(back.params().value_bytes(), d.params().value_bytes());
    }
}
