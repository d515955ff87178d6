//! Binary persistence of agent networks and optimizer state.
//!
//! Layout (all integers and floats little-endian): an 8-byte magic, a u32
//! format version, the configuration fingerprint, the total update count,
//! then the four networks in a fixed order (value, value target, Q, policy),
//! each as a layer-size header followed by the flat f64 parameter array, then
//! the three Adam states (value, Q, policy) with their moment arrays.
//! Saving and loading round-trips bitwise.

use std::io::{Read, Write};
use std::path::Path;

use crate::nn::{AdamState, MlpParams};
use crate::sac::AgentNets;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"CANALRL\x01";
const VERSION: u32 = 1;

/// A saved agent: networks, optimizer state, and provenance.
#[derive(Debug, Clone)]
pub struct AgentCheckpoint {
    pub nets: AgentNets,
    pub total_updates: u64,
    /// Fingerprint of the data-bearing configuration the agent was trained
    /// under; a mismatch on load is reported as a warning, not an error.
    pub config_hash: u64,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn params(&mut self, p: &MlpParams) {
        self.u32(p.layer_sizes().len() as u32);
        for &s in p.layer_sizes() {
            self.u32(s as u32);
        }
        for v in p.flatten() {
            self.f64(v);
        }
    }

    fn adam(&mut self, a: &AdamState) {
        self.u64(a.step_count);
        self.f64(a.learning_rate);
        self.f64(a.beta1);
        self.f64(a.beta2);
        self.f64(a.epsilon);
        for v in a.first_moment.flatten() {
            self.f64(v);
        }
        for v in a.second_moment.flatten() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::InvalidInput(
                "checkpoint file truncated".into(),
            ));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn params(&mut self) -> Result<MlpParams> {
        let n_sizes = self.u32()? as usize;
        if n_sizes < 2 || n_sizes > 64 {
            return Err(Error::InvalidInput(format!(
                "checkpoint declares an implausible layer count {n_sizes}"
            )));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(self.u32()? as usize);
        }
        let count = MlpParams::zeros(&sizes)?.param_count();
        let mut flat = Vec::with_capacity(count);
        for _ in 0..count {
            flat.push(self.f64()?);
        }
        MlpParams::from_flat(&sizes, &flat)
    }

    fn adam(&mut self, shape_of: &MlpParams) -> Result<AdamState> {
        let step_count = self.u64()?;
        let learning_rate = self.f64()?;
        let beta1 = self.f64()?;
        let beta2 = self.f64()?;
        let epsilon = self.f64()?;
        let count = shape_of.param_count();
        let read_params = |r: &mut Self| -> Result<MlpParams> {
            let mut flat = Vec::with_capacity(count);
            for _ in 0..count {
                flat.push(r.f64()?);
            }
            MlpParams::from_flat(shape_of.layer_sizes(), &flat)
        };
        let first_moment = read_params(self)?;
        let second_moment = read_params(self)?;
        Ok(AdamState {
            first_moment,
            second_moment,
            step_count,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        })
    }
}

impl AgentCheckpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.buf.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u64(self.config_hash);
        w.u64(self.total_updates);
        w.u32(self.nets.obs_dim as u32);
        w.u32(self.nets.action_dim as u32);
        w.params(&self.nets.value);
        w.params(&self.nets.value_target);
        w.params(&self.nets.q);
        w.params(&self.nets.policy);
        w.adam(&self.nets.value_opt);
        w.adam(&self.nets.q_opt);
        w.adam(&self.nets.policy_opt);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != MAGIC {
            return Err(Error::InvalidInput(
                "not a checkpoint file (bad magic)".into(),
            ));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }
        let config_hash = r.u64()?;
        let total_updates = r.u64()?;
        let obs_dim = r.u32()? as usize;
        let action_dim = r.u32()? as usize;
        let value = r.params()?;
        let value_target = r.params()?;
        let q = r.params()?;
        let policy = r.params()?;
        let value_opt = r.adam(&value)?;
        let q_opt = r.adam(&q)?;
        let policy_opt = r.adam(&policy)?;
        if r.pos != bytes.len() {
            return Err(Error::InvalidInput(format!(
                "checkpoint has {} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let nets = AgentNets {
            obs_dim,
            action_dim,
            value,
            value_target,
            q,
            policy,
            value_opt,
            q_opt,
            policy_opt,
        };
        nets.validate()?;
        Ok(Self {
            nets,
            total_updates,
            config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
