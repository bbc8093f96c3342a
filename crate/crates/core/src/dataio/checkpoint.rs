//! Binary checkpoint format.
//!
//! Layout, little-endian throughout:
//!   magic "NNCK" | u32 version=1
//!   u32 topology length | topology JSON (layer list)
//!   u32 tensor count    | tensors (parameters, then batch-norm statistics)
//!   u32 tensor count    | optimizer moment tensors
//!   u32 entry count     | named u64 metadata (step counters, RNG positions)
//! Each tensor record: u16 name length, name bytes, u8 dtype tag, u8 rank,
//! rank x u32 dims, raw little-endian element data. Fixed record order makes
//! save -> load -> save byte-identical.

use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{LayerSpec, Network};
use crate::nn::AdamState;
use crate::rng::RngStreams;
use crate::tensor::{Dtype, Elem, Tensor};

const MAGIC: &[u8; 4] = b"NNCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T: Elem> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T: Elem> {
    pub topology: Vec<LayerSpec>,
    pub tensors: Vec<NamedTensor<T>>,
    pub opt_tensors: Vec<NamedTensor<T>>,
    pub meta: Vec<(String, u64)>,
}

fn ck_err(record: &str, msg: impl Into<String>) -> Error {
    Error::Checkpoint {
        record: record.to_string(),
        msg: msg.into(),
    }
}

impl<T: Elem> Checkpoint<T> {
    /// Snapshot a network, its optimizer, and RNG positions at `iter`.
    pub fn capture(
        net: &Network<T>,
        opt: &AdamState<T>,
        streams: &RngStreams,
        iter: u64,
    ) -> Self {
        let mut tensors: Vec<NamedTensor<T>> = net
            .params
            .iter()
            .map(|(name, t)| NamedTensor {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect();
        for (i, stats) in net.bn_stats.iter().enumerate() {
            if let Some(s) = stats {
                tensors.push(NamedTensor {
                    name: format!("__stats{i}.mean"),
                    shape: vec![s.mean.len()],
                    data: s.mean.clone(),
                });
                tensors.push(NamedTensor {
                    name: format!("__stats{i}.var"),
                    shape: vec![s.var.len()],
                    data: s.var.clone(),
                });
            }
        }
        let mut opt_tensors = Vec::new();
        for name in opt.moment_names() {
            let (m, v) = opt.moments_of(name).unwrap();
            opt_tensors.push(NamedTensor {
                name: format!("{name}.m"),
                shape: vec![m.len()],
                data: m.clone(),
            });
            opt_tensors.push(NamedTensor {
                name: format!("{name}.v"),
                shape: vec![v.len()],
                data: v.clone(),
            });
        }
        let mut meta = vec![
            ("iter".to_string(), iter),
            ("adam.t".to_string(), opt.t),
            ("seed".to_string(), streams.seed),
        ];
        for (name, pos) in streams.positions() {
            meta.push((format!("rng.{name}.lo"), pos as u64));
            meta.push((format!("rng.{name}.hi"), (pos >> 64) as u64));
        }
        Checkpoint {
            topology: net.specs.clone(),
            tensors,
            opt_tensors,
            meta,
        }
    }

    pub fn meta_value(&self, name: &str) -> Option<u64> {
        self.meta.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Rebuild the network described by the checkpoint topology.
    pub fn restore_network(&self) -> Result<Network<T>> {
        // init RNG is irrelevant: every parameter is overwritten below
        let mut rng = crate::rng::stream(0, crate::rng::StreamId::Init);
        let mut net = Network::from_specs(self.topology.clone(), &mut rng)?;
        for nt in &self.tensors {
            if let Some(rest) = nt.name.strip_prefix("__stats") {
                let (idx, field) = rest
                    .split_once('.')
                    .ok_or_else(|| ck_err(&nt.name, "malformed statistics record"))?;
                let i: usize = idx
                    .parse()
                    .map_err(|_| ck_err(&nt.name, "bad layer index"))?;
                let slot = net
                    .bn_stats
                    .get_mut(i)
                    .and_then(|s| s.as_mut())
                    .ok_or_else(|| ck_err(&nt.name, "no batch-norm layer at this index"))?;
                match field {
                    "mean" => slot.mean = nt.data.clone(),
                    "var" => slot.var = nt.data.clone(),
                    _ => return Err(ck_err(&nt.name, "unknown statistics field")),
                }
            } else {
                net.params
                    .replace(&nt.name, Tensor::var(nt.data.clone(), &nt.shape));
            }
        }
        Ok(net)
    }

    /// Rebuild the optimizer state the checkpoint captured.
    pub fn restore_optimizer(&self, cfg: crate::nn::AdamConfig) -> Result<AdamState<T>> {
        let mut opt = AdamState::new(cfg);
        opt.t = self
            .meta_value("adam.t")
            .ok_or_else(|| ck_err("adam.t", "missing metadata"))?;
        let mut i = 0;
        while i + 1 < self.opt_tensors.len() {
            let m = &self.opt_tensors[i];
            let v = &self.opt_tensors[i + 1];
            let name = m
                .name
                .strip_suffix(".m")
                .ok_or_else(|| ck_err(&m.name, "expected .m moment record"))?;
            if v.name != format!("{name}.v") {
                return Err(ck_err(&v.name, "expected matching .v moment record"));
            }
            opt.set_moments(name, m.data.clone(), v.data.clone());
            i += 2;
        }
        Ok(opt)
    }

    /// Rebuild the RNG streams at their captured positions.
    pub fn restore_streams(&self) -> Result<RngStreams> {
        let seed = self
            .meta_value("seed")
            .ok_or_else(|| ck_err("seed", "missing metadata"))?;
        let names = ["init", "data_order", "augment", "dropout", "latent", "epsilon"];
        let mut positions = Vec::new();
        for name in names {
            let lo = self
                .meta_value(&format!("rng.{name}.lo"))
                .ok_or_else(|| ck_err(name, "missing RNG position"))?;
            let hi = self
                .meta_value(&format!("rng.{name}.hi"))
                .ok_or_else(|| ck_err(name, "missing RNG position"))?;
            positions.push((name, (hi as u128) << 64 | lo as u128));
        }
        Ok(RngStreams::restore(seed, &positions))
    }
}

// ----- encoding -----

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor<T: Elem>(out: &mut Vec<u8>, t: &NamedTensor<T>) {
    put_u16(out, t.name.len() as u16);
    out.extend_from_slice(t.name.as_bytes());
    out.push(T::DTYPE.tag());
    out.push(t.shape.len() as u8);
    for &d in &t.shape {
        put_u32(out, d as u32);
    }
    for &v in &t.data {
        v.write_le(out);
    }
}

pub fn encode<T: Elem>(ck: &Checkpoint<T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    let topo = serde_json::to_vec(&ck.topology)?;
    put_u32(&mut out, topo.len() as u32);
    out.extend_from_slice(&topo);
    put_u32(&mut out, ck.tensors.len() as u32);
    for t in &ck.tensors {
        put_tensor(&mut out, t);
    }
    put_u32(&mut out, ck.opt_tensors.len() as u32);
    for t in &ck.opt_tensors {
        put_tensor(&mut out, t);
    }
    put_u32(&mut out, ck.meta.len() as u32);
    for (name, v) in &ck.meta {
        put_u16(&mut out, name.len() as u16);
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, record: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(ck_err(
                record,
                format!("truncated at byte {}: need {n} more bytes", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, record: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, record)?.try_into().unwrap()))
    }

    fn u32(&mut self, record: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, record)?.try_into().unwrap()))
    }

    fn u64(&mut self, record: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, record)?.try_into().unwrap()))
    }

    fn name(&mut self, record: &str) -> Result<String> {
        let len = self.u16(record)? as usize;
        let bytes = self.take(len, record)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| ck_err(record, "name is not UTF-8"))
    }

    fn tensor<T: Elem>(&mut self, index: usize) -> Result<NamedTensor<T>> {
        let record = format!("tensor #{index}");
        let name = self.name(&record)?;
        let tag = self.take(1, &name)?[0];
        match Dtype::from_tag(tag) {
            Some(d) if d == T::DTYPE => {}
            Some(d) => {
                return Err(ck_err(
                    &name,
                    format!("dtype {d:?} does not match requested {:?}", T::DTYPE),
                ))
            }
            None => return Err(ck_err(&name, format!("unknown dtype tag {tag}"))),
        }
        let rank = self.take(1, &name)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32(&name)? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = self.take(n * T::BYTES, &name)?;
        let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        Ok(NamedTensor { name, shape, data })
    }
}

pub fn decode<T: Elem>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(ck_err("magic", "not a checkpoint file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(ck_err("version", format!("unsupported version {version}")));
    }
    let topo_len = r.u32("topology")? as usize;
    let topology: Vec<LayerSpec> = serde_json::from_slice(r.take(topo_len, "topology")?)?;
    let n = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(n);
    for i in 0..n {
        tensors.push(r.tensor(i)?);
    }
    let n = r.u32("optimizer tensor count")? as usize;
    let mut opt_tensors = Vec::with_capacity(n);
    for i in 0..n {
        opt_tensors.push(r.tensor(i)?);
    }
    let n = r.u32("metadata count")? as usize;
    let mut meta = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.name("metadata")?;
        let v = r.u64(&name)?;
        meta.push((name, v));
    }
    if r.pos != bytes.len() {
        return Err(ck_err("trailer", "trailing bytes after checkpoint"));
    }
    Ok(Checkpoint {
        topology,
        tensors,
        opt_tensors,
        meta,
    })
}

pub fn save_checkpoint<T: Elem>(path: &Path, ck: &Checkpoint<T>) -> Result<()> {
    std::fs::write(path, encode(ck)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Elem>(path: &Path) -> Result<Checkpoint<T>> {
    decode(&std::fs::read(path)?)
}
