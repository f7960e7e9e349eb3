//! Self-describing checkpoint container.
//!
//! All integers little-endian. Strings are a `u32` byte length followed by UTF-8.
//!
//! ```text
//! magic       8 bytes   "NERKCKPT"
//! version     u32       1
//! seed        u64
//! config      string    JSON-serialized training configuration
//! n_tables    u32
//!   name      string
//!   n_entries u32
//!   entry     string    (n_entries times)
//! n_params    u32
//!   name      string
//!   ndim      u32
//!   dims      u64 x ndim
//!   values    f64 x product(dims)
//! ```
//!
//! Tables carry vocabularies (words, characters, word pieces, tags) in id order.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NERKCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub config: String,
    pub tables: BTreeMap<String, Vec<String>>,
    pub params: ParamStore,
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_str(w: &mut impl Write, s: &str) -> Result<()> {
    put_u32(w, len_u32(s.len())?)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Checkpoint(format!("length {n} exceeds u32")))
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str(r: &mut impl Read) -> Result<String> {
    let n = get_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(format!("invalid UTF-8: {e}")))
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        put_u32(w, VERSION)?;
        w.write_all(&self.seed.to_le_bytes())?;
        put_str(w, &self.config)?;
        put_u32(w, len_u32(self.tables.len())?)?;
        for (name, entries) in &self.tables {
            put_str(w, name)?;
            put_u32(w, len_u32(entries.len())?)?;
            for e in entries {
                put_str(w, e)?;
            }
        }
        put_u32(w, len_u32(self.params.len())?)?;
        for (name, t) in self.params.iter() {
            put_str(w, name)?;
            put_u32(w, len_u32(t.shape().len())?)?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = get_u32(r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let seed = get_u64(r)?;
        let config = get_str(r)?;
        let mut tables = BTreeMap::new();
        for _ in 0..get_u32(r)? {
            let name = get_str(r)?;
            let n = get_u32(r)?;
            let entries = (0..n).map(|_| get_str(r)).collect::<Result<Vec<_>>>()?;
            tables.insert(name, entries);
        }
        let mut params = ParamStore::new();
        for _ in 0..get_u32(r)? {
            let name = get_str(r)?;
            let ndim = get_u32(r)?;
            let shape = (0..ndim)
                .map(|_| get_u64(r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            let mut b = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            params.add(name, Tensor::new(shape, data)?)?;
        }
        Ok(Self {
            seed,
            config,
            tables,
            params,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn table(&self, name: &str) -> Result<&[String]> {
        self.tables
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Checkpoint(format!("missing table {name}")))
    }
}
