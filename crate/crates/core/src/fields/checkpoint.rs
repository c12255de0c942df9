//! Binary checkpoint container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "WKGCHKPT" | version u32 | n u64 | L f64 | t f64
//! C1 f64 | C2 f64 | C1ab 9×f64 | C2ab 9×f64 | null-structure u8
//! w, wt, v, vt: n² f64 each, row-major
//! extension count u32, then per extension:
//!   name length u32 | name utf-8 | value count u64 | values f64
//! ```
//!
//! Extensions carry run-loop state (step index, accumulators) under
//! self-describing names.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{CouplingTensors, FieldState, NullStructure};
use crate::grid::{make_grid, ScalarField};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"WKGCHKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: FieldState,
    pub extensions: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn extension(&self, name: &str) -> Option<&[f64]> {
        self.extensions.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.state;
        let grid = s.grid();
        let mut out = Vec::with_capacity(96 + 4 * 8 * grid.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(grid.n() as u64).to_le_bytes());
        put_f64(&mut out, grid.half_length());
        put_f64(&mut out, s.t);
        let c = &s.couplings;
        put_f64(&mut out, c.c1);
        put_f64(&mut out, c.c2);
        for x in c.c1ab.iter().flatten().chain(c.c2ab.iter().flatten()) {
            put_f64(&mut out, *x);
        }
        out.push(match c.null_structure {
            NullStructure::Standard => 0,
            NullStructure::BrokenTimeProduct => 1,
        });
        for (_, f) in s.fields() {
            f.values().iter().for_each(|&x| put_f64(&mut out, x));
        }
        out.extend_from_slice(&(self.extensions.len() as u32).to_le_bytes());
        for (name, values) in &self.extensions {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            values.iter().for_each(|&x| put_f64(&mut out, x));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n = r.u64()? as usize;
        let half_length = r.f64()?;
        let t = r.f64()?;
        let mut c = CouplingTensors { c1: r.f64()?, c2: r.f64()?, ..Default::default() };
        for a in 0..3 {
            for b in 0..3 {
                c.c1ab[a][b] = r.f64()?;
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                c.c2ab[a][b] = r.f64()?;
            }
        }
        c.null_structure = match r.take(1)?[0] {
            0 => NullStructure::Standard,
            1 => NullStructure::BrokenTimeProduct,
            other => return Err(Error::Checkpoint(format!("unknown null-structure tag {other}"))),
        };
        let grid = make_grid(n, half_length)?;
        let mut field = || -> Result<ScalarField> {
            let values = (0..n * n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            ScalarField::from_values(&grid, values)
        };
        let (w, wt, v, vt) = (field()?, field()?, field()?, field()?);
        let state = FieldState::new(t, w, wt, v, vt, Arc::new(c))?;
        let count = r.u32()?;
        let mut extensions = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Checkpoint("extension name is not utf-8".into()))?;
            let m = r.u64()? as usize;
            let values = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            extensions.push((name, values));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { state, extensions })
    }
}

fn put_f64(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&x.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
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
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&checkpoint.to_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}
