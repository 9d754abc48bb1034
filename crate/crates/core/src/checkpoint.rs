//! Binary checkpoint: magic `QEL1`, grid dimensions and extent, frame, a TOML
//! parameter block, then `G` and `Γ` as row-major little-endian `f64` arrays.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolution::EvolutionState;
use crate::fields::{MeridionalGrid, PacketFrame, ScalarField};
use crate::initial_data::DataParameters;

pub const MAGIC: &[u8; 4] = b"QEL1";

/// State and parameters stored in a checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: DataParameters,
    pub state: EvolutionState,
}

pub fn encode(params: &DataParameters, state: &EvolutionState) -> Result<Vec<u8>> {
    let g = state.grid();
    let block = toml::to_string(params).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(128 + block.len() + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.n_r as u64).to_le_bytes());
    out.extend_from_slice(&(g.n_z as u64).to_le_bytes());
    for v in [
        g.r_min,
        g.r_max,
        g.z_min,
        g.z_max,
        state.t,
        state.frame.r_star,
        state.frame.lambda,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(block.len() as u64).to_le_bytes());
    out.extend_from_slice(block.as_bytes());
    for f in [&state.g, &state.gamma] {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut rd = Reader { buf: bytes, pos: 0 };
    if rd.take(4)? != MAGIC {
        return Err(Error::Format("not a QEL1 checkpoint".into()));
    }
    let n_r = rd.u64()? as usize;
    let n_z = rd.u64()? as usize;
    let mut ext = [0.0; 7];
    for v in &mut ext {
        *v = rd.f64()?;
    }
    let [r_min, r_max, z_min, z_max, t, r_star, lambda] = ext;
    let block_len = rd.u64()? as usize;
    let block = std::str::from_utf8(rd.take(block_len)?).map_err(|e| Error::Format(e.to_string()))?;
    let params: DataParameters = toml::from_str(block).map_err(|e| Error::Format(e.to_string()))?;
    let grid = Arc::new(MeridionalGrid::new(r_min, r_max, z_min, z_max, n_r, n_z)?);
    let n = n_r
        .checked_mul(n_z)
        .ok_or_else(|| Error::Format("grid dimensions overflow".into()))?;
    let mut fields = Vec::with_capacity(2);
    for _ in 0..2 {
        let raw = rd.take(8 * n)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        fields.push(ScalarField::from_values(&grid, values)?);
    }
    if rd.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let gamma = fields.pop().expect("two fields");
    let g = fields.pop().expect("two fields");
    let state = EvolutionState::new(g, gamma, PacketFrame::new(r_star, lambda, t)?)?;
    Ok(Checkpoint { params, state })
}

pub fn write_checkpoint(path: &Path, params: &DataParameters, state: &EvolutionState) -> Result<()> {
    std::fs::write(path, encode(params, state)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}
