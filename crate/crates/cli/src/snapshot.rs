//! Binary ensemble snapshots.
//!
//! Layout, all little-endian: the 8-byte tag `ENTROSC1`, `u32` version,
//! `f64` x_min, `f64` x_max, `u64` n, `f64` eta, `u64` count, `u64` seed,
//! `f64` burn_in, then for each member `n` values of `u` followed by `n`
//! values of `v` as `f64`.

use std::path::Path;

use thiserror::Error;

use entrosc_core::dynamics::{Ensemble, ModelParams};
use entrosc_core::field::{Field, FieldPair, Grid};

pub const MAGIC: &[u8; 8] = b"ENTROSC1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 8 + 4 + 8 * 7;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot: bad magic tag")]
    BadMagic,

    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated snapshot: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("snapshot has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("snapshot header is inconsistent: {0}")]
    Invalid(#[from] entrosc_core::Error),

    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Header fields of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub x_min: f64,
    pub x_max: f64,
    pub n: u64,
    pub eta: f64,
    pub count: u64,
    pub seed: u64,
    pub burn_in: f64,
}

impl SnapshotHeader {
    fn payload_len(&self) -> Option<usize> {
        (self.count as usize)
            .checked_mul(2)?
            .checked_mul(self.n as usize)?
            .checked_mul(8)
    }
}

pub fn encode(ens: &Ensemble) -> Result<Vec<u8>, SnapshotError> {
    let grid = ens.grid().copied().ok_or_else(|| {
        entrosc_core::Error::InsufficientData("cannot snapshot an empty ensemble".into())
    })?;
    let n = grid.len();
    let mut out = Vec::with_capacity(HEADER_LEN + ens.members.len() * 2 * n * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&grid.x_min().to_le_bytes());
    out.extend_from_slice(&grid.x_max().to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&ens.params.eta.to_le_bytes());
    out.extend_from_slice(&(ens.members.len() as u64).to_le_bytes());
    out.extend_from_slice(&ens.seed.to_le_bytes());
    out.extend_from_slice(&ens.burn_in_time.to_le_bytes());
    for m in &ens.members {
        for v in m.u.values().iter().chain(m.v.values()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
}

pub fn decode_header(bytes: &[u8]) -> Result<SnapshotHeader, SnapshotError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut c = Cursor { bytes, pos: 8 };
    let version = u32::from_le_bytes(c.take());
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    Ok(SnapshotHeader {
        version,
        x_min: c.f64(),
        x_max: c.f64(),
        n: c.u64(),
        eta: c.f64(),
        count: c.u64(),
        seed: c.u64(),
        burn_in: c.f64(),
    })
}

/// Parses a snapshot. Model parameters other than `eta` take their defaults
/// for the stored grid.
pub fn decode(bytes: &[u8]) -> Result<Ensemble, SnapshotError> {
    let header = decode_header(bytes)?;
    let payload = header.payload_len().ok_or_else(|| {
        entrosc_core::Error::InvalidGrid("member count times grid size overflows".into())
    })?;
    let expected = HEADER_LEN + payload;
    if bytes.len() < expected {
        return Err(SnapshotError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(SnapshotError::TrailingBytes(bytes.len() - expected));
    }
    let grid = Grid::new(header.x_min, header.x_max, header.n as usize)?;
    let params = ModelParams::for_grid(header.eta, &grid)?;
    let n = grid.len();
    let mut c = Cursor {
        bytes,
        pos: HEADER_LEN,
    };
    let read_field = |c: &mut Cursor| -> Result<Field, SnapshotError> {
        let values = (0..n).map(|_| c.f64()).collect();
        Ok(Field::new(grid, values)?)
    };
    let members = (0..header.count)
        .map(|_| {
            let u = read_field(&mut c)?;
            let v = read_field(&mut c)?;
            Ok(FieldPair::new(u, v)?)
        })
        .collect::<Result<_, SnapshotError>>()?;
    Ok(Ensemble {
        members,
        burn_in_time: header.burn_in,
        seed: header.seed,
        params,
    })
}

pub fn save_snapshot(ens: &Ensemble, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, encode(ens)?)?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Ensemble, SnapshotError> {
    decode(&std::fs::read(path)?)
}
