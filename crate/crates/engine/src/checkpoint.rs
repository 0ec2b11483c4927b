//! Binary particle dumps.
//!
//! Layout (little endian): magic `BPICPART`, format version `u32`, particle
//! count `u64`, bytes per value `u8` (4 or 8), then the six arrays
//! `x, y, z, u, v, w`, each `count` values long.

use std::io::{Read, Write};
use std::path::Path;

use batchpic_core::particles::ParticleBuffer;
use batchpic_core::real::Real;

use crate::error::EngineError;

pub const MAGIC: &[u8; 8] = b"BPICPART";
pub const VERSION: u32 = 1;

/// Particle positions and velocities read back from a dump, widened to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleDump {
    pub bytes_per_value: u8,
    pub arrays: [Vec<f64>; 6],
}

impl ParticleDump {
    pub fn len(&self) -> usize {
        self.arrays[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn encode<P: Real>(buf: &ParticleBuffer<P>) -> Vec<u8> {
    let width = P::PRECISION.bytes();
    let mut out = Vec::with_capacity(21 + 6 * width * buf.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(buf.len() as u64).to_le_bytes());
    out.push(width as u8);
    for arr in [&buf.x, &buf.y, &buf.z, &buf.u, &buf.v, &buf.w] {
        for v in arr.iter() {
            let bits = v.to_bits_u64();
            out.extend_from_slice(&bits.to_le_bytes()[..width]);
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ParticleDump, EngineError> {
    let bad = |m: &str| EngineError::Format(format!("particle dump: {m}"));
    if bytes.len() < 21 || &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let width = bytes[20];
    if width != 4 && width != 8 {
        return Err(bad(&format!("unsupported value width {width}")));
    }
    let w = width as usize;
    let body = &bytes[21..];
    if body.len() != 6 * n * w {
        return Err(bad(&format!(
            "expected {} payload bytes, found {}",
            6 * n * w,
            body.len()
        )));
    }
    let arrays = std::array::from_fn(|a| {
        body[a * n * w..(a + 1) * n * w]
            .chunks_exact(w)
            .map(|c| {
                if w == 8 {
                    f64::from_le_bytes(c.try_into().unwrap())
                } else {
                    f32::from_le_bytes(c.try_into().unwrap()) as f64
                }
            })
            .collect()
    });
    Ok(ParticleDump {
        bytes_per_value: width,
        arrays,
    })
}

pub fn write_particle_dump<P: Real>(
    buf: &ParticleBuffer<P>,
    path: impl AsRef<Path>,
) -> Result<(), EngineError> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| EngineError::io(path, e))?;
    f.write_all(&encode(buf))
        .map_err(|e| EngineError::io(path, e))
}

pub fn read_particle_dump(path: impl AsRef<Path>) -> Result<ParticleDump, EngineError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| EngineError::io(path, e))?;
    decode(&bytes)
}
