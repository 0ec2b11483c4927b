use alloc::vec;
use alloc::vec::Vec;

use super::ParticleBuffer;
use crate::error::Result;
use crate::grid::GridGeometry;
use crate::mover::Locator;
use crate::real::Real;

/// Linear cell index of every particle.
pub fn cell_keys<P: Real>(buf: &ParticleBuffer<P>, geom: &GridGeometry) -> Result<Vec<usize>> {
    let loc = Locator::<P>::new(geom);
    (0..buf.len())
        .map(|i| {
            loc.locate(buf.position(i))
                .map(|(c, _)| geom.cell_linear(c))
        })
        .collect()
}

/// Stable counting sort of the buffer by linear cell index.
pub fn sort_by_cell<P: Real>(buf: &mut ParticleBuffer<P>, geom: &GridGeometry) -> Result<()> {
    let keys = cell_keys(buf, geom)?;
    let mut offsets = vec![0usize; geom.cell_count() + 1];
    for &k in &keys {
        offsets[k + 1] += 1;
    }
    for c in 0..geom.cell_count() {
        offsets[c + 1] += offsets[c];
    }
    // dest[i] = new slot of particle i
    let mut dest = vec![0usize; keys.len()];
    for (i, &k) in keys.iter().enumerate() {
        dest[i] = offsets[k];
        offsets[k] += 1;
    }
    let mut scratch = vec![P::zero(); keys.len()];
    for arr in [
        &mut buf.x, &mut buf.y, &mut buf.z, &mut buf.u, &mut buf.v, &mut buf.w, &mut buf.q,
    ] {
        for (i, &d) in dest.iter().enumerate() {
            scratch[d] = arr[i];
        }
        core::mem::swap(arr, &mut scratch);
    }
    Ok(())
}
