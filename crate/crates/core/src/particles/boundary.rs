use alloc::format;

use super::ParticleBuffer;
use crate::error::{Error, Result};
use crate::grid::{Boundary, GridGeometry};
use crate::real::Real;

/// Domain bounds in particle precision.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryBox<P> {
    pub origin: [P; 3],
    pub length: [P; 3],
    pub kind: [Boundary; 3],
}

impl<P: Real> BoundaryBox<P> {
    pub fn new(geom: &GridGeometry) -> Self {
        Self {
            origin: geom.origin.map(P::from_f64),
            length: geom.lengths.map(P::from_f64),
            kind: geom.boundary,
        }
    }

    /// Brings one particle back into the box: periodic axes wrap by one
    /// length, reflecting axes mirror the position and flip the normal
    /// velocity. Positions already inside (faces included) are untouched.
    #[inline]
    pub fn apply(&self, pos: &mut [P; 3], vel: &mut [P; 3]) -> Result<()> {
        for a in 0..3 {
            let rel = pos[a] - self.origin[a];
            let l = self.length[a];
            if rel >= P::zero() && rel <= l {
                continue;
            }
            if !(rel >= -l && rel < l + l) {
                return Err(runaway(a, pos[a]));
            }
            let fixed = match self.kind[a] {
                Boundary::Periodic => {
                    if rel < P::zero() {
                        rel + l
                    } else {
                        rel - l
                    }
                }
                Boundary::Reflecting => {
                    vel[a] = -vel[a];
                    if rel < P::zero() {
                        -rel
                    } else {
                        (l + l) - rel
                    }
                }
            };
            pos[a] = self.origin[a] + fixed;
        }
        Ok(())
    }

    /// Image of `pos` inside the box, without touching any velocity. Used for
    /// the mover's midpoint field evaluation.
    #[inline]
    pub fn wrap_position(&self, pos: [P; 3]) -> Result<[P; 3]> {
        let mut p = pos;
        let mut scratch = [P::zero(); 3];
        self.apply(&mut p, &mut scratch)?;
        Ok(p)
    }
}

fn runaway(axis: usize, value: impl Real) -> Error {
    Error::Integrity(format!(
        "coordinate {} = {} is a full domain length or more outside the box",
        ["x", "y", "z"][axis],
        value
    ))
}

/// Applies the boundary conditions of `geom` to every particle.
pub fn apply_boundaries<P: Real>(buf: &mut ParticleBuffer<P>, geom: &GridGeometry) -> Result<()> {
    let bb = BoundaryBox::<P>::new(geom);
    for i in 0..buf.len() {
        let mut pos = buf.position(i);
        let mut vel = buf.velocity(i);
        bb.apply(&mut pos, &mut vel)?;
        buf.x[i] = pos[0];
        buf.y[i] = pos[1];
        buf.z[i] = pos[2];
        buf.u[i] = vel[0];
        buf.v[i] = vel[1];
        buf.w[i] = vel[2];
    }
    Ok(())
}
