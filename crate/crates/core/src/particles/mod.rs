//! Structure-of-arrays particle storage and the operations that act on whole
//! buffers: batching, boundary conditions, sorting, initial conditions.

mod boundary;
mod init;
mod sort;

use alloc::vec::Vec;

pub use boundary::{apply_boundaries, BoundaryBox};
pub use init::{
    gem_magnetic_field, init_gem, init_maxwellian, init_uniform, DensityProfile, GemState,
};
pub use sort::{cell_keys, sort_by_cell};

use crate::error::{Error, Result};
use crate::real::Real;

/// One species' particles. Each attribute is a separate contiguous array.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleBuffer<P> {
    pub species: usize,
    pub x: Vec<P>,
    pub y: Vec<P>,
    pub z: Vec<P>,
    pub u: Vec<P>,
    pub v: Vec<P>,
    pub w: Vec<P>,
    /// Per-particle charge (macro-particle weight times species charge).
    pub q: Vec<P>,
}

impl<P: Real> ParticleBuffer<P> {
    pub fn new(species: usize) -> Self {
        Self {
            species,
            x: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
            w: Vec::new(),
            q: Vec::new(),
        }
    }

    pub fn with_capacity(species: usize, n: usize) -> Self {
        Self {
            species,
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn push(&mut self, pos: [P; 3], vel: [P; 3], q: P) {
        self.x.push(pos[0]);
        self.y.push(pos[1]);
        self.z.push(pos[2]);
        self.u.push(vel[0]);
        self.v.push(vel[1]);
        self.w.push(vel[2]);
        self.q.push(q);
    }

    #[inline(always)]
    pub fn position(&self, i: usize) -> [P; 3] {
        [self.x[i], self.y[i], self.z[i]]
    }

    #[inline(always)]
    pub fn velocity(&self, i: usize) -> [P; 3] {
        [self.u[i], self.v[i], self.w[i]]
    }

    pub fn check_lengths(&self) -> Result<()> {
        let n = self.len();
        for arr in [&self.y, &self.z, &self.u, &self.v, &self.w, &self.q] {
            if arr.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    actual: arr.len(),
                });
            }
        }
        Ok(())
    }

    /// Bytes held per particle across all attribute arrays.
    pub fn bytes_per_particle() -> usize {
        7 * P::PRECISION.bytes()
    }

    pub fn cast<T: Real>(&self) -> ParticleBuffer<T> {
        let conv = |a: &Vec<P>| a.iter().map(|v| v.cast::<T>()).collect::<Vec<T>>();
        ParticleBuffer {
            species: self.species,
            x: conv(&self.x),
            y: conv(&self.y),
            z: conv(&self.z),
            u: conv(&self.u),
            v: conv(&self.v),
            w: conv(&self.w),
            q: conv(&self.q),
        }
    }

    /// Mutable view of `span`.
    pub fn view_mut(&mut self, span: Span) -> BatchView<'_, P> {
        let r = span.start..span.start + span.len;
        BatchView {
            offset: span.start,
            x: &mut self.x[r.clone()],
            y: &mut self.y[r.clone()],
            z: &mut self.z[r.clone()],
            u: &mut self.u[r.clone()],
            v: &mut self.v[r.clone()],
            w: &mut self.w[r.clone()],
            q: &self.q[r],
        }
    }

    /// Disjoint mutable views, one per span of `plan`.
    pub fn split_mut(&mut self, plan: &BatchPlan) -> Vec<BatchView<'_, P>> {
        let mut views = Vec::with_capacity(plan.spans.len());
        let (mut x, mut y, mut z) = (&mut self.x[..], &mut self.y[..], &mut self.z[..]);
        let (mut u, mut v, mut w) = (&mut self.u[..], &mut self.v[..], &mut self.w[..]);
        let mut q = &self.q[..];
        let mut cursor = 0;
        for span in &plan.spans {
            debug_assert_eq!(span.start, cursor);
            let n = span.len;
            let (x0, x1) = core::mem::take(&mut x).split_at_mut(n);
            let (y0, y1) = core::mem::take(&mut y).split_at_mut(n);
            let (z0, z1) = core::mem::take(&mut z).split_at_mut(n);
            let (u0, u1) = core::mem::take(&mut u).split_at_mut(n);
            let (v0, v1) = core::mem::take(&mut v).split_at_mut(n);
            let (w0, w1) = core::mem::take(&mut w).split_at_mut(n);
            let (q0, q1) = q.split_at(n);
            views.push(BatchView {
                offset: span.start,
                x: x0,
                y: y0,
                z: z0,
                u: u0,
                v: v0,
                w: w0,
                q: q0,
            });
            (x, y, z, u, v, w, q) = (x1, y1, z1, u1, v1, w1, q1);
            cursor += n;
        }
        views
    }
}

/// Mutable window onto a contiguous run of particles.
#[derive(Debug)]
pub struct BatchView<'a, P> {
    /// Index of the first particle in the parent buffer.
    pub offset: usize,
    pub x: &'a mut [P],
    pub y: &'a mut [P],
    pub z: &'a mut [P],
    pub u: &'a mut [P],
    pub v: &'a mut [P],
    pub w: &'a mut [P],
    pub q: &'a [P],
}

impl<P> BatchView<'_, P> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn reborrow(&mut self) -> BatchView<'_, P> {
        BatchView {
            offset: self.offset,
            x: self.x,
            y: self.y,
            z: self.z,
            u: self.u,
            v: self.v,
            w: self.w,
            q: self.q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

/// Partition of one species into `M` contiguous batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub spans: Vec<Span>,
    /// Worker group executing each batch.
    pub group: Vec<usize>,
}

impl BatchPlan {
    pub fn batches(&self) -> usize {
        self.spans.len()
    }

    pub fn assign_to(mut self, group: usize) -> Self {
        self.group.iter_mut().for_each(|g| *g = group);
        self
    }
}

/// Splits `n` particles into `m` contiguous spans whose lengths differ by at
/// most one; the first `n % m` spans take the extra particle.
pub fn partition_batches(n: usize, m: usize) -> Result<BatchPlan> {
    if m == 0 {
        return Err(Error::config("pipeline.batches", "must be at least 1"));
    }
    let base = n / m;
    let extra = n % m;
    let mut spans = Vec::with_capacity(m);
    let mut start = 0;
    for b in 0..m {
        let len = base + usize::from(b < extra);
        spans.push(Span { start, len });
        start += len;
    }
    Ok(BatchPlan {
        spans,
        group: alloc::vec![0; m],
    })
}
