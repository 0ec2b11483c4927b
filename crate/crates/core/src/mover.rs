//! Fused particle kernel: trilinear gather, implicit velocity iteration,
//! position advance and moment deposition.

use crate::error::Result;
use crate::fields::{FieldGrid, MomentAccumulator, MOMENT_COMPONENTS};
use crate::grid::{domain_error, GridGeometry};
use crate::particles::{BatchView, BoundaryBox};
use crate::real::Real;

/// Maps positions to a cell and fractional offsets in precision `T`.
#[derive(Debug, Clone, Copy)]
pub struct Locator<T> {
    origin: [T; 3],
    spacing: [T; 3],
    cells: [usize; 3],
    upper: [T; 3],
    slack: T,
}

impl<T: Real> Locator<T> {
    pub fn new(geom: &GridGeometry) -> Self {
        Self {
            origin: geom.origin.map(T::from_f64),
            spacing: geom.spacing.map(T::from_f64),
            cells: geom.cells,
            upper: geom.cells.map(|n| T::from_f64(n as f64)),
            // cell units; absorbs rounding of positions sitting on the upper face
            slack: T::from_f64(1e-3),
        }
    }

    /// Cell and offsets `xi` in `[0, 1]` of `pos`.
    #[inline(always)]
    pub fn locate(&self, pos: [T; 3]) -> Result<([usize; 3], [T; 3])> {
        let mut cell = [0usize; 3];
        let mut xi = [T::zero(); 3];
        for a in 0..3 {
            let s = (pos[a] - self.origin[a]) / self.spacing[a];
            if !(s >= -self.slack && s <= self.upper[a] + self.slack) {
                return Err(domain_error(pos.map(T::as_f64)));
            }
            let i = s.floor().max(T::zero()).as_f64() as usize;
            let i = i.min(self.cells[a] - 1);
            cell[a] = i;
            xi[a] = (s - T::from_f64(i as f64)).max(T::zero()).min(T::one());
        }
        Ok((cell, xi))
    }

    #[inline(always)]
    pub fn stencil(&self, pos: [T; 3]) -> Result<WeightStencil<T>> {
        let (cell, xi) = self.locate(pos)?;
        Ok(WeightStencil::from_offsets(cell, xi))
    }
}

/// Trilinear weights of the eight corners of one cell. Corner `a + 2b + 4c`
/// is node `(i + a, j + b, k + c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStencil<T> {
    pub cell: [usize; 3],
    pub w: [T; 8],
}

impl<T: Real> WeightStencil<T> {
    #[inline(always)]
    pub fn from_offsets(cell: [usize; 3], xi: [T; 3]) -> Self {
        let one = T::one();
        let fx = [one - xi[0], xi[0]];
        let fy = [one - xi[1], xi[1]];
        let fz = [one - xi[2], xi[2]];
        let mut w = [T::zero(); 8];
        for c in 0..2 {
            for b in 0..2 {
                let yz = fy[b] * fz[c];
                for a in 0..2 {
                    w[a + 2 * b + 4 * c] = fx[a] * yz;
                }
            }
        }
        Self { cell, w }
    }

    /// Full-array node indices of the eight corners.
    #[inline(always)]
    pub fn nodes(&self, geom: &GridGeometry) -> [usize; 8] {
        corner_nodes(geom, self.cell, false)
    }
}

#[inline(always)]
fn corner_nodes(geom: &GridGeometry, cell: [usize; 3], canonical: bool) -> [usize; 8] {
    let sx = geom.cells[0] + 1;
    let sxy = sx * (geom.cells[1] + 1);
    let pick = |axis: usize| {
        let lo = cell[axis];
        let hi = if canonical {
            geom.canonical(axis, lo + 1)
        } else {
            lo + 1
        };
        [lo, hi]
    };
    let [ix, iy, iz] = [pick(0), pick(1), pick(2)];
    let mut out = [0usize; 8];
    for c in 0..2 {
        for b in 0..2 {
            for a in 0..2 {
                out[a + 2 * b + 4 * c] = ix[a] + sx * iy[b] + sxy * iz[c];
            }
        }
    }
    out
}

/// Trilinear weights of `position`.
pub fn weights<T: Real>(position: [T; 3], geom: &GridGeometry) -> Result<WeightStencil<T>> {
    Locator::new(geom).stencil(position)
}

/// Read access to node fields as `[Ex, Ey, Ez, Bx, By, Bz]`.
pub trait FieldSource<F> {
    fn node(&self, index: usize) -> [F; 6];
}

impl<F: Real> FieldSource<F> for FieldGrid<F> {
    #[inline(always)]
    fn node(&self, n: usize) -> [F; 6] {
        [
            self.e[0][n],
            self.e[1][n],
            self.e[2][n],
            self.b[0][n],
            self.b[1][n],
            self.b[2][n],
        ]
    }
}

impl<F: Real> FieldSource<F> for [[F; 6]] {
    #[inline(always)]
    fn node(&self, n: usize) -> [F; 6] {
        self[n]
    }
}

/// Fields seen by one particle, in particle precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleFieldSample<P> {
    pub e: [P; 3],
    pub b: [P; 3],
}

/// Interpolates fields to a particle. The sum is formed in field precision
/// from the position rounded to field precision, then rounded once to `P`.
#[inline(always)]
pub fn gather_with<F: Real, P: Real, S: FieldSource<F> + ?Sized>(
    position: [P; 3],
    fields: &S,
    locator: &Locator<F>,
    geom: &GridGeometry,
) -> Result<ParticleFieldSample<P>> {
    let st = locator.stencil(position.map(|v| v.cast::<F>()))?;
    let nodes = st.nodes(geom);
    let mut acc = [F::zero(); 6];
    for (corner, &n) in nodes.iter().enumerate() {
        let f = fields.node(n);
        let w = st.w[corner];
        for c in 0..6 {
            acc[c] = acc[c] + w * f[c];
        }
    }
    Ok(ParticleFieldSample {
        e: [acc[0].cast(), acc[1].cast(), acc[2].cast()],
        b: [acc[3].cast(), acc[4].cast(), acc[5].cast()],
    })
}

pub fn gather_fields<F: Real, P: Real>(
    position: [P; 3],
    fields: &FieldGrid<F>,
    geom: &GridGeometry,
) -> Result<ParticleFieldSample<P>> {
    gather_with(position, fields, &Locator::<F>::new(geom), geom)
}

#[inline(always)]
fn dot<P: Real>(a: [P; 3], b: [P; 3]) -> P {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline(always)]
fn cross<P: Real>(a: [P; 3], b: [P; 3]) -> [P; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Time-averaged velocity from the implicit midpoint rule:
/// `vt = v + qdt2m E`, `vbar = (vt + beta (vt x B + beta (vt . B) B)) / (1 + beta^2 |B|^2)`
/// with `beta = qdt2m / c`.
#[inline(always)]
pub fn corrector_velocity<P: Real>(
    v_n: [P; 3],
    sample: &ParticleFieldSample<P>,
    qdt2m: P,
    c: P,
) -> [P; 3] {
    let beta = qdt2m / c;
    corrector_beta(v_n, sample, qdt2m, beta)
}

#[inline(always)]
fn corrector_beta<P: Real>(v_n: [P; 3], s: &ParticleFieldSample<P>, qdt2m: P, beta: P) -> [P; 3] {
    let vt = [
        v_n[0] + qdt2m * s.e[0],
        v_n[1] + qdt2m * s.e[1],
        v_n[2] + qdt2m * s.e[2],
    ];
    let b = s.b;
    let vxb = cross(vt, b);
    let vdb = dot(vt, b);
    let denom = P::one() + beta * beta * dot(b, b);
    [
        (vt[0] + beta * (vxb[0] + beta * vdb * b[0])) / denom,
        (vt[1] + beta * (vxb[1] + beta * vdb * b[1])) / denom,
        (vt[2] + beta * (vxb[2] + beta * vdb * b[2])) / denom,
    ]
}

/// Per-species constants and lookup tables for the particle kernels.
pub struct PushContext<'a, P, F, S: ?Sized> {
    pub geom: &'a GridGeometry,
    pub fields: &'a S,
    field_locator: Locator<F>,
    particle_locator: Locator<P>,
    bounds: BoundaryBox<P>,
    qdt2m: P,
    beta: P,
    dt: P,
    half_dt: P,
    iterations: usize,
}

impl<'a, P: Real, F: Real, S: FieldSource<F> + ?Sized> PushContext<'a, P, F, S> {
    /// `qom` is the species charge-to-mass ratio.
    pub fn new(
        geom: &'a GridGeometry,
        fields: &'a S,
        qom: f64,
        dt: f64,
        c: f64,
        iterations: usize,
    ) -> Self {
        let qdt2m = 0.5 * qom * dt;
        Self {
            geom,
            fields,
            field_locator: Locator::new(geom),
            particle_locator: Locator::new(geom),
            bounds: BoundaryBox::new(geom),
            qdt2m: P::from_f64(qdt2m),
            beta: P::from_f64(qdt2m / c),
            dt: P::from_f64(dt),
            half_dt: P::from_f64(0.5 * dt),
            iterations,
        }
    }

    #[inline(always)]
    pub fn gather(&self, position: [P; 3]) -> Result<ParticleFieldSample<P>> {
        gather_with(position, self.fields, &self.field_locator, self.geom)
    }

    /// Predictor-corrector push of one particle. Returns `(x^{n+1}, v^{n+1})`
    /// before boundary conditions.
    #[inline(always)]
    pub fn mover_iterate(&self, x: [P; 3], v: [P; 3]) -> Result<([P; 3], [P; 3])> {
        let mut vbar = v;
        for _ in 0..self.iterations {
            let mid = [
                x[0] + vbar[0] * self.half_dt,
                x[1] + vbar[1] * self.half_dt,
                x[2] + vbar[2] * self.half_dt,
            ];
            let mid = self.bounds.wrap_position(mid)?;
            let sample = self.gather(mid)?;
            vbar = corrector_beta(v, &sample, self.qdt2m, self.beta);
        }
        let two = P::one() + P::one();
        let v_new = [
            two * vbar[0] - v[0],
            two * vbar[1] - v[1],
            two * vbar[2] - v[2],
        ];
        let x_new = [
            x[0] + vbar[0] * self.dt,
            x[1] + vbar[1] * self.dt,
            x[2] + vbar[2] * self.dt,
        ];
        Ok((x_new, v_new))
    }

    /// Push plus boundary conditions.
    #[inline(always)]
    pub fn advance(&self, x: [P; 3], v: [P; 3]) -> Result<([P; 3], [P; 3])> {
        let (mut x, mut v) = self.mover_iterate(x, v)?;
        self.bounds.apply(&mut x, &mut v)?;
        Ok((x, v))
    }

    #[inline(always)]
    pub fn deposit(&self, x: [P; 3], v: [P; 3], q: P, acc: &mut MomentAccumulator) -> Result<()> {
        deposit_with(x, v, q, acc, &self.particle_locator, self.geom)
    }

    /// Fused kernel over one batch: each particle is pushed, wrapped into the
    /// domain and deposited at its new position with its new velocity.
    pub fn move_and_deposit_batch(
        &self,
        batch: &mut BatchView<'_, P>,
        acc: &mut MomentAccumulator,
    ) -> Result<()> {
        for i in 0..batch.len() {
            let x = [batch.x[i], batch.y[i], batch.z[i]];
            let v = [batch.u[i], batch.v[i], batch.w[i]];
            let (x, v) = self.advance(x, v)?;
            batch.x[i] = x[0];
            batch.y[i] = x[1];
            batch.z[i] = x[2];
            batch.u[i] = v[0];
            batch.v[i] = v[1];
            batch.w[i] = v[2];
            self.deposit(x, v, batch.q[i], acc)?;
        }
        Ok(())
    }
}

/// Push one particle through `fields`; see [`PushContext::mover_iterate`].
pub fn mover_iterate<P: Real, F: Real>(
    x: [P; 3],
    v: [P; 3],
    fields: &FieldGrid<F>,
    qom: f64,
    dt: f64,
    c: f64,
    iterations: usize,
    geom: &GridGeometry,
) -> Result<([P; 3], [P; 3])> {
    PushContext::<P, F, FieldGrid<F>>::new(geom, fields, qom, dt, c, iterations).mover_iterate(x, v)
}

#[inline(always)]
fn deposit_with<P: Real>(
    x: [P; 3],
    v: [P; 3],
    q: P,
    acc: &mut MomentAccumulator,
    locator: &Locator<P>,
    geom: &GridGeometry,
) -> Result<()> {
    let (cell, xi) = locator.locate(x)?;
    let st = WeightStencil::from_offsets(cell, xi);
    let nodes = corner_nodes(geom, cell, true);
    for corner in 0..8 {
        let qw = q * st.w[corner];
        let (qu, qv, qz) = (qw * v[0], qw * v[1], qw * v[2]);
        let vals: [P; MOMENT_COMPONENTS] = [
            qw,
            qu,
            qv,
            qz,
            qu * v[0],
            qu * v[1],
            qu * v[2],
            qv * v[1],
            qv * v[2],
            qz * v[2],
        ];
        acc.add(nodes[corner], &vals);
    }
    Ok(())
}

/// Adds one particle's charge, current and pressure contributions to its
/// eight surrounding nodes. Volume normalisation happens in
/// [`MomentAccumulator::finish`].
pub fn deposit_moments<P: Real>(
    position: [P; 3],
    velocity: [P; 3],
    q: P,
    acc: &mut MomentAccumulator,
    geom: &GridGeometry,
) -> Result<()> {
    deposit_with(position, velocity, q, acc, &Locator::new(geom), geom)
}
