//! Node-centred field and moment containers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::real::{from_fixed, Precision, Real};

/// Electric and magnetic field on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid<F> {
    pub e: [Vec<F>; 3],
    pub b: [Vec<F>; 3],
}

impl<F: Real> FieldGrid<F> {
    pub fn zeros(geom: &GridGeometry) -> Self {
        let n = geom.node_count();
        Self {
            e: [vec![F::zero(); n], vec![F::zero(); n], vec![F::zero(); n]],
            b: [vec![F::zero(); n], vec![F::zero(); n], vec![F::zero(); n]],
        }
    }

    pub fn uniform(geom: &GridGeometry, e: [F; 3], b: [F; 3]) -> Self {
        let n = geom.node_count();
        Self {
            e: [vec![e[0]; n], vec![e[1]; n], vec![e[2]; n]],
            b: [vec![b[0]; n], vec![b[1]; n], vec![b[2]; n]],
        }
    }

    pub fn precision(&self) -> Precision {
        F::PRECISION
    }

    pub fn len(&self) -> usize {
        self.e[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_extents(&self, geom: &GridGeometry) -> Result<()> {
        let expected = geom.node_count();
        for arr in self.e.iter().chain(self.b.iter()) {
            if arr.len() != expected {
                return Err(Error::Shape {
                    expected,
                    actual: arr.len(),
                });
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.e
            .iter()
            .chain(self.b.iter())
            .all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Converts to another precision, rounding to nearest.
    pub fn cast<T: Real>(&self) -> FieldGrid<T> {
        let conv = |a: &Vec<F>| a.iter().map(|v| v.cast::<T>()).collect::<Vec<T>>();
        FieldGrid {
            e: [conv(&self.e[0]), conv(&self.e[1]), conv(&self.e[2])],
            b: [conv(&self.b[0]), conv(&self.b[1]), conv(&self.b[2])],
        }
    }

    /// Node-interleaved copy `[Ex, Ey, Ez, Bx, By, Bz]` used by the particle
    /// kernels; keeps the eight-node gather within a few cache lines.
    pub fn packed(&self) -> Vec<[F; 6]> {
        (0..self.len())
            .map(|n| {
                [
                    self.e[0][n],
                    self.e[1][n],
                    self.e[2][n],
                    self.b[0][n],
                    self.b[1][n],
                    self.b[2][n],
                ]
            })
            .collect()
    }
}

/// Number of deposited moment components: rho, J (3), P (6).
pub const MOMENT_COMPONENTS: usize = 10;

/// Names of the six stored pressure-tensor components.
pub const PRESSURE_COMPONENTS: [&str; 6] = ["xx", "xy", "xz", "yy", "yz", "zz"];

/// Charge density, current density and pressure-tensor density of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentGrid<P> {
    pub species: usize,
    pub rho: Vec<P>,
    pub j: [Vec<P>; 3],
    /// Symmetric tensor stored as xx, xy, xz, yy, yz, zz.
    pub p: [Vec<P>; 6],
}

impl<P: Real> MomentGrid<P> {
    pub fn zeros(geom: &GridGeometry, species: usize) -> Self {
        let n = geom.node_count();
        let z = || vec![P::zero(); n];
        Self {
            species,
            rho: z(),
            j: [z(), z(), z()],
            p: [z(), z(), z(), z(), z(), z()],
        }
    }

    pub fn precision(&self) -> Precision {
        P::PRECISION
    }

    /// Resets every component to zero.
    pub fn zero(&mut self) {
        for arr in self.components_mut() {
            arr.iter_mut().for_each(|v| *v = P::zero());
        }
    }

    pub fn components(&self) -> [&Vec<P>; MOMENT_COMPONENTS] {
        let [jx, jy, jz] = &self.j;
        let [p0, p1, p2, p3, p4, p5] = &self.p;
        [&self.rho, jx, jy, jz, p0, p1, p2, p3, p4, p5]
    }

    pub fn components_mut(&mut self) -> [&mut Vec<P>; MOMENT_COMPONENTS] {
        let [jx, jy, jz] = &mut self.j;
        let [p0, p1, p2, p3, p4, p5] = &mut self.p;
        [&mut self.rho, jx, jy, jz, p0, p1, p2, p3, p4, p5]
    }

    pub fn cast<T: Real>(&self) -> MomentGrid<T> {
        let conv = |a: &Vec<P>| a.iter().map(|v| v.cast::<T>()).collect::<Vec<T>>();
        MomentGrid {
            species: self.species,
            rho: conv(&self.rho),
            j: [conv(&self.j[0]), conv(&self.j[1]), conv(&self.j[2])],
            p: [
                conv(&self.p[0]),
                conv(&self.p[1]),
                conv(&self.p[2]),
                conv(&self.p[3]),
                conv(&self.p[4]),
                conv(&self.p[5]),
            ],
        }
    }

    /// Adds `other` component-wise (used to form all-species totals).
    pub fn accumulate(&mut self, other: &MomentGrid<P>) {
        for (dst, src) in self.components_mut().into_iter().zip(other.components()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d = *d + *s;
            }
        }
    }
}

/// Exact, order-independent accumulator for raw moment sums.
///
/// Every contribution is split into two fixed-point words (see
/// [`Real::to_fixed`]) and summed with wrapping integer arithmetic, so any
/// partition of the particles into batches, workers, or groups produces the
/// same bits after [`merge`](Self::merge) and [`finish`](Self::finish).
/// Storage is node-major: `2 * MOMENT_COMPONENTS` words per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    pub species: usize,
    words: Vec<[i64; 2 * MOMENT_COMPONENTS]>,
}

impl MomentAccumulator {
    pub fn new(geom: &GridGeometry, species: usize) -> Self {
        Self {
            species,
            words: vec![[0; 2 * MOMENT_COMPONENTS]; geom.node_count()],
        }
    }

    pub fn zero(&mut self) {
        self.words
            .iter_mut()
            .for_each(|w| *w = [0; 2 * MOMENT_COMPONENTS]);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| w.iter().all(|&v| v == 0))
    }

    /// Adds raw (not volume-normalised) contributions to one node.
    #[inline(always)]
    pub fn add<P: Real>(&mut self, node: usize, values: &[P; MOMENT_COMPONENTS]) {
        let slot = &mut self.words[node];
        for (c, v) in values.iter().enumerate() {
            let (hi, lo) = v.to_fixed();
            slot[2 * c] = slot[2 * c].wrapping_add(hi);
            slot[2 * c + 1] = slot[2 * c + 1].wrapping_add(lo);
        }
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        for (dst, src) in self.words.iter_mut().zip(other.words.iter()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d = d.wrapping_add(*s);
            }
        }
    }

    /// Raw deposited sum of component `c` at `node`.
    pub fn raw(&self, node: usize, c: usize) -> f64 {
        let w = &self.words[node];
        from_fixed(w[2 * c], w[2 * c + 1])
    }

    /// Converts to densities by dividing by the node control volume, then
    /// fills periodic image nodes.
    pub fn finish<P: Real>(&self, geom: &GridGeometry) -> MomentGrid<P> {
        let mut out = MomentGrid::<P>::zeros(geom, self.species);
        let volumes = geom.control_volumes();
        {
            let mut comps = out.components_mut();
            for &node in &geom.unique_nodes() {
                let inv = 1.0 / volumes[node];
                for (c, arr) in comps.iter_mut().enumerate() {
                    arr[node] = P::from_f64(self.raw(node, c) * inv);
                }
            }
        }
        for arr in out.components_mut() {
            geom.sync_periodic(arr);
        }
        out
    }
}
