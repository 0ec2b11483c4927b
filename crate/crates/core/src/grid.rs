//! Uniform Cartesian grid geometry.
//!
//! Nodes are numbered x-fastest: `index = i + (nx+1) * (j + (ny+1) * k)`.
//! On a periodic axis node `n` is the image of node `0`; arrays keep both
//! entries and [`GridGeometry::sync_periodic`] copies the former into the
//! latter. Operators and reductions that must not double count work over
//! [`GridGeometry::unique_nodes`].

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Reflecting,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Reflecting => "reflecting",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "periodic" => Some(Boundary::Periodic),
            "reflecting" => Some(Boundary::Reflecting),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    /// Cell counts.
    pub cells: [usize; 3],
    /// Cell spacings.
    pub spacing: [f64; 3],
    /// Domain lengths, `cells[a] as f64 * spacing[a]`.
    pub lengths: [f64; 3],
    pub origin: [f64; 3],
    pub boundary: [Boundary; 3],
}

impl GridGeometry {
    pub fn new(
        cells: [usize; 3],
        lengths: [f64; 3],
        origin: [f64; 3],
        boundary: [Boundary; 3],
    ) -> Result<Self> {
        const NAMES: [&str; 3] = ["x", "y", "z"];
        for a in 0..3 {
            if cells[a] == 0 {
                return Err(Error::config(
                    alloc::format!("grid.n{}", NAMES[a]),
                    "cell count must be positive",
                ));
            }
            if !(lengths[a] > 0.0 && lengths[a].is_finite()) {
                return Err(Error::config(
                    alloc::format!("grid.l{}", NAMES[a]),
                    "domain length must be positive and finite",
                ));
            }
            if !origin[a].is_finite() {
                return Err(Error::config(
                    alloc::format!("grid.origin_{}", NAMES[a]),
                    "origin must be finite",
                ));
            }
        }
        let spacing = [
            lengths[0] / cells[0] as f64,
            lengths[1] / cells[1] as f64,
            lengths[2] / cells[2] as f64,
        ];
        Ok(Self {
            cells,
            spacing,
            lengths,
            origin,
            boundary,
        })
    }

    /// Fully periodic box with the origin at zero.
    pub fn periodic(cells: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        Self::new(cells, lengths, [0.0; 3], [Boundary::Periodic; 3])
    }

    pub fn nodes(&self) -> [usize; 3] {
        [self.cells[0] + 1, self.cells[1] + 1, self.cells[2] + 1]
    }

    pub fn node_count(&self) -> usize {
        let [a, b, c] = self.nodes();
        a * b * c
    }

    pub fn cell_count(&self) -> usize {
        self.cells[0] * self.cells[1] * self.cells[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Linear node index of `(i, j, k)`.
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        let [nx, ny, nz] = self.cells;
        if i > nx || j > ny || k > nz {
            return Err(Error::Index {
                i,
                j,
                k,
                nx,
                ny,
                nz,
            });
        }
        Ok(self.node_index_unchecked(i, j, k))
    }

    #[inline(always)]
    pub fn node_index_unchecked(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.cells[0] + 1) * (j + (self.cells[1] + 1) * k)
    }

    /// Inverse of [`node_index`](Self::node_index).
    pub fn node_triple(&self, index: usize) -> [usize; 3] {
        let sx = self.cells[0] + 1;
        let sy = self.cells[1] + 1;
        [index % sx, (index / sx) % sy, index / (sx * sy)]
    }

    #[inline(always)]
    pub fn cell_linear(&self, cell: [usize; 3]) -> usize {
        cell[0] + self.cells[0] * (cell[1] + self.cells[1] * cell[2])
    }

    /// Cell containing `position`; positions on the upper face land in the last
    /// cell.
    pub fn cell_of(&self, position: [f64; 3]) -> Result<[usize; 3]> {
        let mut cell = [0usize; 3];
        for a in 0..3 {
            let rel = position[a] - self.origin[a];
            if !(rel >= 0.0 && rel <= self.lengths[a]) {
                return Err(domain_error(position));
            }
            let i = libm::floor(rel / self.spacing[a]) as usize;
            cell[a] = i.min(self.cells[a] - 1);
        }
        Ok(cell)
    }

    pub fn node_position(&self, axis: Axis, i: usize) -> f64 {
        let a = axis as usize;
        self.origin[a] + i as f64 * self.spacing[a]
    }

    /// Number of distinct nodes along `axis`.
    pub fn unique_extent(&self, axis: usize) -> usize {
        match self.boundary[axis] {
            Boundary::Periodic => self.cells[axis],
            Boundary::Reflecting => self.cells[axis] + 1,
        }
    }

    /// Maps a node coordinate to its canonical (deposit target) coordinate.
    #[inline(always)]
    pub fn canonical(&self, axis: usize, i: usize) -> usize {
        if self.boundary[axis] == Boundary::Periodic && i == self.cells[axis] {
            0
        } else {
            i
        }
    }

    /// Control length of node `i` along `axis`: the full spacing, halved at
    /// reflecting walls.
    #[inline]
    pub fn control_length(&self, axis: usize, i: usize) -> f64 {
        let h = self.spacing[axis];
        match self.boundary[axis] {
            Boundary::Reflecting if i == 0 || i == self.cells[axis] => 0.5 * h,
            _ => h,
        }
    }

    pub fn control_volume(&self, i: usize, j: usize, k: usize) -> f64 {
        self.control_length(0, i) * self.control_length(1, j) * self.control_length(2, k)
    }

    /// Control volume for every node (full array, images included).
    pub fn control_volumes(&self) -> Vec<f64> {
        let [sx, sy, sz] = self.nodes();
        let mut out = Vec::with_capacity(self.node_count());
        for k in 0..sz {
            for j in 0..sy {
                for i in 0..sx {
                    out.push(self.control_volume(i, j, k));
                }
            }
        }
        out
    }

    /// Full-array indices of the distinct nodes, in x-fastest order.
    pub fn unique_nodes(&self) -> Vec<usize> {
        let ux = self.unique_extent(0);
        let uy = self.unique_extent(1);
        let uz = self.unique_extent(2);
        let mut out = Vec::with_capacity(ux * uy * uz);
        for k in 0..uz {
            for j in 0..uy {
                for i in 0..ux {
                    out.push(self.node_index_unchecked(i, j, k));
                }
            }
        }
        out
    }

    /// Copies node 0 onto its periodic image node `n` on every periodic axis.
    pub fn sync_periodic<T: Copy>(&self, values: &mut [T]) {
        let [sx, sy, sz] = self.nodes();
        let [nx, ny, nz] = self.cells;
        if self.boundary[0] == Boundary::Periodic {
            for k in 0..sz {
                for j in 0..sy {
                    let src = self.node_index_unchecked(0, j, k);
                    values[src + nx] = values[src];
                }
            }
        }
        if self.boundary[1] == Boundary::Periodic {
            for k in 0..sz {
                for i in 0..sx {
                    values[self.node_index_unchecked(i, ny, k)] =
                        values[self.node_index_unchecked(i, 0, k)];
                }
            }
        }
        if self.boundary[2] == Boundary::Periodic {
            for j in 0..sy {
                for i in 0..sx {
                    values[self.node_index_unchecked(i, j, nz)] =
                        values[self.node_index_unchecked(i, j, 0)];
                }
            }
        }
    }

    /// For each axis, whether the node lies on one of that axis's reflecting
    /// faces.
    pub fn wall_axes(&self, i: usize, j: usize, k: usize) -> [bool; 3] {
        let t = [i, j, k];
        core::array::from_fn(|a| {
            self.boundary[a] == Boundary::Reflecting && (t[a] == 0 || t[a] == self.cells[a])
        })
    }

    pub fn has_walls(&self) -> bool {
        self.boundary.contains(&Boundary::Reflecting)
    }

    /// Number of sub-lattices decoupled by the wide central-difference
    /// stencil: two along every periodic axis with an even cell count.
    pub fn parity_classes(&self) -> usize {
        (0..3)
            .map(|a| if self.parity_split(a) { 2 } else { 1 })
            .product()
    }

    /// Sub-lattice of the node at `(i, j, k)`, in `0..parity_classes()`.
    pub fn parity_class(&self, i: usize, j: usize, k: usize) -> usize {
        let mut class = 0;
        let mut stride = 1;
        for (a, idx) in [i, j, k].into_iter().enumerate() {
            if self.parity_split(a) {
                class += stride * (idx & 1);
                stride *= 2;
            }
        }
        class
    }

    fn parity_split(&self, axis: usize) -> bool {
        self.boundary[axis] == Boundary::Periodic && self.cells[axis] % 2 == 0
    }
}

pub(crate) fn domain_error(position: [f64; 3]) -> Error {
    Error::Domain {
        x: position[0],
        y: position[1],
        z: position[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> GridGeometry {
        GridGeometry::periodic([2, 2, 2], [1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn node_index_corners() {
        let g = GridGeometry::new(
            [4, 3, 5],
            [1.0, 2.0, 3.0],
            [0.0; 3],
            [Boundary::Reflecting; 3],
        )
        .unwrap();
        assert_eq!(g.node_index(0, 0, 0).unwrap(), 0);
        assert_eq!(g.node_index(4, 3, 5).unwrap(), 5 * 4 * 6 - 1);
        assert!(matches!(g.node_index(5, 0, 0), Err(Error::Index { .. })));
    }

    #[test]
    fn node_index_is_a_bijection_on_2x2x2() {
        let g = small();
        let mut seen = [false; 27];
        for k in 0..3 {
            for j in 0..3 {
                for i in 0..3 {
                    let idx = g.node_index(i, j, k).unwrap();
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(g.node_triple(idx), [i, j, k]);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(g.node_index(1, 0, 0).unwrap(), 1);
    }

    #[test]
    fn cell_of_conventions() {
        let g = GridGeometry::periodic([4, 4, 4], [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.cell_of([0.0; 3]).unwrap(), [0, 0, 0]);
        assert_eq!(g.cell_of([1.0; 3]).unwrap(), [3, 3, 3]);
        assert_eq!(g.cell_of([0.3, 0.0, 0.0]).unwrap(), [1, 0, 0]);
        assert!(matches!(
            g.cell_of([1.0001, 0.5, 0.5]),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            g.cell_of([0.5, -1e-9, 0.5]),
            Err(Error::Domain { .. })
        ));
        assert!(g.cell_of([f64::NAN, 0.5, 0.5]).is_err());
    }

    #[test]
    fn control_volumes_tile_the_box() {
        let g = GridGeometry::new(
            [4, 3, 2],
            [2.0, 1.5, 1.0],
            [0.0; 3],
            [Boundary::Periodic, Boundary::Reflecting, Boundary::Periodic],
        )
        .unwrap();
        let v = g.control_volumes();
        let total: f64 = g.unique_nodes().iter().map(|&n| v[n]).sum();
        assert!((total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn parity_classes_only_for_even_periodic_axes() {
        let g = GridGeometry::new(
            [4, 3, 2],
            [1.0; 3],
            [0.0; 3],
            [Boundary::Periodic, Boundary::Periodic, Boundary::Reflecting],
        )
        .unwrap();
        assert_eq!(g.parity_classes(), 2);
        assert_eq!(g.parity_class(1, 1, 1), 1);
        assert_eq!(g.parity_class(2, 1, 1), 0);
    }

    proptest! {
        #[test]
        fn cell_nodes_bound_position(
            x in 0.0f64..=1.0, y in 0.0f64..=2.0, z in 0.0f64..=0.5,
            nx in 1usize..9, ny in 1usize..9, nz in 1usize..9,
        ) {
            let g = GridGeometry::new(
                [nx, ny, nz], [1.0, 2.0, 0.5], [0.0; 3], [Boundary::Periodic; 3],
            ).unwrap();
            let c = g.cell_of([x, y, z]).unwrap();
            for (a, p) in [x, y, z].into_iter().enumerate() {
                let lo = g.origin[a] + c[a] as f64 * g.spacing[a];
                let hi = g.origin[a] + (c[a] + 1) as f64 * g.spacing[a];
                prop_assert!(lo <= p * (1.0 + 1e-15) && p <= hi * (1.0 + 1e-15));
            }
        }

        #[test]
        fn node_index_round_trips(
            nx in 1usize..6, ny in 1usize..6, nz in 1usize..6, seed in 0usize..1000,
        ) {
            let g = GridGeometry::periodic([nx, ny, nz], [1.0; 3]).unwrap();
            let idx = seed % g.node_count();
            let [i, j, k] = g.node_triple(idx);
            prop_assert_eq!(g.node_index(i, j, k).unwrap(), idx);
        }
    }
}
