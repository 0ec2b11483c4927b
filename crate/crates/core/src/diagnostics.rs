//! Precision hand-off, cross-run comparisons and energy diagnostics. All
//! reductions accumulate in `f64` regardless of storage precision.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::deck::SpeciesParams;
use crate::error::{Error, Result};
use crate::fields::FieldGrid;
use crate::grid::GridGeometry;
use crate::particles::ParticleBuffer;
use crate::real::Real;
use crate::solver::gauss_residual;

/// Round-to-nearest conversion between storage precisions (identity when
/// `A == B`).
pub fn cast_boundary<A: Real, B: Real>(values: &[A]) -> Vec<B> {
    values.iter().map(|v| v.cast::<B>()).collect()
}

/// Pointwise difference between two grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorNorm {
    /// `sqrt(sum (a_i - b_i)^2)`.
    pub l2: f64,
    pub max_abs: f64,
    /// `|a_i - b_i|` per entry.
    pub map: Vec<f64>,
}

pub fn grid_error_norm<A: Real, B: Real>(a: &[A], b: &[B]) -> Result<ErrorNorm> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let map: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| libm::fabs(x.as_f64() - y.as_f64()))
        .collect();
    let l2 = libm::sqrt(map.iter().map(|d| d * d).sum());
    let max_abs = map.iter().cloned().fold(0.0, f64::max);
    Ok(ErrorNorm { l2, max_abs, map })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    pub cycle: usize,
    /// `sum (|E|^2 + |B|^2) V / 8 pi` over distinct nodes.
    pub field: f64,
    /// `sum m |v|^2 / 2` per species.
    pub kinetic: Vec<f64>,
    pub total: f64,
}

pub fn field_energy<F: Real>(fields: &FieldGrid<F>, geom: &GridGeometry) -> f64 {
    let mut sum = 0.0;
    for n in geom.unique_nodes() {
        let [i, j, k] = geom.node_triple(n);
        let mut sq = 0.0;
        for d in 0..3 {
            let e = fields.e[d][n].as_f64();
            let b = fields.b[d][n].as_f64();
            sq += e * e + b * b;
        }
        sum += sq * geom.control_volume(i, j, k);
    }
    sum / (8.0 * PI)
}

/// Kinetic energy of one buffer. Macro-particle mass is `q_p / (q / m)`.
pub fn kinetic_energy<P: Real>(buf: &ParticleBuffer<P>, species: &SpeciesParams) -> f64 {
    let inv_qom = 1.0 / species.charge_to_mass();
    let mut sum = 0.0;
    for i in 0..buf.len() {
        let [u, v, w] = buf.velocity(i).map(P::as_f64);
        sum += buf.q[i].as_f64() * inv_qom * (u * u + v * v + w * w);
    }
    0.5 * sum
}

pub fn energy_ledger<P: Real, F: Real>(
    cycle: usize,
    fields: &FieldGrid<F>,
    particles: &[ParticleBuffer<P>],
    species: &[SpeciesParams],
    geom: &GridGeometry,
) -> EnergyLedger {
    let field = field_energy(fields, geom);
    let kinetic: Vec<f64> = particles
        .iter()
        .map(|b| kinetic_energy(b, &species[b.species]))
        .collect();
    let total = field + kinetic.iter().sum::<f64>();
    EnergyLedger {
        cycle,
        field,
        kinetic,
        total,
    }
}

/// L2 norm of the reachable Gauss-law residual `div E - 4 pi rho`.
pub fn divergence_residual<F: Real>(
    fields: &FieldGrid<F>,
    rho: &[F],
    geom: &GridGeometry,
) -> Result<f64> {
    let r = gauss_residual(&fields.e, rho, geom)?;
    Ok(libm::sqrt(r.iter().map(|v| v * v).sum()))
}

/// Reconnected flux: half the line integral of `|B_y|` along x through the
/// mid-plane in y, averaged over z.
pub fn reconnected_flux<F: Real>(fields: &FieldGrid<F>, geom: &GridGeometry) -> f64 {
    let jc = geom.cells[1] / 2;
    let nx = geom.unique_extent(0);
    let nz = geom.unique_extent(2);
    let mut sum = 0.0;
    for k in 0..nz {
        for i in 0..nx {
            let n = geom.node_index_unchecked(i, jc, k);
            sum += libm::fabs(fields.b[1][n].as_f64()) * geom.control_length(0, i);
        }
    }
    0.5 * sum / nz as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        let n = grid_error_norm(&a, &b).unwrap();
        assert!((n.l2 - 0.2).abs() < 1e-12);
        assert!((n.max_abs - 0.1).abs() < 1e-12);
        assert_eq!(grid_error_norm(&a, &a).unwrap().l2, 0.0);
        assert!(grid_error_norm(&a, &b[..3]).is_err());
    }

    #[test]
    fn cast_pi_round_trip() {
        let v = cast_boundary::<f64, f32>(&[1.0, PI]);
        assert_eq!(v[0], 1.0f32);
        let back = cast_boundary::<f32, f64>(&v);
        assert!((back[1] - PI).abs() <= PI * 2f64.powi(-24));
    }

    #[test]
    fn kinetic_example() {
        let mut buf = ParticleBuffer::<f64>::new(0);
        buf.push([0.0; 3], [3.0, 0.0, 0.0], 2.0);
        let s = SpeciesParams::new(1.0, 1.0, 1);
        assert_eq!(kinetic_energy(&buf, &s), 9.0);
    }

    #[test]
    fn uniform_e_field_energy() {
        let g = GridGeometry::periodic([3, 2, 2], [1.0; 3]).unwrap();
        let f = FieldGrid::uniform(&g, [1.0, 0.0, 0.0], [0.0; 3]);
        assert!((field_energy(&f, &g) - 1.0 / (8.0 * PI)).abs() < 1e-15);
        let zero = FieldGrid::<f32>::zeros(&g);
        let l = energy_ledger::<f32, f32>(0, &zero, &[], &[], &g);
        assert_eq!(l.total, 0.0);
    }
}
