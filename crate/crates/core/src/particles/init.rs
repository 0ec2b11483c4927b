//! Initial conditions: drifting Maxwellians and the GEM Harris sheet.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ParticleBuffer;
use crate::deck::{GemParams, InitKind, Population, SimulationDeck, SpeciesParams};
use crate::error::{Error, Result};
use crate::fields::FieldGrid;
use crate::grid::GridGeometry;
use crate::real::Real;

/// Number density as a function of position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityProfile {
    Uniform(f64),
    /// `peak * sech^2((y - center) / half_width)`.
    HarrisSheet {
        peak: f64,
        center: f64,
        half_width: f64,
    },
}

impl DensityProfile {
    pub fn at(&self, y: f64) -> f64 {
        match *self {
            DensityProfile::Uniform(n) => n,
            DensityProfile::HarrisSheet {
                peak,
                center,
                half_width,
            } => {
                let s = 1.0 / libm::cosh((y - center) / half_width);
                peak * s * s
            }
        }
    }

    /// Exact number of particles (physical) inside `cell`.
    pub fn cell_integral(&self, geom: &GridGeometry, cell: [usize; 3]) -> f64 {
        let [dx, dy, dz] = geom.spacing;
        match *self {
            DensityProfile::Uniform(n) => n * dx * dy * dz,
            DensityProfile::HarrisSheet {
                peak,
                center,
                half_width,
            } => {
                let y0 = geom.origin[1] + cell[1] as f64 * dy;
                let y1 = y0 + dy;
                let t = |y: f64| libm::tanh((y - center) / half_width);
                peak * half_width * (t(y1) - t(y0)) * dx * dz
            }
        }
    }
}

const POSITIONS: u64 = 0;
const VELOCITIES: u64 = 1;

fn cell_rng(seed: u64, stream: usize, cell: usize, kind: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(cell as u64).to_le_bytes());
    key[24..].copy_from_slice(&kind.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Places exactly `particles_per_cell` particles uniformly inside every cell,
/// with velocities drawn from the species' drifting Maxwellian.
///
/// Each cell draws positions from a stream keyed by `(seed, position_stream,
/// cell)` and velocities from one keyed by `(seed, species_index, cell)`, so
/// the result never depends on evaluation order. Species sharing a
/// `position_stream` get identical positions (a quiet start: equal and
/// opposite charges cancel exactly at cycle zero). Particle
/// charges carry the macro-particle weight: the charge of a cell's particles
/// sums to `species.charge` times the cell integral of `profile`.
pub fn init_maxwellian<P: Real>(
    species: &SpeciesParams,
    species_index: usize,
    position_stream: usize,
    geom: &GridGeometry,
    profile: &DensityProfile,
    seed: u64,
) -> ParticleBuffer<P> {
    let ppc = species.particles_per_cell;
    let mut buf = ParticleBuffer::with_capacity(species_index, ppc * geom.cell_count());
    let [nx, ny, nz] = geom.cells;
    let h = geom.spacing;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let cell = [i, j, k];
                let c = geom.cell_linear(cell);
                let mut place = cell_rng(seed, position_stream, c, POSITIONS);
                let mut draw = cell_rng(seed, species_index, c, VELOCITIES);
                let q = species.charge * profile.cell_integral(geom, cell) / ppc as f64;
                for _ in 0..ppc {
                    let mut pos = [0.0; 3];
                    for a in 0..3 {
                        let u: f64 = place.random();
                        pos[a] = geom.origin[a] + (cell[a] as f64 + u) * h[a];
                    }
                    let mut vel = [0.0; 3];
                    for a in 0..3 {
                        let n: f64 = draw.sample(StandardNormal);
                        vel[a] = species.drift[a] + species.thermal[a] * n;
                    }
                    buf.push(pos.map(P::from_f64), vel.map(P::from_f64), P::from_f64(q));
                }
            }
        }
    }
    buf
}

/// Particles and fields at cycle zero.
#[derive(Debug, Clone)]
pub struct GemState<P, F> {
    pub particles: Vec<ParticleBuffer<P>>,
    pub fields: FieldGrid<F>,
}

/// Uniform plasma: every species at its configured density, uniform `b`.
pub fn init_uniform<P: Real, F: Real>(deck: &SimulationDeck, b: [f64; 3]) -> GemState<P, F> {
    let geom = &deck.geometry;
    let particles = deck
        .species
        .iter()
        .enumerate()
        .map(|(s, sp)| {
            init_maxwellian(
                sp,
                s,
                s,
                geom,
                &DensityProfile::Uniform(sp.density),
                deck.seed,
            )
        })
        .collect();
    GemState {
        particles,
        fields: FieldGrid::uniform(geom, [F::zero(); 3], b.map(F::from_f64)),
    }
}

/// Temperature `m * sigma^2`, averaged over the three axes.
fn temperature(s: &SpeciesParams) -> f64 {
    let [a, b, c] = s.thermal;
    s.mass * (a * a + b * b + c * c) / 3.0
}

/// Harris-sheet equilibrium with the GEM flux perturbation.
///
/// Needs exactly four species: a negative and a positive `sheet` population
/// and a negative and a positive `background` population. The peak sheet
/// density follows from pressure balance, `n0 (T_i + T_e) = B0^2 / 8 pi`, and the
/// sheet drifts (along z) from current balance, `w_s = -2 c T_s / (q_s B0 L)`.
/// Any drift configured on sheet species is replaced.
pub fn init_gem<P: Real, F: Real>(deck: &SimulationDeck, seed: u64) -> Result<GemState<P, F>> {
    let gem = match &deck.init {
        InitKind::Gem(g) => g.clone(),
        InitKind::Uniform { .. } => GemParams::default(),
    };
    if deck.species.len() != 4 {
        return Err(Error::config(
            "species",
            alloc::format!("GEM setup needs 4 species, deck has {}", deck.species.len()),
        ));
    }
    let sheet: Vec<usize> = (0..4)
        .filter(|&s| deck.species[s].population == Population::Sheet)
        .collect();
    if sheet.len() != 2 || (0..4).filter(|s| !sheet.contains(s)).count() != 2 {
        return Err(Error::config(
            "species",
            "GEM setup needs two sheet and two background species",
        ));
    }
    let (q0, q1) = (deck.species[sheet[0]].charge, deck.species[sheet[1]].charge);
    if q0 != -q1 {
        return Err(Error::config(
            "species",
            "sheet species must carry opposite charges of equal magnitude",
        ));
    }
    let t_sheet: f64 = sheet.iter().map(|&s| temperature(&deck.species[s])).sum();
    if !(t_sheet > 0.0) {
        return Err(Error::config(
            "species",
            "sheet species need a nonzero thermal velocity",
        ));
    }

    let geom = &deck.geometry;
    let n0 = gem.b0 * gem.b0 / (8.0 * PI * t_sheet);
    let yc = geom.origin[1] + 0.5 * geom.lengths[1];
    let harris = DensityProfile::HarrisSheet {
        peak: n0,
        center: yc,
        half_width: gem.half_width,
    };
    let background = DensityProfile::Uniform(gem.background_fraction * n0);

    let mut particles = Vec::with_capacity(4);
    for (s, sp) in deck.species.iter().enumerate() {
        let (params, profile) = match sp.population {
            Population::Sheet => {
                let mut p = sp.clone();
                let ws = -2.0 * deck.c * temperature(sp) / (sp.charge * gem.b0 * gem.half_width);
                p.drift = [0.0, 0.0, ws];
                (p, harris)
            }
            Population::Background => (sp.clone(), background),
        };
        let stream = match sp.population {
            Population::Sheet => 0,
            Population::Background => 1,
        };
        particles.push(init_maxwellian::<P>(
            &params, s, stream, geom, &profile, seed,
        ));
    }

    let mut fields = FieldGrid::<F>::zeros(geom);
    let [sx, sy, sz] = geom.nodes();
    for k in 0..sz {
        for j in 0..sy {
            for i in 0..sx {
                let n = geom.node_index_unchecked(i, j, k);
                let x = geom.node_position(crate::grid::Axis::X, i);
                let y = geom.node_position(crate::grid::Axis::Y, j);
                let [bx, by] = gem_magnetic_field(&gem, geom, x, y);
                fields.b[0][n] = F::from_f64(bx);
                fields.b[1][n] = F::from_f64(by);
            }
        }
    }
    Ok(GemState { particles, fields })
}

/// In-plane GEM magnetic field at `(x, y)`: Harris profile plus the flux
/// perturbation `psi = psi0 cos(2 pi x'/Lx) cos(pi y'/Ly)`, `B = grad psi x z`.
pub fn gem_magnetic_field(gem: &GemParams, geom: &GridGeometry, x: f64, y: f64) -> [f64; 2] {
    let lx = geom.lengths[0];
    let ly = geom.lengths[1];
    let xp = x - (geom.origin[0] + 0.5 * lx);
    let yp = y - (geom.origin[1] + 0.5 * ly);
    let psi0 = gem.perturbation * gem.b0;
    let kx = 2.0 * PI / lx;
    let ky = PI / ly;
    let bx = gem.b0 * libm::tanh(yp / gem.half_width)
        - psi0 * ky * libm::cos(kx * xp) * libm::sin(ky * yp);
    let by = psi0 * kx * libm::sin(kx * xp) * libm::cos(ky * yp);
    [bx, by]
}
