//! Run configuration.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::real::{Precision, PrecisionMode};

/// Role of a species in the GEM initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    /// Harris-sheet population carrying the equilibrium current.
    Sheet,
    /// Uniform, non-drifting background.
    Background,
}

impl Population {
    pub fn name(self) -> &'static str {
        match self {
            Population::Sheet => "sheet",
            Population::Background => "background",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sheet" => Some(Population::Sheet),
            "background" => Some(Population::Background),
            _ => None,
        }
    }
}

/// How the particle current enters the field solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldCoupling {
    /// The deposited current is a fixed source term.
    Explicit,
    /// The plasma's linear response to the new field is part of the
    /// operator; particles are pushed with `E^{n+theta}`.
    Implicit,
}

impl FieldCoupling {
    pub fn name(self) -> &'static str {
        match self {
            FieldCoupling::Explicit => "explicit",
            FieldCoupling::Implicit => "implicit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "explicit" => Some(FieldCoupling::Explicit),
            "implicit" => Some(FieldCoupling::Implicit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams {
    /// Charge of one physical particle (signed).
    pub charge: f64,
    pub mass: f64,
    pub particles_per_cell: usize,
    pub drift: [f64; 3],
    /// Per-axis standard deviation of the Maxwellian.
    pub thermal: [f64; 3],
    pub mover_iterations: usize,
    /// Number density used by uniform initialisation.
    pub density: f64,
    pub population: Population,
}

impl SpeciesParams {
    pub fn new(charge: f64, mass: f64, particles_per_cell: usize) -> Self {
        Self {
            charge,
            mass,
            particles_per_cell,
            drift: [0.0; 3],
            thermal: [0.0; 3],
            mover_iterations: 3,
            density: 1.0 / (4.0 * core::f64::consts::PI),
            population: Population::Background,
        }
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let key = |k: &str| alloc::format!("species.{index}.{k}");
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::config(key("mass"), "must be positive"));
        }
        if !self.charge.is_finite() || self.charge == 0.0 {
            return Err(Error::config(key("charge"), "must be finite and nonzero"));
        }
        if self.particles_per_cell == 0 {
            return Err(Error::config(key("ppc"), "must be at least 1"));
        }
        if self.mover_iterations == 0 {
            return Err(Error::config(key("mover_iterations"), "must be at least 1"));
        }
        if self.thermal.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::config(
                key("thermal"),
                "must be finite and nonnegative",
            ));
        }
        if self.drift.iter().any(|d| !d.is_finite()) {
            return Err(Error::config(key("drift"), "must be finite"));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::config(key("density"), "must be positive"));
        }
        Ok(())
    }
}

/// Harris-sheet parameters for the GEM reconnection setup (normalised units).
#[derive(Debug, Clone, PartialEq)]
pub struct GemParams {
    /// Asymptotic lobe field.
    pub b0: f64,
    /// Current-sheet half width.
    pub half_width: f64,
    /// Flux perturbation amplitude as a fraction of `b0`.
    pub perturbation: f64,
    /// Background density as a fraction of the peak sheet density.
    pub background_fraction: f64,
}

impl Default for GemParams {
    fn default() -> Self {
        Self {
            b0: 0.0195,
            half_width: 0.5,
            perturbation: 0.1,
            background_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    Gem(GemParams),
    /// Uniform Maxwellian plasma in a uniform magnetic field.
    Uniform {
        b: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// `None` selects the precision default.
    pub gmres_tol: Option<f64>,
    pub cg_max_iter: usize,
    pub cg_tol: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            gmres_restart: 20,
            gmres_max_iter: 200,
            gmres_tol: None,
            cg_max_iter: 500,
            cg_tol: None,
        }
    }
}

impl SolverParams {
    pub fn default_tol(precision: Precision) -> f64 {
        match precision {
            Precision::Double => 1e-7,
            Precision::Single => 1e-5,
        }
    }

    pub fn gmres_tol_for(&self, precision: Precision) -> f64 {
        self.gmres_tol
            .unwrap_or_else(|| Self::default_tol(precision))
    }

    pub fn cg_tol_for(&self, precision: Precision) -> f64 {
        self.cg_tol.unwrap_or_else(|| Self::default_tol(precision))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Output directory; `None` disables all file output.
    pub dir: Option<String>,
    /// Field/moment dump cadence in cycles (0 = never).
    pub field_every: usize,
    /// Write a particle checkpoint at the end of the run.
    pub particle_dump: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            field_every: 100,
            particle_dump: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationDeck {
    pub geometry: GridGeometry,
    pub species: Vec<SpeciesParams>,
    pub dt: f64,
    /// Speed of light in normalised units.
    pub c: f64,
    /// Time-centring of the field advance, in [0.5, 1].
    pub theta: f64,
    pub coupling: FieldCoupling,
    /// Binomial filter passes applied to the field the particles see.
    pub smoothing: usize,
    pub cycles: usize,
    pub solver: SolverParams,
    /// Batches per species.
    pub batches: usize,
    pub worker_groups: usize,
    /// Total worker threads, spread over the groups.
    pub workers: usize,
    /// Sort particles by cell every this many cycles (0 = never).
    pub sort_period: usize,
    /// Cap on resident staged-batch bytes per group (0 = unlimited).
    pub memory_budget: usize,
    pub particle_precision: Precision,
    pub field_precision: Precision,
    pub init: InitKind,
    pub seed: u64,
    pub output: OutputConfig,
}

impl SimulationDeck {
    /// Deck with library defaults around the given grid and species.
    pub fn new(geometry: GridGeometry, species: Vec<SpeciesParams>) -> Self {
        Self {
            geometry,
            species,
            dt: 0.25,
            c: 1.0,
            theta: 0.5,
            coupling: FieldCoupling::Explicit,
            smoothing: 0,
            cycles: 1,
            solver: SolverParams::default(),
            batches: 16,
            worker_groups: 1,
            workers: 1,
            sort_period: 10,
            memory_budget: 0,
            particle_precision: Precision::Double,
            field_precision: Precision::Double,
            init: InitKind::Uniform { b: [0.0; 3] },
            seed: 1,
            output: OutputConfig::default(),
        }
    }

    pub fn precision_mode(&self) -> Result<PrecisionMode> {
        PrecisionMode::from_parts(self.particle_precision, self.field_precision).ok_or_else(|| {
            Error::config(
                "precision.particles",
                "double particles with single fields is not a supported mode",
            )
        })
    }

    pub fn total_particles(&self) -> usize {
        let cells = self.geometry.cell_count();
        self.species
            .iter()
            .map(|s| s.particles_per_cell * cells)
            .sum()
    }

    /// Checks every invariant except the cycle count, which the programmatic
    /// API allows to be zero (initialisation only).
    pub fn validate_structure(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(Error::config("species", "at least one species is required"));
        }
        for (i, s) in self.species.iter().enumerate() {
            s.validate(i)?;
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time.dt", "must be positive"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("time.c", "must be positive"));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::config("time.theta", "must lie in [0.5, 1]"));
        }
        if self.batches == 0 {
            return Err(Error::config("pipeline.batches", "must be at least 1"));
        }
        if self.worker_groups == 0 {
            return Err(Error::config(
                "pipeline.worker_groups",
                "must be at least 1",
            ));
        }
        if self.workers == 0 {
            return Err(Error::config("pipeline.workers", "must be at least 1"));
        }
        if self.solver.gmres_restart == 0 {
            return Err(Error::config("time.gmres_restart", "must be at least 1"));
        }
        if self.solver.gmres_max_iter == 0 {
            return Err(Error::config("time.gmres_max_iter", "must be at least 1"));
        }
        if self.solver.cg_max_iter == 0 {
            return Err(Error::config("time.cg_max_iter", "must be at least 1"));
        }
        for (key, tol) in [
            ("time.gmres_tol", self.solver.gmres_tol),
            ("time.cg_tol", self.solver.cg_tol),
        ] {
            if let Some(t) = tol {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::config(key, "must lie in (0, 1)"));
                }
            }
        }
        self.precision_mode()?;
        if let InitKind::Gem(g) = &self.init {
            if !(g.b0 > 0.0 && g.half_width > 0.0) {
                return Err(Error::config(
                    "init.b0",
                    "b0 and half_width must be positive",
                ));
            }
            if !(g.background_fraction > 0.0) {
                return Err(Error::config(
                    "init.background_fraction",
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if self.cycles == 0 {
            return Err(Error::config("time.cycles", "must be at least 1"));
        }
        Ok(())
    }
}
