//! Per-run files: manifest, diagnostics CSV, field dumps and particle dumps.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use batchpic_core::diagnostics::{reconnected_flux, EnergyLedger};
use batchpic_core::real::Real;
use batchpic_core::SimulationDeck;

use crate::checkpoint::write_particle_dump;
use crate::deckfile::write_deck;
use crate::error::EngineError;
use crate::pipeline::{CycleReport, SimulationState};
use crate::vtk::{write_field_dump, FieldDump};

/// Version string from `git describe`, or the crate version outside a
/// checkout.
pub const VERSION: &str = env!("BATCHPIC_VERSION");

/// Everything needed to reproduce a run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub deck_sha256: String,
    pub seed: u64,
    pub precision_mode: String,
    pub cycles: usize,
    pub total_particles: usize,
    pub deck: String,
}

impl Manifest {
    pub fn new(deck: &SimulationDeck) -> Result<Self, EngineError> {
        let text = write_deck(deck);
        Ok(Self {
            version: VERSION.to_string(),
            deck_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            seed: deck.seed,
            precision_mode: deck.precision_mode()?.label().to_string(),
            cycles: deck.cycles,
            total_particles: deck.total_particles(),
            deck: text,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EngineError> {
        let path = path.as_ref();
        let json =
            serde_json::to_string_pretty(self).map_err(|e| EngineError::Format(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| EngineError::io(path, e))
    }
}

/// Appends one row per cycle to the diagnostics CSV.
pub struct DiagWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

pub fn diag_header(species: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "cycle",
        "t",
        "mpa_s",
        "mover_interp_seconds",
        "field_solve_seconds",
        "gmres_iters",
        "cg_iters",
        "field_energy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..species).map(|s| format!("kinetic_energy_{s}")));
    h.extend(
        [
            "div_residual",
            "total_energy",
            "reconnected_flux",
            "gmres_converged",
            "handoff_seconds",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

impl DiagWriter {
    pub fn create(path: impl AsRef<Path>, species: usize) -> Result<Self, EngineError> {
        let path = path.as_ref().to_path_buf();
        let mut writer = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        writer
            .write_record(diag_header(species))
            .map_err(|e| csv_error(&path, e))?;
        Ok(Self { path, writer })
    }

    pub fn write_row(
        &mut self,
        report: &CycleReport,
        energy: &EnergyLedger,
        dt: f64,
        flux: f64,
    ) -> Result<(), EngineError> {
        let mut row = vec![
            report.cycle.to_string(),
            format!("{:?}", report.cycle as f64 * dt),
            format!("{:?}", report.mpa_s),
            format!("{:?}", report.fused_seconds),
            format!("{:?}", report.field_seconds),
            report.gmres.iterations.to_string(),
            report.clean.cg.iterations.to_string(),
            format!("{:?}", energy.field),
        ];
        row.extend(energy.kinetic.iter().map(|k| format!("{k:?}")));
        row.push(format!("{:?}", report.clean.residual_after));
        row.push(format!("{:?}", energy.total));
        row.push(format!("{flux:?}"));
        row.push(report.gmres.converged.to_string());
        row.push(format!("{:?}", report.handoff_seconds));
        self.writer
            .write_record(&row)
            .map_err(|e| csv_error(&self.path, e))?;
        self.writer
            .flush()
            .map_err(|e| EngineError::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> EngineError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => EngineError::io(path, io),
        other => EngineError::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Output sink driven by the cycle loop.
pub struct RunOutputs {
    pub dir: PathBuf,
    diag: DiagWriter,
    field_every: usize,
    particle_dump: bool,
    cycles: usize,
}

impl RunOutputs {
    pub fn create(deck: &SimulationDeck, dir: impl AsRef<Path>) -> Result<Self, EngineError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| EngineError::io(&dir, e))?;
        Manifest::new(deck)?.write(dir.join("manifest.json"))?;
        let diag = DiagWriter::create(dir.join("diagnostics.csv"), deck.species.len())?;
        Ok(Self {
            dir,
            diag,
            field_every: deck.output.field_every,
            particle_dump: deck.output.particle_dump,
            cycles: deck.cycles,
        })
    }

    pub fn observe<P: Real, F: Real>(
        &mut self,
        state: &SimulationState<P, F>,
        report: Option<&CycleReport>,
    ) -> Result<(), EngineError> {
        let geom = &state.deck.geometry;
        let cycle = state.cycle;
        if let Some(r) = report {
            let flux = reconnected_flux(&state.fields, geom);
            self.diag
                .write_row(r, &state.energy(), state.deck.dt, flux)?;
        }
        if self.field_every > 0 && cycle % self.field_every == 0 {
            let dump = FieldDump::from_state(geom, &state.fields, &state.moments, cycle);
            write_field_dump(&dump, self.dir.join(format!("fields_{cycle:06}.vtk")))?;
        }
        if self.particle_dump && report.is_some() && cycle == self.cycles {
            for buf in &state.particles {
                let name = format!("particles_s{}_{cycle:06}.bin", buf.species);
                write_particle_dump(buf, self.dir.join(name))?;
            }
        }
        Ok(())
    }
}
