//! Cycle orchestration: species are spread round-robin over worker groups,
//! each group pushes its species' batches through the fused kernel with a
//! two-slot staging lane per worker, moments are merged, and the host side
//! advances the fields.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread;
use std::time::{Duration, Instant};

use batchpic_core::deck::InitKind;
use batchpic_core::diagnostics::{energy_ledger, EnergyLedger};
use batchpic_core::fields::{FieldGrid, MomentAccumulator, MomentGrid};
use batchpic_core::mover::{deposit_moments, PushContext};
use batchpic_core::particles::{
    init_gem, init_uniform, partition_batches, sort_by_cell, BatchView, ParticleBuffer,
};
use batchpic_core::real::{PrecisionMode, Real};
use batchpic_core::solver::{
    binomial_smooth, divergence_clean, maxwell_advance, maxwell_advance_implicit, CleanReport,
    ImplicitAdvance, MaxwellParams, SolverReport, SpeciesMoments,
};
use batchpic_core::{Error as CoreError, FieldCoupling, SimulationDeck};

use crate::error::{EngineError, Phase};

/// Species-to-group map: species `s` runs on group `s mod groups`.
pub fn assign_species(species: usize, groups: usize) -> Result<Vec<usize>, EngineError> {
    if groups == 0 {
        return Err(EngineError::config(
            "pipeline.worker_groups",
            "must be at least 1",
        ));
    }
    if species == 0 {
        return Err(EngineError::config(
            "species",
            "at least one species is required",
        ));
    }
    Ok((0..species).map(|s| s % groups).collect())
}

/// Worker threads per group: `workers` spread as evenly as possible, every
/// group getting at least one.
pub fn workers_per_group(workers: usize, groups: usize) -> Vec<usize> {
    (0..groups)
        .map(|g| (workers / groups + usize::from(g < workers % groups)).max(1))
        .collect()
}

/// Particles per staging slot under `budget` bytes (two slots), or `None`
/// when unlimited.
pub fn staging_chunk<P: Real>(budget: usize) -> Result<Option<usize>, EngineError> {
    if budget == 0 {
        return Ok(None);
    }
    let per = 2 * ParticleBuffer::<P>::bytes_per_particle();
    let chunk = budget / per;
    if chunk == 0 {
        return Err(EngineError::config(
            "pipeline.memory_budget",
            format!("must hold at least two particles ({per} bytes)"),
        ));
    }
    Ok(Some(chunk))
}

/// One group's view of the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerGroup {
    pub id: usize,
    pub species: Vec<usize>,
    pub workers: usize,
}

pub fn worker_groups(deck: &SimulationDeck) -> Result<Vec<WorkerGroup>, EngineError> {
    let map = assign_species(deck.species.len(), deck.worker_groups)?;
    let per = workers_per_group(deck.workers, deck.worker_groups);
    Ok((0..deck.worker_groups)
        .map(|g| WorkerGroup {
            id: g,
            species: (0..map.len()).filter(|&s| map[s] == g).collect(),
            workers: per[g],
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleReport {
    pub cycle: usize,
    /// Wall time of the fused move-and-deposit phase.
    pub fused_seconds: f64,
    pub field_seconds: f64,
    /// Time workers spent waiting for staged batches or copying results back.
    pub handoff_seconds: f64,
    pub mpa_s: f64,
    pub gmres: SolverReport,
    pub clean: CleanReport,
    pub particles: Vec<usize>,
    /// Largest number of staged particle bytes resident at once in any worker.
    pub peak_staged_bytes: usize,
    pub sorted: bool,
}

impl CycleReport {
    pub fn total_particles(&self) -> usize {
        self.particles.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState<P, F> {
    pub deck: SimulationDeck,
    pub particles: Vec<ParticleBuffer<P>>,
    pub fields: FieldGrid<F>,
    /// Implicit coupling only: the already-solved step from `fields`, whose
    /// `push` grid drives the next particle push.
    pub pending: Option<ImplicitAdvance<F>>,
    /// Per-species moments of the current particle state.
    pub moments: Vec<MomentGrid<P>>,
    pub cycle: usize,
}

impl<P: Real, F: Real> SimulationState<P, F> {
    pub fn initialize(deck: SimulationDeck) -> Result<Self, EngineError> {
        deck.validate_structure()?;
        let mode = deck.precision_mode()?;
        if mode.particles() != P::PRECISION || mode.fields() != F::PRECISION {
            return Err(EngineError::config(
                "precision.particles",
                format!(
                    "deck asks for {} but the state was built for {}/{}",
                    mode.label(),
                    P::PRECISION.name(),
                    F::PRECISION.name()
                ),
            ));
        }
        let init = match &deck.init {
            InitKind::Gem(_) => init_gem::<P, F>(&deck, deck.seed)?,
            InitKind::Uniform { b } => init_uniform::<P, F>(&deck, *b),
        };
        let moments = deposit_all(&init.particles, &deck.geometry)
            .map_err(|e| EngineError::phase(Phase::Particles, e))?;
        let mut state = Self {
            particles: init.particles,
            fields: init.fields,
            pending: None,
            moments,
            cycle: 0,
            deck,
        };
        if state.deck.coupling == FieldCoupling::Implicit {
            state.implicit_field_phase()?;
        }
        Ok(state)
    }

    /// Cleans against the charge density passed through the same binomial
    /// filter as the pushed field.
    fn clean(&self, fields: &mut FieldGrid<F>, rho: &[F]) -> Result<CleanReport, EngineError> {
        let mut target = rho.to_vec();
        for _ in 0..self.deck.smoothing {
            target = binomial_smooth(&target, &self.deck.geometry)
                .map_err(|e| EngineError::phase(Phase::DivergenceClean, e))?;
        }
        divergence_clean(
            &mut fields.e,
            &target,
            &self.deck.geometry,
            self.deck.solver.cg_tol_for(F::PRECISION),
            self.deck.solver.cg_max_iter,
        )
        .map_err(|e| EngineError::phase(Phase::DivergenceClean, e))
    }

    /// Cleans `fields` against the current charge density, then solves the
    /// step to the next time level into `pending`.
    fn implicit_field_phase(&mut self) -> Result<(SolverReport, CleanReport), EngineError> {
        let geom = &self.deck.geometry;
        let total = self.total_moments();
        let mut fields = self.fields.clone();
        let clean = self.clean(&mut fields, &total.rho)?;
        self.fields = fields;
        let cast: Vec<MomentGrid<F>> = self.moments.iter().map(|m| m.cast::<F>()).collect();
        let species: Vec<SpeciesMoments<'_, F>> = cast
            .iter()
            .zip(&self.deck.species)
            .map(|(m, sp)| SpeciesMoments {
                qom: sp.charge_to_mass(),
                moments: m,
            })
            .collect();
        let step = maxwell_advance_implicit(&self.fields, &species, geom, &self.maxwell_params())
            .map_err(|e| EngineError::phase(Phase::FieldSolve, e))?;
        let report = step.report.clone();
        self.pending = Some(step);
        Ok((report, clean))
    }

    /// All-species moment total in field precision, summed in species order.
    pub fn total_moments(&self) -> MomentGrid<F> {
        let mut total = MomentGrid::<F>::zeros(&self.deck.geometry, usize::MAX);
        for m in &self.moments {
            total.accumulate(&m.cast::<F>());
        }
        total
    }

    pub fn energy(&self) -> EnergyLedger {
        energy_ledger(
            self.cycle,
            &self.fields,
            &self.particles,
            &self.deck.species,
            &self.deck.geometry,
        )
    }

    pub fn maxwell_params(&self) -> MaxwellParams {
        let d = &self.deck;
        MaxwellParams {
            dt: d.dt,
            theta: d.theta,
            c: d.c,
            tol: d.solver.gmres_tol_for(F::PRECISION),
            restart: d.solver.gmres_restart,
            max_iter: d.solver.gmres_max_iter,
            smoothing: d.smoothing,
        }
    }

    /// Runs one cycle and returns its report.
    pub fn run_cycle(&mut self) -> Result<CycleReport, EngineError> {
        let cycle = self.cycle + 1;
        let deck = &self.deck;
        let geom = &deck.geometry;
        let groups = worker_groups(deck)?;
        let chunk = staging_chunk::<P>(deck.memory_budget)?;

        // (1) broadcast
        let source = self.pending.as_ref().map_or(&self.fields, |p| &p.push);
        let copies: Vec<Vec<[F; 6]>> = groups.iter().map(|_| source.packed()).collect();

        // (2)-(3) zero private accumulators and run the fused kernel
        let mut plans = Vec::with_capacity(self.particles.len());
        for buf in &self.particles {
            plans.push(partition_batches(buf.len(), deck.batches)?);
        }
        let species_of_group: Vec<Vec<usize>> = groups.iter().map(|g| g.species.clone()).collect();
        let mut views: Vec<Vec<BatchView<'_, P>>> = self
            .particles
            .iter_mut()
            .zip(&plans)
            .map(|(b, p)| b.split_mut(p))
            .collect();
        let mut jobs_per_group: Vec<Vec<(usize, BatchView<'_, P>)>> =
            groups.iter().map(|_| Vec::new()).collect();
        for (g, species) in species_of_group.iter().enumerate() {
            for &s in species {
                for v in views[s].drain(..) {
                    jobs_per_group[g].push((s, v));
                }
            }
        }

        let start = Instant::now();
        let outcomes: Vec<Result<WorkerOutcome, CoreError>> = thread::scope(|scope| {
            let mut handles = Vec::new();
            for (g, jobs) in jobs_per_group.into_iter().enumerate() {
                let nworkers = groups[g].workers;
                let mut per_worker: Vec<Vec<(usize, BatchView<'_, P>)>> =
                    (0..nworkers).map(|_| Vec::new()).collect();
                for (j, job) in jobs.into_iter().enumerate() {
                    per_worker[j % nworkers].push(job);
                }
                let fields = &copies[g][..];
                for jobs in per_worker {
                    handles.push(scope.spawn(move || run_worker(deck, fields, jobs, chunk)));
                }
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("particle worker panicked"))
                .collect()
        });
        let fused_seconds = start.elapsed().as_secs_f64();

        // (4) merge
        let mut acc: Vec<MomentAccumulator> = (0..deck.species.len())
            .map(|s| MomentAccumulator::new(geom, s))
            .collect();
        let mut handoff = Duration::ZERO;
        let mut peak = 0;
        for out in outcomes {
            let out = out.map_err(|e| EngineError::phase(Phase::Particles, e))?;
            for (s, a) in out.accumulators {
                acc[s].merge(&a);
            }
            handoff += out.handoff;
            peak = peak.max(out.peak_bytes);
        }
        self.moments = acc.iter().map(|a| a.finish::<P>(geom)).collect();

        // (5) field solve
        let field_start = Instant::now();
        let (gmres, clean) = match self.deck.coupling {
            FieldCoupling::Explicit => {
                let total = self.total_moments();
                let (mut fields, gmres) =
                    maxwell_advance(&self.fields, &total, geom, &self.maxwell_params())
                        .map_err(|e| EngineError::phase(Phase::FieldSolve, e))?;
                let clean = self.clean(&mut fields, &total.rho)?;
                self.fields = fields;
                (gmres, clean)
            }
            FieldCoupling::Implicit => {
                if let Some(p) = self.pending.take() {
                    self.fields = p.fields;
                }
                self.implicit_field_phase()?
            }
        };
        let field_seconds = field_start.elapsed().as_secs_f64();

        // (6) sort
        let sorted = self.deck.sort_period > 0 && cycle % self.deck.sort_period == 0;
        if sorted {
            for buf in &mut self.particles {
                sort_by_cell(buf, &self.deck.geometry)
                    .map_err(|e| EngineError::phase(Phase::Sort, e))?;
            }
        }
        self.cycle = cycle;

        let particles: Vec<usize> = self.particles.iter().map(|b| b.len()).collect();
        let total_particles: usize = particles.iter().sum();
        Ok(CycleReport {
            cycle,
            fused_seconds,
            field_seconds,
            handoff_seconds: handoff.as_secs_f64(),
            mpa_s: mpa_per_second(total_particles, fused_seconds),
            gmres,
            clean,
            particles,
            peak_staged_bytes: peak,
            sorted,
        })
    }
}

/// Moments of every buffer, deposited at the particles' current positions.
pub fn deposit_all<P: Real>(
    particles: &[ParticleBuffer<P>],
    geom: &batchpic_core::GridGeometry,
) -> Result<Vec<MomentGrid<P>>, CoreError> {
    particles
        .iter()
        .enumerate()
        .map(|(s, buf)| {
            let mut acc = MomentAccumulator::new(geom, s);
            for i in 0..buf.len() {
                deposit_moments(buf.position(i), buf.velocity(i), buf.q[i], &mut acc, geom)?;
            }
            Ok(acc.finish::<P>(geom))
        })
        .collect()
}

/// Millions of particles advanced (and deposited) per second.
pub fn mpa_per_second(particles: usize, seconds: f64) -> f64 {
    if seconds > 0.0 {
        particles as f64 / seconds / 1e6
    } else {
        0.0
    }
}

struct WorkerOutcome {
    accumulators: Vec<(usize, MomentAccumulator)>,
    handoff: Duration,
    peak_bytes: usize,
}

/// Staging slot: a private copy of one chunk of particles.
struct Slot<P> {
    data: [Vec<P>; 7],
}

impl<P: Real> Slot<P> {
    fn empty() -> Self {
        Self {
            data: std::array::from_fn(|_| Vec::new()),
        }
    }

    fn load(&mut self, v: &BatchView<'_, P>) {
        let src: [&[P]; 7] = [v.x, v.y, v.z, v.u, v.v, v.w, v.q];
        for (dst, s) in self.data.iter_mut().zip(src) {
            dst.clear();
            dst.extend_from_slice(s);
        }
    }

    fn store(&self, v: &mut BatchView<'_, P>) {
        v.x.copy_from_slice(&self.data[0]);
        v.y.copy_from_slice(&self.data[1]);
        v.z.copy_from_slice(&self.data[2]);
        v.u.copy_from_slice(&self.data[3]);
        v.v.copy_from_slice(&self.data[4]);
        v.w.copy_from_slice(&self.data[5]);
    }

    fn bytes(&self) -> usize {
        self.data.iter().map(|d| d.capacity()).sum::<usize>() * std::mem::size_of::<P>()
    }
}

/// Splits a view into consecutive chunks of at most `chunk` particles.
fn chunks<'a, P>(mut v: BatchView<'a, P>, chunk: Option<usize>) -> Vec<BatchView<'a, P>> {
    let Some(size) = chunk else {
        return vec![v];
    };
    let mut out = Vec::new();
    while v.len() > size {
        let offset = v.offset;
        let (x0, x1) = std::mem::take(&mut v.x).split_at_mut(size);
        let (y0, y1) = std::mem::take(&mut v.y).split_at_mut(size);
        let (z0, z1) = std::mem::take(&mut v.z).split_at_mut(size);
        let (u0, u1) = std::mem::take(&mut v.u).split_at_mut(size);
        let (v0, v1) = std::mem::take(&mut v.v).split_at_mut(size);
        let (w0, w1) = std::mem::take(&mut v.w).split_at_mut(size);
        let (q0, q1) = v.q.split_at(size);
        out.push(BatchView {
            offset,
            x: x0,
            y: y0,
            z: z0,
            u: u0,
            v: v0,
            w: w0,
            q: q0,
        });
        v = BatchView {
            offset: offset + size,
            x: x1,
            y: y1,
            z: z1,
            u: u1,
            v: v1,
            w: w1,
            q: q1,
        };
    }
    out.push(v);
    out
}

type Staged<'a, P> = (usize, BatchView<'a, P>, Slot<P>);

/// One worker: a staging thread copies the next chunk into a free slot while
/// this thread pushes the current one. Two slots circulate between them.
fn run_worker<P: Real, F: Real>(
    deck: &SimulationDeck,
    fields: &[[F; 6]],
    jobs: Vec<(usize, BatchView<'_, P>)>,
    chunk: Option<usize>,
) -> Result<WorkerOutcome, CoreError> {
    let geom = &deck.geometry;
    let mut species: Vec<usize> = jobs.iter().map(|(s, _)| *s).collect();
    species.dedup();
    let mut accumulators: Vec<(usize, MomentAccumulator)> = species
        .iter()
        .map(|&s| (s, MomentAccumulator::new(geom, s)))
        .collect();
    let contexts: Vec<PushContext<'_, P, F, [[F; 6]]>> = species
        .iter()
        .map(|&s| {
            let sp = &deck.species[s];
            PushContext::new(
                geom,
                fields,
                sp.charge_to_mass(),
                deck.dt,
                deck.c,
                sp.mover_iterations,
            )
        })
        .collect();
    let work: Vec<(usize, BatchView<'_, P>)> = jobs
        .into_iter()
        .flat_map(|(s, v)| {
            let slot = species.iter().position(|&x| x == s).unwrap();
            chunks(v, chunk).into_iter().map(move |c| (slot, c))
        })
        .collect();

    let mut handoff = Duration::ZERO;
    let mut peak_bytes = 0;
    thread::scope(|scope| -> Result<(), CoreError> {
        let (full_tx, full_rx): (SyncSender<Staged<'_, P>>, Receiver<Staged<'_, P>>) =
            sync_channel(2);
        let (free_tx, free_rx) = sync_channel::<Slot<P>>(2);
        free_tx.send(Slot::empty()).unwrap();
        free_tx.send(Slot::empty()).unwrap();
        scope.spawn(move || {
            for (slot_species, view) in work {
                let Ok(mut slot) = free_rx.recv() else { return };
                slot.load(&view);
                if full_tx.send((slot_species, view, slot)).is_err() {
                    return;
                }
            }
        });
        let mut resident = [0usize; 2];
        let mut turn = 0;
        loop {
            let wait = Instant::now();
            let Ok((s, mut view, mut slot)) = full_rx.recv() else {
                break;
            };
            handoff += wait.elapsed();
            resident[turn] = slot.bytes();
            turn ^= 1;
            peak_bytes = peak_bytes.max(resident[0] + resident[1]);
            {
                let n = slot.data[0].len();
                let [x, y, z, u, v, w, q] = &mut slot.data;
                let mut staged = BatchView {
                    offset: view.offset,
                    x: &mut x[..n],
                    y: &mut y[..n],
                    z: &mut z[..n],
                    u: &mut u[..n],
                    v: &mut v[..n],
                    w: &mut w[..n],
                    q: &q[..n],
                };
                contexts[s].move_and_deposit_batch(&mut staged, &mut accumulators[s].1)?;
            }
            let back = Instant::now();
            slot.store(&mut view);
            handoff += back.elapsed();
            // the stager may already have exited once all work is queued
            let _ = free_tx.send(slot);
        }
        Ok(())
    })?;
    Ok(WorkerOutcome {
        accumulators,
        handoff,
        peak_bytes,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate over a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub reports: Vec<CycleReport>,
    pub mpa_mean: f64,
    pub mpa_std: f64,
}

impl RunSummary {
    pub fn from_reports(reports: Vec<CycleReport>) -> Self {
        let samples: Vec<f64> = reports.iter().map(|r| r.mpa_s).collect();
        let (mpa_mean, mpa_std) = mean_std(&samples);
        Self {
            reports,
            mpa_mean,
            mpa_std,
        }
    }
}

/// Initialises from `deck` and runs `deck.cycles` cycles, calling `observe`
/// after initialisation (with `None`) and after every cycle.
pub fn run_simulation<P: Real, F: Real>(
    deck: SimulationDeck,
    mut observe: impl FnMut(&SimulationState<P, F>, Option<&CycleReport>) -> Result<(), EngineError>,
) -> Result<(SimulationState<P, F>, RunSummary), EngineError> {
    let cycles = deck.cycles;
    let mut state = SimulationState::<P, F>::initialize(deck)?;
    observe(&state, None)?;
    let mut reports = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        let r = state.run_cycle()?;
        observe(&state, Some(&r))?;
        reports.push(r);
    }
    Ok((state, RunSummary::from_reports(reports)))
}

/// A simulation state in whichever precision mode the deck selects.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyState {
    Double(SimulationState<f64, f64>),
    Single(SimulationState<f32, f32>),
    Mixed(SimulationState<f32, f64>),
}

/// Evaluates `$body` with `$s` bound to the concrete state.
#[macro_export]
macro_rules! with_state {
    ($any:expr, $s:ident => $body:expr) => {
        match $any {
            $crate::pipeline::AnyState::Double($s) => $body,
            $crate::pipeline::AnyState::Single($s) => $body,
            $crate::pipeline::AnyState::Mixed($s) => $body,
        }
    };
}

impl AnyState {
    pub fn initialize(deck: SimulationDeck) -> Result<Self, EngineError> {
        Ok(match deck.precision_mode()? {
            PrecisionMode::Double => AnyState::Double(SimulationState::initialize(deck)?),
            PrecisionMode::Single => AnyState::Single(SimulationState::initialize(deck)?),
            PrecisionMode::Mixed => AnyState::Mixed(SimulationState::initialize(deck)?),
        })
    }

    pub fn run_cycle(&mut self) -> Result<CycleReport, EngineError> {
        with_state!(self, s => s.run_cycle())
    }

    pub fn cycle(&self) -> usize {
        with_state!(self, s => s.cycle)
    }

    pub fn deck(&self) -> &SimulationDeck {
        with_state!(self, s => &s.deck)
    }

    pub fn energy(&self) -> EnergyLedger {
        with_state!(self, s => s.energy())
    }

    pub fn mode(&self) -> PrecisionMode {
        match self {
            AnyState::Double(_) => PrecisionMode::Double,
            AnyState::Single(_) => PrecisionMode::Single,
            AnyState::Mixed(_) => PrecisionMode::Mixed,
        }
    }
}
