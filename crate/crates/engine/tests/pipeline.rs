mod common;

use batchpic::pipeline::{
    assign_species, deposit_all, mean_std, mpa_per_second, staging_chunk, worker_groups,
    workers_per_group,
};
use batchpic::{run_simulation, AnyState, SimulationState};
use batchpic_core::mover::PushContext;
use batchpic_core::particles::{BoundaryBox, ParticleBuffer};
use batchpic_core::solver::{divergence_clean, maxwell_advance};
use batchpic_core::{FieldCoupling, MomentGrid, SimulationDeck};
use proptest::prelude::*;

use common::small_deck;

type State = SimulationState<f64, f64>;

fn run(deck: SimulationDeck, cycles: usize) -> State {
    let mut s = State::initialize(deck).unwrap();
    for _ in 0..cycles {
        s.run_cycle().unwrap();
    }
    s
}

/// Particles as a sorted list of bit patterns, for order-free comparison.
fn particle_set(bufs: &[ParticleBuffer<f64>]) -> Vec<Vec<[u64; 6]>> {
    bufs.iter()
        .map(|b| {
            let mut v: Vec<[u64; 6]> = (0..b.len())
                .map(|i| {
                    let (x, u) = (b.position(i), b.velocity(i));
                    [x[0], x[1], x[2], u[0], u[1], u[2]].map(f64::to_bits)
                })
                .collect();
            v.sort_unstable();
            v
        })
        .collect()
}

#[test]
fn round_robin_assignment() {
    assert_eq!(assign_species(4, 2).unwrap(), [0, 1, 0, 1]);
    assert_eq!(assign_species(4, 4).unwrap(), [0, 1, 2, 3]);
    assert_eq!(assign_species(3, 5).unwrap(), [0, 1, 2]);
    assert!(assign_species(4, 0).is_err());

    let mut d = small_deck();
    d.worker_groups = 5;
    d.workers = 7;
    let groups = worker_groups(&d).unwrap();
    assert_eq!(groups.len(), 5);
    assert!(groups[2..].iter().all(|g| g.species.is_empty()));
    assert_eq!(workers_per_group(7, 5), [2, 2, 1, 1, 1]);
    assert_eq!(workers_per_group(1, 3), [1, 1, 1]);
}

#[test]
fn figure_of_merit_arithmetic() {
    assert!((mpa_per_second(260_000_000, 0.52) - 500.0).abs() < 1e-9);
    assert_eq!(mpa_per_second(10, 0.0), 0.0);
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_std(&[]), (0.0, 0.0));
}

#[test]
fn staging_chunks_respect_the_budget() {
    assert_eq!(staging_chunk::<f64>(0).unwrap(), None);
    let per = 2 * ParticleBuffer::<f64>::bytes_per_particle();
    assert_eq!(staging_chunk::<f64>(10 * per + 3).unwrap(), Some(10));
    assert!(staging_chunk::<f64>(per - 1).is_err());
}

#[test]
fn reports_count_particles_and_throughput() {
    let mut s = State::initialize(small_deck()).unwrap();
    let r = s.run_cycle().unwrap();
    assert_eq!(r.cycle, 1);
    assert_eq!(r.particles, [1024, 1024]);
    assert_eq!(r.mpa_s, mpa_per_second(2048, r.fused_seconds));
    assert!(r.gmres.converged && r.clean.converged);
}

#[test]
fn zero_cycles_is_initialisation_only() {
    let mut d = small_deck();
    d.cycles = 0;
    let mut seen = 0;
    let (state, summary) = run_simulation::<f64, f64>(d.clone(), |_, r| {
        assert!(r.is_none());
        seen += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, 1);
    assert!(summary.reports.is_empty());
    assert_eq!(state, State::initialize(d).unwrap());
}

#[test]
fn summary_has_one_sample_per_cycle() {
    let mut d = small_deck();
    d.cycles = 12;
    let (_, summary) = run_simulation::<f64, f64>(d, |_, _| Ok(())).unwrap();
    assert_eq!(summary.reports.len(), 12);
    let samples: Vec<f64> = summary.reports.iter().map(|r| r.mpa_s).collect();
    assert_eq!((summary.mpa_mean, summary.mpa_std), mean_std(&samples));
}

#[test]
fn empty_species_evolve_fields_as_vacuum() {
    let mut s = State::initialize(small_deck()).unwrap();
    let g = s.deck.geometry.clone();
    for (k, buf) in s.particles.iter_mut().enumerate() {
        *buf = ParticleBuffer::new(k);
    }
    s.moments = (0..2).map(|k| MomentGrid::zeros(&g, k)).collect();
    let mut f = s.fields.clone();
    for c in 0..3 {
        for (n, v) in f.e[c].iter_mut().enumerate() {
            *v = 0.01 * ((n * (c + 3)) % 7) as f64;
        }
        g.sync_periodic(&mut f.e[c]);
    }
    s.fields = f.clone();
    let params = s.maxwell_params();
    for _ in 0..3 {
        let (mut next, _) = maxwell_advance(&f, &MomentGrid::zeros(&g, 0), &g, &params).unwrap();
        let tol = s.deck.solver.cg_tol_for(batchpic_core::Precision::Double);
        divergence_clean(
            &mut next.e,
            &vec![0.0; g.node_count()],
            &g,
            tol,
            s.deck.solver.cg_max_iter,
        )
        .unwrap();
        f = next;
        let r = s.run_cycle().unwrap();
        assert_eq!(r.particles, [0, 0]);
        assert_eq!(s.fields, f);
    }
}

#[test]
fn single_lane_matches_sequential_reference() {
    let mut d = small_deck();
    d.batches = 1;
    d.workers = 1;
    d.sort_period = 0;
    let mut s = State::initialize(d.clone()).unwrap();
    let g = d.geometry.clone();
    let bounds = BoundaryBox::<f64>::new(&g);
    let mut particles = s.particles.clone();
    let mut fields = s.fields.clone();
    for _ in 0..4 {
        let packed = fields.packed();
        for (buf, sp) in particles.iter_mut().zip(&d.species) {
            let ctx = PushContext::<f64, f64, _>::new(
                &g,
                &packed[..],
                sp.charge_to_mass(),
                d.dt,
                d.c,
                sp.mover_iterations,
            );
            for i in 0..buf.len() {
                let (mut x, mut v) = ctx.mover_iterate(buf.position(i), buf.velocity(i)).unwrap();
                bounds.apply(&mut x, &mut v).unwrap();
                [buf.x[i], buf.y[i], buf.z[i]] = x;
                [buf.u[i], buf.v[i], buf.w[i]] = v;
            }
        }
        let moments = deposit_all(&particles, &g).unwrap();
        let mut total = MomentGrid::<f64>::zeros(&g, usize::MAX);
        for m in &moments {
            total.accumulate(m);
        }
        let (mut next, _) = maxwell_advance(&fields, &total, &g, &s.maxwell_params()).unwrap();
        let tol = d.solver.cg_tol_for(batchpic_core::Precision::Double);
        divergence_clean(&mut next.e, &total.rho, &g, tol, d.solver.cg_max_iter).unwrap();
        fields = next;

        s.run_cycle().unwrap();
        assert_eq!(s.particles, particles);
        assert_eq!(s.moments, moments);
        assert_eq!(s.fields, fields);
    }
}

#[test]
fn sorting_changes_no_physics() {
    for coupling in [FieldCoupling::Explicit, FieldCoupling::Implicit] {
        let mut d = small_deck();
        d.coupling = coupling;
        d.sort_period = 0;
        let plain = run(d.clone(), 6);
        d.sort_period = 2;
        let sorted = run(d, 6);
        assert_eq!(plain.fields, sorted.fields);
        assert_eq!(plain.moments, sorted.moments);
        assert_eq!(
            particle_set(&plain.particles),
            particle_set(&sorted.particles)
        );
        assert_ne!(plain.particles, sorted.particles);
    }
}

#[test]
fn budget_mode_changes_timing_only() {
    let mut d = small_deck();
    let free = run(d.clone(), 3);
    let per = 2 * ParticleBuffer::<f64>::bytes_per_particle();
    d.memory_budget = 37 * per;
    let mut s = State::initialize(d.clone()).unwrap();
    for _ in 0..3 {
        let r = s.run_cycle().unwrap();
        assert!(
            r.peak_staged_bytes <= d.memory_budget,
            "{} > {}",
            r.peak_staged_bytes,
            d.memory_budget
        );
        assert!(r.peak_staged_bytes > 0);
    }
    assert_eq!(s.particles, free.particles);
    assert_eq!(s.fields, free.fields);
}

#[test]
fn precision_modes_dispatch() {
    for (p, f, label) in [
        ("single", "single", "single"),
        ("single", "double", "mixed"),
        ("double", "double", "double"),
    ] {
        let text = format!(
            "{}\n[precision]\nparticles = {p}\nfields = {f}\n",
            common::SMALL
        );
        let d = batchpic::deckfile::parse_deck_str(&text).unwrap();
        let mut s = AnyState::initialize(d).unwrap();
        assert_eq!(s.mode().label(), label);
        s.run_cycle().unwrap();
        assert_eq!(s.cycle(), 1);
        assert!(s.energy().total > 0.0);
    }
    let mut d = small_deck();
    d.particle_precision = batchpic_core::Precision::Single;
    assert!(State::initialize(d).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn configuration_invariance(
        batches in 1usize..12,
        groups in 1usize..4,
        workers in 1usize..5,
        implicit in any::<bool>(),
    ) {
        let mut base = small_deck();
        base.coupling = if implicit { FieldCoupling::Implicit } else { FieldCoupling::Explicit };
        base.batches = 1;
        base.worker_groups = 1;
        base.workers = 1;
        let reference = run(base.clone(), 3);
        let mut d = base;
        d.batches = batches;
        d.worker_groups = groups;
        d.workers = workers;
        let other = run(d, 3);
        prop_assert_eq!(&other.particles, &reference.particles);
        prop_assert_eq!(&other.moments, &reference.moments);
        prop_assert_eq!(&other.fields, &reference.fields);
    }
}
