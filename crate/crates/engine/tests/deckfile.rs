mod common;

use batchpic::deckfile::{parse_deck, parse_deck_str, parse_deck_with, write_deck, DeckText};
use batchpic::EngineError;
use batchpic_core::deck::InitKind;
use batchpic_core::grid::Boundary;
use batchpic_core::real::Precision;
use batchpic_core::FieldCoupling;
use proptest::prelude::*;

use common::{deck_path, small_deck, SMALL};

fn parse_error(text: &str) -> (usize, String) {
    match parse_deck_str(text) {
        Err(EngineError::Parse { line, message, .. }) => (line, message),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn full_gem_deck() {
    let d = parse_deck(deck_path("gem_full.deck")).unwrap();
    assert_eq!(d.geometry.cells, [128, 64, 64]);
    assert_eq!(d.species.len(), 4);
    assert!(d.species.iter().all(|s| s.particles_per_cell == 125));
    assert_eq!(d.total_particles(), 262_144_000);
    let ratio = d.species[1].mass / d.species[0].mass;
    assert_eq!(ratio, 64.0);
    assert_eq!(d.dt, 0.25);
    assert!(matches!(d.init, InitKind::Gem(_)));
}

#[test]
fn desk_gem_deck() {
    let d = parse_deck(deck_path("gem_desk.deck")).unwrap();
    assert_eq!(d.geometry.cells, [32, 16, 16]);
    assert_eq!(d.species.len(), 4);
    assert!(d.species.iter().all(|s| s.particles_per_cell == 27));
    assert_eq!(d.total_particles(), 32 * 16 * 16 * 27 * 4);
    assert_eq!(d.total_particles(), 884_736);
    assert_eq!(d.coupling, FieldCoupling::Implicit);
    assert_eq!(
        d.geometry.boundary,
        [Boundary::Periodic, Boundary::Reflecting, Boundary::Periodic]
    );
}

#[test]
fn defaults_for_omitted_keys() {
    let d = parse_deck_str(
        "[grid]\nnx = 2\nny = 2\nnz = 2\nlx = 1\nly = 1\nlz = 1\n[time]\ndt = 0.1\ncycles = 1\n[species.0]\ncharge = 1\nmass = 1\nppc = 1\n",
    )
    .unwrap();
    assert_eq!(d.theta, 0.5);
    assert_eq!(d.solver.gmres_restart, 20);
    assert_eq!(d.sort_period, 10);
    assert_eq!(d.batches, 16);
    assert_eq!(d.smoothing, 0);
    assert_eq!(d.output.field_every, 100);
    assert_eq!(d.particle_precision, Precision::Double);
}

#[test]
fn zero_batches_names_the_key() {
    let text = SMALL.replace("batches = 4", "batches = 0");
    let (line, message) = parse_error(&text);
    assert!(message.contains("[pipeline].batches"), "{message}");
    let want = text.lines().position(|l| l.starts_with("batches")).unwrap() + 1;
    assert_eq!(line, want);
}

#[test]
fn unknown_key_is_rejected() {
    let text = SMALL
        .replace("sort_period", "sortperiod")
        .replace("batches = 4", "batches = 4\nbatchs = 2");
    let (line, message) = parse_error(&text);
    assert!(message.contains("batchs"), "{message}");
    assert!(line > 0);
}

#[test]
fn unknown_section_and_type_mismatch() {
    let (_, message) = parse_error(&format!("{SMALL}\n[solver]\ntol = 1\n"));
    assert!(message.contains("solver"), "{message}");
    let (line, message) = parse_error(&SMALL.replace("nx = 8", "nx = eight"));
    assert_eq!(line, 2);
    assert!(message.contains("nx"), "{message}");
}

#[test]
fn missing_mandatory_key() {
    let (line, message) = parse_error(&SMALL.replace("mass = 0.04\n", ""));
    assert!(message.contains("[species.0].mass"), "{message}");
    assert_eq!(
        line,
        SMALL.lines().position(|l| l == "[species.0]").unwrap() + 1
    );
}

#[test]
fn bad_precision_pair() {
    let text = format!("{SMALL}\n[precision]\nparticles = double\nfields = single\n");
    assert!(parse_deck_str(&text).is_err());
}

#[test]
fn overrides_apply_before_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.deck");
    std::fs::write(&path, SMALL).unwrap();
    let d = parse_deck_with(
        &path,
        &["pipeline.batches=2".into(), "time.theta=0.75".into()],
    )
    .unwrap();
    assert_eq!(d.batches, 2);
    assert_eq!(d.theta, 0.75);
    assert!(parse_deck_with(&path, &["pipeline.batches=0".into()]).is_err());
    assert!(parse_deck_with(&path, &["pipeline.nope=1".into()]).is_err());
    assert!(parse_deck_with(&path, &["no-equals".into()]).is_err());
}

#[test]
fn bundled_decks_round_trip() {
    for name in ["gem_desk.deck", "gem_full.deck"] {
        let d = parse_deck(deck_path(name)).unwrap();
        assert_eq!(parse_deck_str(&write_deck(&d)).unwrap(), d, "{name}");
    }
}

#[test]
fn raw_text_keeps_line_numbers() {
    let raw = DeckText::parse(SMALL, "small").unwrap();
    assert_eq!(raw.to_deck().unwrap(), small_deck());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn written_decks_parse_back_identically(
        cells in prop::array::uniform3(1usize..12),
        lengths in prop::array::uniform3(0.1f64..50.0),
        walls in prop::array::uniform3(any::<bool>()),
        dt in 1e-3f64..2.0,
        theta in 0.5f64..=1.0,
        implicit in any::<bool>(),
        smoothing in 0usize..3,
        cycles in 0usize..1000,
        batches in 1usize..64,
        groups in 1usize..5,
        sort_period in 0usize..50,
        seed in any::<u64>(),
        species in prop::collection::vec(
            (-5.0f64..5.0, 0.01f64..100.0, 1usize..200, prop::array::uniform3(0.0f64..1.0)),
            1..5,
        ),
        mixed in any::<bool>(),
    ) {
        let mut d = small_deck();
        let boundary = walls.map(|w| if w { Boundary::Reflecting } else { Boundary::Periodic });
        d.geometry = batchpic_core::GridGeometry::new(cells, lengths, [0.0, -1.5, 0.25], boundary).unwrap();
        d.dt = dt;
        d.theta = theta;
        d.coupling = if implicit { FieldCoupling::Implicit } else { FieldCoupling::Explicit };
        d.smoothing = smoothing;
        d.cycles = cycles;
        d.batches = batches;
        d.worker_groups = groups;
        d.sort_period = sort_period;
        d.seed = seed;
        d.species = species
            .iter()
            .map(|&(q, m, ppc, vt)| {
                let mut s = batchpic_core::SpeciesParams::new(if q == 0.0 { 1.0 } else { q }, m, ppc);
                s.thermal = vt;
                s
            })
            .collect();
        if mixed {
            d.particle_precision = Precision::Single;
        }
        let text = write_deck(&d);
        prop_assert_eq!(parse_deck_str(&text).unwrap(), d);
    }
}
