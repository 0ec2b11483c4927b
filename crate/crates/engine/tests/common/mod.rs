#![allow(dead_code)]

use std::path::PathBuf;

use batchpic::deckfile::parse_deck_str;
use batchpic_core::SimulationDeck;

pub const SMALL: &str = "\
[grid]
nx = 8
ny = 4
nz = 4
lx = 4.0
ly = 2.0
lz = 2.0
boundary_y = reflecting

[time]
dt = 0.2
cycles = 3

[species.0]
charge = -1.0
mass = 0.04
ppc = 8
thermal = 0.1
drift = 0.0, 0.0, 0.05

[species.1]
charge = 1.0
mass = 1.0
ppc = 8
thermal = 0.02

[pipeline]
batches = 4

[init]
kind = uniform
b = 0.0, 0.0, 0.2
seed = 7
";

pub fn small_deck() -> SimulationDeck {
    parse_deck_str(SMALL).unwrap()
}

pub fn deck_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../decks")
        .join(name)
}
