//! Sectioned `key = value` input decks.
//!
//! ```text
//! # comment
//! [grid]
//! nx = 32
//! lx = 10.0
//! boundary_y = reflecting
//!
//! [species.0]
//! charge = -1
//! thermal = 0.045, 0.045, 0.045
//! ```
//!
//! Sections: `[grid]`, `[time]`, `[species.N]` (N = 0, 1, ...), `[pipeline]`,
//! `[precision]`, `[output]`, `[init]`. Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use batchpic_core::deck::{GemParams, InitKind, OutputConfig, Population, SolverParams};
use batchpic_core::grid::{Boundary, GridGeometry};
use batchpic_core::real::Precision;
use batchpic_core::{Error as CoreError, FieldCoupling, SimulationDeck, SpeciesParams};

use crate::error::EngineError;

const GRID_KEYS: &[&str] = &[
    "nx",
    "ny",
    "nz",
    "lx",
    "ly",
    "lz",
    "dx",
    "dy",
    "dz",
    "boundary_x",
    "boundary_y",
    "boundary_z",
    "origin",
];
const TIME_KEYS: &[&str] = &[
    "dt",
    "c",
    "theta",
    "coupling",
    "smoothing",
    "cycles",
    "gmres_restart",
    "gmres_tol",
    "gmres_max_iter",
    "cg_tol",
    "cg_max_iter",
];
const SPECIES_KEYS: &[&str] = &[
    "charge",
    "mass",
    "ppc",
    "drift",
    "thermal",
    "mover_iterations",
    "density",
    "population",
];
const PIPELINE_KEYS: &[&str] = &[
    "batches",
    "worker_groups",
    "workers",
    "sort_period",
    "memory_budget",
];
const PRECISION_KEYS: &[&str] = &["particles", "fields"];
const OUTPUT_KEYS: &[&str] = &["dir", "field_every", "particle_dump"];
const INIT_KEYS: &[&str] = &[
    "kind",
    "seed",
    "b",
    "b0",
    "lambda",
    "perturbation",
    "background_fraction",
];

fn allowed_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "grid" => Some(GRID_KEYS),
        "time" => Some(TIME_KEYS),
        "pipeline" => Some(PIPELINE_KEYS),
        "precision" => Some(PRECISION_KEYS),
        "output" => Some(OUTPUT_KEYS),
        "init" => Some(INIT_KEYS),
        s => s
            .strip_prefix("species.")
            .filter(|n| n.parse::<usize>().is_ok())
            .map(|_| SPECIES_KEYS),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw deck contents: section -> key -> value, with source line numbers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeckText {
    origin: String,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    /// Line of each section header.
    headers: BTreeMap<String, usize>,
}

impl DeckText {
    pub fn parse(text: &str, origin: &str) -> Result<Self, EngineError> {
        let mut out = DeckText {
            origin: origin.to_string(),
            ..Default::default()
        };
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| out.error(line, "unterminated section header"))?
                    .trim();
                if allowed_keys(name).is_none() {
                    return Err(out.error(line, format!("unknown section [{name}]")));
                }
                if out.sections.contains_key(name) {
                    return Err(out.error(line, format!("duplicate section [{name}]")));
                }
                out.sections.insert(name.to_string(), BTreeMap::new());
                out.headers.insert(name.to_string(), line);
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                out.error(line, format!("expected `key = value`, got `{content}`"))
            })?;
            let Some(section) = current.clone() else {
                return Err(out.error(line, "key outside of any section"));
            };
            out.insert(&section, key.trim(), value.trim(), line)?;
        }
        Ok(out)
    }

    fn error(&self, line: usize, message: impl Into<String>) -> EngineError {
        EngineError::Parse {
            path: self.origin.clone(),
            line,
            message: message.into(),
        }
    }

    fn insert(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), EngineError> {
        let allowed = allowed_keys(section)
            .ok_or_else(|| self.error(line, format!("unknown section [{section}]")))?;
        if !allowed.contains(&key) {
            return Err(self.error(line, format!("unknown key `{key}` in [{section}]")));
        }
        let map = self.sections.entry(section.to_string()).or_default();
        if line > 0 && map.get(key).is_some_and(|e| e.line > 0) {
            return Err(self.error(line, format!("duplicate key [{section}].{key}")));
        }
        map.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
        Ok(())
    }

    /// Applies a `section.key=value` override (e.g. `pipeline.batches=4`,
    /// `species.1.ppc=8`).
    pub fn set(&mut self, assignment: &str) -> Result<(), EngineError> {
        let bad =
            || EngineError::Usage(format!("override `{assignment}` is not section.key=value"));
        let (path, value) = assignment.split_once('=').ok_or_else(bad)?;
        let (section, key) = path.trim().rsplit_once('.').ok_or_else(bad)?;
        self.insert(section, key, value.trim(), 0)
            .map_err(|e| match e {
                EngineError::Parse { message, .. } => EngineError::Usage(message),
                other => other,
            })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|m| m.get(key))
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.get(section, key).map_or(0, |e| e.line)
    }

    fn value<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<T>, EngineError> {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        e.value.parse::<T>().map(Some).map_err(|_| {
            self.error(
                e.line,
                format!("[{section}].{key}: cannot parse `{}`", e.value),
            )
        })
    }

    fn required<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, EngineError> {
        self.value(section, key)?.ok_or_else(|| {
            let line = self.headers.get(section).copied().unwrap_or(0);
            self.error(line, format!("missing mandatory key [{section}].{key}"))
        })
    }

    fn or<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, EngineError> {
        Ok(self.value(section, key)?.unwrap_or(default))
    }

    /// Three comma-separated numbers, or one number repeated.
    fn vec3(&self, section: &str, key: &str, default: [f64; 3]) -> Result<[f64; 3], EngineError> {
        let Some(e) = self.get(section, key) else {
            return Ok(default);
        };
        let parts: Result<Vec<f64>, _> = e
            .value
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect();
        match parts.as_deref() {
            Ok([v]) => Ok([*v; 3]),
            Ok([a, b, c]) => Ok([*a, *b, *c]),
            _ => Err(self.error(
                e.line,
                format!(
                    "[{section}].{key}: expected 1 or 3 numbers, got `{}`",
                    e.value
                ),
            )),
        }
    }

    fn parsed<T>(
        &self,
        section: &str,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Option<T>,
        expected: &str,
    ) -> Result<T, EngineError> {
        let Some(e) = self.get(section, key) else {
            return Ok(default);
        };
        parse(&e.value).ok_or_else(|| {
            self.error(
                e.line,
                format!("[{section}].{key}: expected {expected}, got `{}`", e.value),
            )
        })
    }

    /// Builds and fully validates the deck.
    pub fn to_deck(&self) -> Result<SimulationDeck, EngineError> {
        let deck = self.build()?;
        deck.validate().map_err(|e| self.locate(e))?;
        Ok(deck)
    }

    /// Attaches the source line to a validation error.
    fn locate(&self, e: CoreError) -> EngineError {
        match e {
            CoreError::Config { key, message } => {
                let (section, k) = key.rsplit_once('.').unwrap_or((key.as_str(), ""));
                let line = self.line_of(section, k);
                self.error(line, format!("[{section}].{k}: {message}"))
            }
            other => EngineError::Core(other),
        }
    }

    fn build(&self) -> Result<SimulationDeck, EngineError> {
        let cells = [
            self.required::<usize>("grid", "nx")?,
            self.required::<usize>("grid", "ny")?,
            self.required::<usize>("grid", "nz")?,
        ];
        let lengths = [
            self.required::<f64>("grid", "lx")?,
            self.required::<f64>("grid", "ly")?,
            self.required::<f64>("grid", "lz")?,
        ];
        let boundary = |k: &str| {
            self.parsed(
                "grid",
                k,
                Boundary::Periodic,
                Boundary::parse,
                "periodic|reflecting",
            )
        };
        let boundaries = [
            boundary("boundary_x")?,
            boundary("boundary_y")?,
            boundary("boundary_z")?,
        ];
        let origin = self.vec3("grid", "origin", [0.0; 3])?;
        let geometry =
            GridGeometry::new(cells, lengths, origin, boundaries).map_err(|e| self.locate(e))?;
        for (a, key) in ["dx", "dy", "dz"].into_iter().enumerate() {
            if let Some(h) = self.value::<f64>("grid", key)? {
                let expect = geometry.spacing[a];
                if (h - expect).abs() > 1e-9 * expect {
                    return Err(self.error(
                        self.line_of("grid", key),
                        format!("[grid].{key} = {h} disagrees with length / cells = {expect}"),
                    ));
                }
            }
        }

        let mut species = Vec::new();
        let mut indices: Vec<usize> = self
            .sections
            .keys()
            .filter_map(|s| s.strip_prefix("species.").and_then(|n| n.parse().ok()))
            .collect();
        indices.sort_unstable();
        for (expect, &idx) in indices.iter().enumerate() {
            if idx != expect {
                return Err(self.error(
                    0,
                    format!("species sections must be numbered 0..; missing [species.{expect}]"),
                ));
            }
            let sec = format!("species.{idx}");
            let mut s = SpeciesParams::new(
                self.required(&sec, "charge")?,
                self.required(&sec, "mass")?,
                self.required(&sec, "ppc")?,
            );
            s.drift = self.vec3(&sec, "drift", s.drift)?;
            s.thermal = self.vec3(&sec, "thermal", s.thermal)?;
            s.mover_iterations = self.or(&sec, "mover_iterations", s.mover_iterations)?;
            s.density = self.or(&sec, "density", s.density)?;
            s.population = self.parsed(
                &sec,
                "population",
                s.population,
                Population::parse,
                "sheet|background",
            )?;
            species.push(s);
        }

        let mut deck = SimulationDeck::new(geometry, species);
        deck.dt = self.required("time", "dt")?;
        deck.cycles = self.required("time", "cycles")?;
        deck.c = self.or("time", "c", deck.c)?;
        deck.theta = self.or("time", "theta", deck.theta)?;
        deck.coupling = self.parsed(
            "time",
            "coupling",
            deck.coupling,
            FieldCoupling::parse,
            "explicit|implicit",
        )?;
        deck.smoothing = self.or("time", "smoothing", deck.smoothing)?;
        let d = SolverParams::default();
        deck.solver = SolverParams {
            gmres_restart: self.or("time", "gmres_restart", d.gmres_restart)?,
            gmres_max_iter: self.or("time", "gmres_max_iter", d.gmres_max_iter)?,
            gmres_tol: self.value("time", "gmres_tol")?,
            cg_max_iter: self.or("time", "cg_max_iter", d.cg_max_iter)?,
            cg_tol: self.value("time", "cg_tol")?,
        };

        deck.batches = self.or("pipeline", "batches", deck.batches)?;
        deck.worker_groups = self.or("pipeline", "worker_groups", deck.worker_groups)?;
        deck.workers = self.or("pipeline", "workers", deck.workers)?;
        deck.sort_period = self.or("pipeline", "sort_period", deck.sort_period)?;
        deck.memory_budget = self.or("pipeline", "memory_budget", deck.memory_budget)?;

        deck.particle_precision = self.parsed(
            "precision",
            "particles",
            Precision::Double,
            Precision::parse,
            "single|double",
        )?;
        deck.field_precision = self.parsed(
            "precision",
            "fields",
            Precision::Double,
            Precision::parse,
            "single|double",
        )?;

        let out = OutputConfig::default();
        deck.output = OutputConfig {
            dir: self.value("output", "dir")?,
            field_every: self.or("output", "field_every", out.field_every)?,
            particle_dump: self.or("output", "particle_dump", out.particle_dump)?,
        };

        deck.seed = self.or("init", "seed", deck.seed)?;
        let kind = self.or("init", "kind", String::from("uniform"))?;
        deck.init = match kind.as_str() {
            "gem" => {
                let g = GemParams::default();
                InitKind::Gem(GemParams {
                    b0: self.or("init", "b0", g.b0)?,
                    half_width: self.or("init", "lambda", g.half_width)?,
                    perturbation: self.or("init", "perturbation", g.perturbation)?,
                    background_fraction: self.or(
                        "init",
                        "background_fraction",
                        g.background_fraction,
                    )?,
                })
            }
            "uniform" => InitKind::Uniform {
                b: self.vec3("init", "b", [0.0; 3])?,
            },
            other => {
                return Err(self.error(
                    self.line_of("init", "kind"),
                    format!("[init].kind: expected gem|uniform, got `{other}`"),
                ))
            }
        };
        Ok(deck)
    }
}

/// Reads, parses and validates a deck file.
pub fn parse_deck(path: impl AsRef<Path>) -> Result<SimulationDeck, EngineError> {
    parse_deck_with(path, &[])
}

/// As [`parse_deck`], applying `section.key=value` overrides first.
pub fn parse_deck_with(
    path: impl AsRef<Path>,
    overrides: &[String],
) -> Result<SimulationDeck, EngineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
    let mut raw = DeckText::parse(&text, &path.display().to_string())?;
    for o in overrides {
        raw.set(o)?;
    }
    raw.to_deck()
}

pub fn parse_deck_str(text: &str) -> Result<SimulationDeck, EngineError> {
    DeckText::parse(text, "<deck>")?.to_deck()
}

fn fmt3(v: [f64; 3]) -> String {
    format!("{:?}, {:?}, {:?}", v[0], v[1], v[2])
}

/// Writes every key of `deck` in deck syntax; parsing the result yields an
/// equal deck.
pub fn write_deck(deck: &SimulationDeck) -> String {
    let g = &deck.geometry;
    let mut s = String::new();
    let _ = writeln!(s, "[grid]");
    for (a, n) in ["x", "y", "z"].iter().enumerate() {
        let _ = writeln!(s, "n{n} = {}", g.cells[a]);
    }
    for (a, n) in ["x", "y", "z"].iter().enumerate() {
        let _ = writeln!(s, "l{n} = {:?}", g.lengths[a]);
    }
    for (a, n) in ["x", "y", "z"].iter().enumerate() {
        let _ = writeln!(s, "boundary_{n} = {}", g.boundary[a].name());
    }
    let _ = writeln!(s, "origin = {}", fmt3(g.origin));

    let _ = writeln!(s, "\n[time]");
    let _ = writeln!(s, "dt = {:?}", deck.dt);
    let _ = writeln!(s, "c = {:?}", deck.c);
    let _ = writeln!(s, "theta = {:?}", deck.theta);
    let _ = writeln!(s, "coupling = {}", deck.coupling.name());
    let _ = writeln!(s, "smoothing = {}", deck.smoothing);
    let _ = writeln!(s, "cycles = {}", deck.cycles);
    let _ = writeln!(s, "gmres_restart = {}", deck.solver.gmres_restart);
    let _ = writeln!(s, "gmres_max_iter = {}", deck.solver.gmres_max_iter);
    if let Some(t) = deck.solver.gmres_tol {
        let _ = writeln!(s, "gmres_tol = {t:?}");
    }
    let _ = writeln!(s, "cg_max_iter = {}", deck.solver.cg_max_iter);
    if let Some(t) = deck.solver.cg_tol {
        let _ = writeln!(s, "cg_tol = {t:?}");
    }

    for (i, sp) in deck.species.iter().enumerate() {
        let _ = writeln!(s, "\n[species.{i}]");
        let _ = writeln!(s, "charge = {:?}", sp.charge);
        let _ = writeln!(s, "mass = {:?}", sp.mass);
        let _ = writeln!(s, "ppc = {}", sp.particles_per_cell);
        let _ = writeln!(s, "drift = {}", fmt3(sp.drift));
        let _ = writeln!(s, "thermal = {}", fmt3(sp.thermal));
        let _ = writeln!(s, "mover_iterations = {}", sp.mover_iterations);
        let _ = writeln!(s, "density = {:?}", sp.density);
        let _ = writeln!(s, "population = {}", sp.population.name());
    }

    let _ = writeln!(s, "\n[pipeline]");
    let _ = writeln!(s, "batches = {}", deck.batches);
    let _ = writeln!(s, "worker_groups = {}", deck.worker_groups);
    let _ = writeln!(s, "workers = {}", deck.workers);
    let _ = writeln!(s, "sort_period = {}", deck.sort_period);
    let _ = writeln!(s, "memory_budget = {}", deck.memory_budget);

    let _ = writeln!(s, "\n[precision]");
    let _ = writeln!(s, "particles = {}", deck.particle_precision.name());
    let _ = writeln!(s, "fields = {}", deck.field_precision.name());

    let _ = writeln!(s, "\n[output]");
    if let Some(dir) = &deck.output.dir {
        let _ = writeln!(s, "dir = {dir}");
    }
    let _ = writeln!(s, "field_every = {}", deck.output.field_every);
    let _ = writeln!(s, "particle_dump = {}", deck.output.particle_dump);

    let _ = writeln!(s, "\n[init]");
    let _ = writeln!(s, "seed = {}", deck.seed);
    match &deck.init {
        InitKind::Gem(p) => {
            let _ = writeln!(s, "kind = gem");
            let _ = writeln!(s, "b0 = {:?}", p.b0);
            let _ = writeln!(s, "lambda = {:?}", p.half_width);
            let _ = writeln!(s, "perturbation = {:?}", p.perturbation);
            let _ = writeln!(s, "background_fraction = {:?}", p.background_fraction);
        }
        InitKind::Uniform { b } => {
            let _ = writeln!(s, "kind = uniform");
            let _ = writeln!(s, "b = {}", fmt3(*b));
        }
    }
    s
}
