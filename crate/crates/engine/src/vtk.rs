//! Legacy VTK `STRUCTURED_POINTS` text dumps of node data.

use std::fmt::Write as _;
use std::path::Path;

use batchpic_core::fields::{FieldGrid, MomentGrid};
use batchpic_core::grid::GridGeometry;
use batchpic_core::real::{Precision, Real};

use crate::error::EngineError;

#[derive(Debug, Clone, PartialEq)]
pub enum DumpBlock {
    Scalar { name: String, values: Vec<f64> },
    Vector { name: String, values: [Vec<f64>; 3] },
}

impl DumpBlock {
    pub fn name(&self) -> &str {
        match self {
            DumpBlock::Scalar { name, .. } | DumpBlock::Vector { name, .. } => name,
        }
    }

    /// Values of one component (`0` for scalars).
    pub fn component(&self, c: usize) -> Option<&[f64]> {
        match self {
            DumpBlock::Scalar { values, .. } if c == 0 => Some(values),
            DumpBlock::Vector { values, .. } if c < 3 => Some(&values[c]),
            _ => None,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            DumpBlock::Scalar { .. } => 1,
            DumpBlock::Vector { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub title: String,
    /// Node counts.
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub precision: Precision,
    pub blocks: Vec<DumpBlock>,
}

fn widen<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

impl FieldDump {
    pub fn new(geom: &GridGeometry, precision: Precision, title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            dims: geom.nodes(),
            origin: geom.origin,
            spacing: geom.spacing,
            precision,
            blocks: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn scalar<T: Real>(mut self, name: &str, values: &[T]) -> Self {
        self.blocks.push(DumpBlock::Scalar {
            name: name.into(),
            values: widen(values),
        });
        self
    }

    pub fn vector<T: Real>(mut self, name: &str, values: &[Vec<T>; 3]) -> Self {
        self.blocks.push(DumpBlock::Vector {
            name: name.into(),
            values: [widen(&values[0]), widen(&values[1]), widen(&values[2])],
        });
        self
    }

    /// Standard cycle dump: per-species charge density, then E and B.
    pub fn from_state<P: Real, F: Real>(
        geom: &GridGeometry,
        fields: &FieldGrid<F>,
        moments: &[MomentGrid<P>],
        cycle: usize,
    ) -> Self {
        let mut d = FieldDump::new(geom, F::PRECISION, format!("cycle {cycle}"));
        for m in moments {
            d = d.scalar(&format!("rho_{}", m.species), &m.rho);
        }
        d.vector("E", &fields.e).vector("B", &fields.b)
    }

    pub fn block(&self, name: &str) -> Option<&DumpBlock> {
        self.blocks.iter().find(|b| b.name() == name)
    }

    pub fn to_text(&self) -> String {
        let (ty, digits) = match self.precision {
            Precision::Double => ("double", 14),
            Precision::Single => ("float", 7),
        };
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "{}", self.title.replace('\n', " "));
        let _ = writeln!(s, "ASCII");
        let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
        let [a, b, c] = self.dims;
        let _ = writeln!(s, "DIMENSIONS {a} {b} {c}");
        let [a, b, c] = self.origin;
        let _ = writeln!(s, "ORIGIN {a:?} {b:?} {c:?}");
        let [a, b, c] = self.spacing;
        let _ = writeln!(s, "SPACING {a:?} {b:?} {c:?}");
        let _ = writeln!(s, "POINT_DATA {}", self.node_count());
        let num = |s: &mut String, v: f64| {
            let _ = write!(s, "{v:.digits$e}");
        };
        for block in &self.blocks {
            match block {
                DumpBlock::Scalar { name, values } => {
                    let _ = writeln!(s, "SCALARS {name} {ty} 1");
                    let _ = writeln!(s, "LOOKUP_TABLE default");
                    for v in values {
                        num(&mut s, *v);
                        s.push('\n');
                    }
                }
                DumpBlock::Vector { name, values } => {
                    let _ = writeln!(s, "VECTORS {name} {ty}");
                    for n in 0..values[0].len() {
                        for (c, comp) in values.iter().enumerate() {
                            if c > 0 {
                                s.push(' ');
                            }
                            num(&mut s, comp[n]);
                        }
                        s.push('\n');
                    }
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, EngineError> {
        let bad = |m: String| EngineError::Format(format!("field dump: {m}"));
        let mut lines = text.lines();
        let magic = lines.next().unwrap_or("");
        if !magic.starts_with("# vtk DataFile") {
            return Err(bad("missing `# vtk DataFile` header".into()));
        }
        let title = lines.next().unwrap_or("").to_string();
        if lines.next().map(str::trim) != Some("ASCII") {
            return Err(bad("only ASCII dumps are supported".into()));
        }
        let rest: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
        let mut t = rest.into_iter();
        let expect = |word: &str, t: &mut dyn Iterator<Item = &str>| match t.next() {
            Some(w) if w == word => Ok(()),
            other => Err(bad(format!("expected `{word}`, found {other:?}"))),
        };
        expect("DATASET", &mut t)?;
        expect("STRUCTURED_POINTS", &mut t)?;
        let nums = |t: &mut dyn Iterator<Item = &str>, n: usize| -> Result<Vec<f64>, EngineError> {
            (0..n)
                .map(|_| {
                    let tok = t
                        .next()
                        .ok_or_else(|| bad("unexpected end of file".into()))?;
                    tok.parse::<f64>()
                        .map_err(|_| bad(format!("bad number `{tok}`")))
                })
                .collect()
        };
        expect("DIMENSIONS", &mut t)?;
        let d = nums(&mut t, 3)?;
        let dims = [d[0] as usize, d[1] as usize, d[2] as usize];
        expect("ORIGIN", &mut t)?;
        let o = nums(&mut t, 3)?;
        expect("SPACING", &mut t)?;
        let sp = nums(&mut t, 3)?;
        expect("POINT_DATA", &mut t)?;
        let count = nums(&mut t, 1)?[0] as usize;
        if count != dims.iter().product::<usize>() {
            return Err(bad(format!("POINT_DATA {count} does not match DIMENSIONS")));
        }
        let mut blocks = Vec::new();
        let mut precision = Precision::Double;
        while let Some(kind) = t.next() {
            let name = t
                .next()
                .ok_or_else(|| bad("block without a name".into()))?
                .to_string();
            let ty = t.next().ok_or_else(|| bad("block without a type".into()))?;
            precision = match ty {
                "double" => Precision::Double,
                "float" => Precision::Single,
                other => return Err(bad(format!("unsupported data type `{other}`"))),
            };
            match kind {
                "SCALARS" => {
                    if nums(&mut t, 1)?[0] != 1.0 {
                        return Err(bad("only single-component scalars are supported".into()));
                    }
                    expect("LOOKUP_TABLE", &mut t)?;
                    t.next();
                    let values = nums(&mut t, count)?;
                    blocks.push(DumpBlock::Scalar { name, values });
                }
                "VECTORS" => {
                    let flat = nums(&mut t, 3 * count)?;
                    let mut values = [
                        Vec::with_capacity(count),
                        Vec::with_capacity(count),
                        Vec::with_capacity(count),
                    ];
                    for triple in flat.chunks_exact(3) {
                        for c in 0..3 {
                            values[c].push(triple[c]);
                        }
                    }
                    blocks.push(DumpBlock::Vector { name, values });
                }
                other => return Err(bad(format!("unsupported block `{other}`"))),
            }
        }
        Ok(FieldDump {
            title,
            dims,
            origin: [o[0], o[1], o[2]],
            spacing: [sp[0], sp[1], sp[2]],
            precision,
            blocks,
        })
    }
}

pub fn write_field_dump(dump: &FieldDump, path: impl AsRef<Path>) -> Result<(), EngineError> {
    let path = path.as_ref();
    std::fs::write(path, dump.to_text()).map_err(|e| EngineError::io(path, e))
}

pub fn read_field_dump(path: impl AsRef<Path>) -> Result<FieldDump, EngineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
    FieldDump::parse(&text)
}
