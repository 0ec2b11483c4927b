//! Floating-point precision plumbing.

use core::fmt::{Debug, Display};

use num_traits::{Float, FloatConst};

/// Storage/compute precision of one part of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" => Some(Precision::Single),
            "double" => Some(Precision::Double),
            _ => None,
        }
    }
}

/// Particle/field precision pair.
///
/// Only three combinations are meaningful: all-single, all-double, and mixed
/// (single particles with double fields). Double particles over single fields
/// is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecisionMode {
    Single,
    Double,
    Mixed,
}

impl PrecisionMode {
    pub fn from_parts(particles: Precision, fields: Precision) -> Option<Self> {
        match (particles, fields) {
            (Precision::Single, Precision::Single) => Some(PrecisionMode::Single),
            (Precision::Double, Precision::Double) => Some(PrecisionMode::Double),
            (Precision::Single, Precision::Double) => Some(PrecisionMode::Mixed),
            (Precision::Double, Precision::Single) => None,
        }
    }

    pub fn particles(self) -> Precision {
        match self {
            PrecisionMode::Double => Precision::Double,
            PrecisionMode::Single | PrecisionMode::Mixed => Precision::Single,
        }
    }

    pub fn fields(self) -> Precision {
        match self {
            PrecisionMode::Single => Precision::Single,
            PrecisionMode::Double | PrecisionMode::Mixed => Precision::Double,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PrecisionMode::Single => "single",
            PrecisionMode::Double => "double",
            PrecisionMode::Mixed => "mixed",
        }
    }
}

const TWO_POW_32: f64 = 4_294_967_296.0;

/// Scalar type usable for particle or field data.
pub trait Real: Float + FloatConst + Default + Debug + Display + Send + Sync + 'static {
    const PRECISION: Precision;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Round-to-nearest conversion between precisions; exact when widening.
    #[inline(always)]
    fn cast<T: Real>(self) -> T {
        T::from_f64(self.as_f64())
    }

    /// Lossless reinterpretation as raw bits, widened to 64 bits.
    fn to_bits_u64(self) -> u64;

    /// Splits `self` into two integer words so that
    /// `self ~= (hi * 2^32 + lo) * 2^-64`, truncating below 2^-64.
    ///
    /// Both words are summed with wrapping arithmetic by the moment
    /// accumulator, which makes deposition exact and order-independent.
    #[inline(always)]
    fn to_fixed(self) -> (i64, i64) {
        let scaled = self.as_f64() * TWO_POW_32;
        let hi = scaled as i64;
        let lo = ((scaled - hi as f64) * TWO_POW_32) as i64;
        (hi, lo)
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits() as u64
    }
}

/// Recombines the two fixed-point words produced by [`Real::to_fixed`].
#[inline]
pub fn from_fixed(hi: i64, lo: i64) -> f64 {
    let total = ((hi as i128) << 32) + lo as i128;
    total as f64 / (TWO_POW_32 * TWO_POW_32)
}
