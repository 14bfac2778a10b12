//! Floating-point element abstraction.
//!
//! All transforms, weights and caches are generic over [`Scalar`] so the same
//! code paths serve an `f32` production mode and an `f64` oracle mode.

use std::cell::RefCell;
use std::fmt::Display;
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign, ToPrimitive};
use realfft::RealFftPlanner;

/// Element dtype tag, used by the weight container header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "f32" => Some(DType::F32),
            "f64" => Some(DType::F64),
            _ => None,
        }
    }
}

/// Real element type usable in every numeric path of the crate.
pub trait Scalar:
    rustfft::FftNum + Float + FloatConst + NumAssign + ToPrimitive + Default + Display + Sum
{
    const DTYPE: DType;

    fn from_real(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Runs `f` against the thread-local FFT planner for this precision.
    /// The planner memoizes plans per transform length.
    fn with_planner<R>(f: impl FnOnce(&mut RealFftPlanner<Self>) -> R) -> R;

    /// Raw little-endian bytes of one element.
    fn write_le(self, out: &mut Vec<u8>);

    /// Inverse of [`Scalar::write_le`]; `bytes.len()` must equal
    /// `Self::DTYPE.size_bytes()`.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;

    fn from_real(v: f64) -> Self {
        v as f32
    }

    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    fn with_planner<R>(f: impl FnOnce(&mut RealFftPlanner<f32>) -> R) -> R {
        thread_local! {
            static PLANNER: RefCell<RealFftPlanner<f32>> =
                RefCell::new(RealFftPlanner::new());
        }
        PLANNER.with(|p| f(&mut p.borrow_mut()))
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("f32 is 4 bytes"))
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;

    fn from_real(v: f64) -> Self {
        v
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn with_planner<R>(f: impl FnOnce(&mut RealFftPlanner<f64>) -> R) -> R {
        thread_local! {
            static PLANNER: RefCell<RealFftPlanner<f64>> =
                RefCell::new(RealFftPlanner::new());
        }
        PLANNER.with(|p| f(&mut p.borrow_mut()))
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("f64 is 8 bytes"))
    }
}
