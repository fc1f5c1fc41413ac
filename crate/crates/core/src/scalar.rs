//! Floating-point scalar abstraction shared by the vector and scoring code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// A real scalar usable for embeddings, similarity scores and ROUGE ratios.
///
/// Besides the arithmetic from `num-traits`, a scalar knows its on-disk
/// little-endian encoding so vector blocks can be persisted bit-exactly.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Encoded width in bytes.
    const WIDTH: usize;
    /// Tag written into index headers.
    const TAG: u8;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    fn from_f64_lossy(value: f64) -> Self {
        <Self as NumCast>::from(value).unwrap_or_else(Self::nan)
    }

    fn from_count(value: usize) -> Self {
        <Self as NumCast>::from(value).unwrap_or_else(Self::infinity)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const WIDTH: usize = 4;
    const TAG: u8 = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut raw = [0u8; 4];
        raw.copy_from_slice(&bytes[..4]);
        f32::from_le_bytes(raw)
    }
}

impl Scalar for f64 {
    const WIDTH: usize = 8;
    const TAG: u8 = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Scalar>(value: T) -> T {
        let mut buf = Vec::new();
        value.write_le(&mut buf);
        assert_eq!(buf.len(), T::WIDTH);
        T::read_le(&buf)
    }

    #[test]
    fn le_encoding_is_bit_exact() {
        for v in [0.0f64, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, -123.456e200] {
            assert_eq!(roundtrip(v).to_bits(), v.to_bits());
        }
        for v in [0.0f32, 0.1, -7.25e-30] {
            assert_eq!(roundtrip(v).to_bits(), v.to_bits());
        }
    }
}
