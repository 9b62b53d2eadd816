//! Floating-point element type of embeddings.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// `f32` or `f64`, with a fixed little-endian encoding for index files.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {
    /// Encoded width in bytes.
    const BYTES: usize;

    fn write_le(self, out: &mut Vec<u8>);

    /// `bytes.len()` must equal `BYTES`.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut buf = [0u8; 4];
        buf.copy_from_slice(bytes);
        f32::from_le_bytes(buf)
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(bytes);
        f64::from_le_bytes(buf)
    }
}
