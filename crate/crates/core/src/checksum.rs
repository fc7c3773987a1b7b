//! FNV-1a checksums over tensor contents.
//!
//! Used wherever the contract pins a value across runs and platforms
//! (fixture streams, forward-pass logits). The hash runs over the elements'
//! little-endian byte encoding in tensor layout order.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Checksum of a tensor's elements (little-endian bytes, layout order).
pub fn tensor_checksum<T: Scalar>(t: &Tensor<T>) -> u64 {
    let mut h = FNV_OFFSET;
    for &v in t.data() {
        let bytes: [u8; 8];
        let slice: &[u8] = match T::DTYPE {
            crate::scalar::Dtype::F32 => {
                let b = (v.to_f64() as f32).to_le_bytes();
                bytes = [b[0], b[1], b[2], b[3], 0, 0, 0, 0];
                &bytes[..4]
            }
            crate::scalar::Dtype::F64 => {
                bytes = v.to_f64().to_le_bytes();
                &bytes
            }
        };
        for &b in slice {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_empty_is_offset_basis() {
        assert_eq!(fnv1a64(&[]), 0xcbf2_9ce4_8422_2325);
    }

    #[test]
    fn fnv_known_vector() {
        // FNV-1a 64 of "a" per the reference tables.
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
