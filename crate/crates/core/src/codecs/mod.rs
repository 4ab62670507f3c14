//! Compact encodings: one-hot class codes, tight-frame LSH and product quantization.

pub mod bits;
pub mod frame;
pub mod kmeans;
pub mod onehot;
pub mod pq;

use std::fmt;
use std::str::FromStr;

pub use bits::{hamming_distance, BinaryCode};
pub use frame::{lsh_encode, tight_frame_new, TightFrame, FRAME_TOLERANCE};
pub use onehot::{bits_for_classes, onehot_encode, OneHotCode};
pub use pq::{pq_asymmetric_distance, pq_decode, pq_encode, pq_train, PqCode, PqCodebook};

use crate::error::Error;

/// Codec selection for the unseen-class and transfer protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecSpec {
    /// Keep raw features.
    None,
    Pq { m: usize, ks: usize },
    Lsh { bits: usize },
}

impl CodecSpec {
    /// Bits per stored item; `None` for uncompressed features.
    pub fn code_size_bits(&self) -> Option<usize> {
        match *self {
            CodecSpec::None => None,
            CodecSpec::Pq { m, ks } => Some(m * bits_for_classes(ks)),
            CodecSpec::Lsh { bits } => Some(bits),
        }
    }

    pub fn supports_decode(&self) -> bool {
        !matches!(self, CodecSpec::Lsh { .. })
    }
}

impl fmt::Display for CodecSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CodecSpec::None => f.write_str("none"),
            CodecSpec::Pq { m, ks } if ks == pq::DEFAULT_KS => write!(f, "pq:{m}"),
            CodecSpec::Pq { m, ks } => write!(f, "pq:{m}:{ks}"),
            CodecSpec::Lsh { bits } => write!(f, "lsh:{bits}"),
        }
    }
}

impl FromStr for CodecSpec {
    type Err = Error;

    /// Accepts `none`, `pq:M`, `pq:M:KS` and `lsh:B`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Config(format!("unrecognised codec '{s}' (expected none, pq:M[:KS] or lsh:B)"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<usize, Error> {
            match p.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(bad()),
            }
        };
        match parts.as_slice() {
            ["none"] => Ok(CodecSpec::None),
            ["pq", m] => Ok(CodecSpec::Pq {
                m: num(m)?,
                ks: pq::DEFAULT_KS,
            }),
            ["pq", m, ks] => Ok(CodecSpec::Pq {
                m: num(m)?,
                ks: num(ks)?,
            }),
            ["lsh", b] => Ok(CodecSpec::Lsh { bits: num(b)? }),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codec_spec_parsing() {
        assert_eq!("none".parse::<CodecSpec>().unwrap(), CodecSpec::None);
        assert_eq!(
            "pq:8".parse::<CodecSpec>().unwrap(),
            CodecSpec::Pq { m: 8, ks: 256 }
        );
        assert_eq!(
            "pq:4:16".parse::<CodecSpec>().unwrap(),
            CodecSpec::Pq { m: 4, ks: 16 }
        );
        assert_eq!(
            "lsh:64".parse::<CodecSpec>().unwrap(),
            CodecSpec::Lsh { bits: 64 }
        );
        for bad in ["pq", "pq:0", "lsh:x", "opq:4", ""] {
            assert!(bad.parse::<CodecSpec>().is_err(), "{bad}");
        }
        for s in ["none", "pq:8", "pq:4:16", "lsh:64"] {
            assert_eq!(s.parse::<CodecSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn declared_sizes() {
        assert_eq!(CodecSpec::Pq { m: 4, ks: 256 }.code_size_bits(), Some(32));
        assert_eq!(CodecSpec::Lsh { bits: 48 }.code_size_bits(), Some(48));
        assert_eq!(CodecSpec::None.code_size_bits(), None);
    }
}
