//! Binary persistence for frames, codebooks and models.
//!
//! Layout of one record, all integers little-endian:
//!
//! ```text
//! magic     8 bytes   "HBCODEC1"
//! kind      u32       see [`Kind`]
//! ndims     u32
//! dims      ndims × u32
//! seed      u32
//! payload   f32 × payload_len(kind, dims), row-major
//! ```
//!
//! Records can be concatenated; a model file holds an anchor map followed by
//! a softmax model. Payload lengths per kind:
//!
//! | kind | dims | payload |
//! |------|------|---------|
//! | frame | `[b, d, has_center]` | `A` (`b × d`), then `center` (`d`) if present |
//! | pq | `[d, M, ks, dsub]` | centroids `M × ks × dsub` |
//! | softmax | `[C, F]` | `W` (`C × F`), bias (`C`), λ |
//! | anchors | `[h, d]` | anchors (`h × d`), σ |
//! | hidden-layer head | `[C, F, H]` | `W1` (`H × F`), `b1` (`H`), `W2` (`C × H`), `b2` (`C`), λ |

use std::io::{self, Read, Write};

use crate::classifier::{GaussianAnchorMap, HiddenLayerModel, ProbabilisticClassifier, SoftmaxModel};
use crate::codecs::{PqCodebook, TightFrame};
use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

pub const MAGIC: &[u8; 8] = b"HBCODEC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Kind {
    Frame = 1,
    Pq = 2,
    Softmax = 3,
    Anchors = 4,
    HiddenLayer = 5,
}

impl Kind {
    fn from_u32(v: u32) -> Result<Self> {
        Ok(match v {
            1 => Kind::Frame,
            2 => Kind::Pq,
            3 => Kind::Softmax,
            4 => Kind::Anchors,
            5 => Kind::HiddenLayer,
            other => return Err(Error::Corruption(format!("unknown container kind {other}"))),
        })
    }

    fn payload_len(self, dims: &[u32]) -> Result<usize> {
        let d: Vec<usize> = dims.iter().map(|&v| v as usize).collect();
        let want = |n: usize| {
            if d.len() == n {
                Ok(())
            } else {
                Err(Error::Corruption(format!(
                    "{self:?} record needs {n} dims, has {}",
                    d.len()
                )))
            }
        };
        Ok(match self {
            Kind::Frame => {
                want(3)?;
                d[0] * d[1] + d[2].min(1) * d[1]
            }
            Kind::Pq => {
                want(4)?;
                d[1] * d[2] * d[3]
            }
            Kind::Softmax => {
                want(2)?;
                d[0] * d[1] + d[0] + 1
            }
            Kind::Anchors => {
                want(2)?;
                d[0] * d[1] + 1
            }
            Kind::HiddenLayer => {
                want(3)?;
                d[2] * d[1] + d[2] + d[0] * d[2] + d[0] + 1
            }
        })
    }
}

/// One decoded record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub kind: Kind,
    pub dims: Vec<u32>,
    pub seed: u32,
    pub payload: Vec<f32>,
}

impl Record {
    pub fn new(kind: Kind, dims: Vec<u32>, seed: u32, payload: Vec<f32>) -> Result<Self> {
        let expected = kind.payload_len(&dims)?;
        if payload.len() != expected {
            return Err(Error::Corruption(format!(
                "{kind:?} payload has {} values, expected {expected}",
                payload.len()
            )));
        }
        Ok(Self {
            kind,
            dims,
            seed,
            payload,
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.kind as u32).to_le_bytes())?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.payload {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the next record; `Ok(None)` at a clean end of stream.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Self>> {
        let mut magic = [0u8; 8];
        match read_exact_or_eof(r, &mut magic)? {
            false => return Ok(None),
            true if &magic != MAGIC => {
                return Err(Error::Corruption("bad magic, not an HBCODEC1 record".into()))
            }
            true => {}
        }
        let kind = Kind::from_u32(read_u32(r)?)?;
        let ndims = read_u32(r)? as usize;
        if ndims > 16 {
            return Err(Error::Corruption(format!("implausible dimension count {ndims}")));
        }
        let dims = (0..ndims).map(|_| read_u32(r)).collect::<Result<Vec<_>>>()?;
        let seed = read_u32(r)?;
        let len = kind.payload_len(&dims)?;
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes).map_err(truncated)?;
        let payload = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Some(Self {
            kind,
            dims,
            seed,
            payload,
        }))
    }

    fn expect(&self, kind: Kind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Corruption(format!(
                "expected a {kind:?} record, found {:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Corruption("truncated record".into())
    } else {
        Error::Io(e)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(Error::Corruption("truncated record header".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

/// The header keeps only the low 32 bits of a seed; it identifies the run, it
/// isn't needed to rebuild the object.
fn seed32(seed: u64) -> Result<u32> {
    Ok(seed as u32)
}

fn dim32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Config(format!("dimension {v} exceeds 32 bits")))
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

fn narrow(v: &[f64]) -> impl Iterator<Item = f32> + '_ {
    v.iter().map(|&x| x as f32)
}

pub fn frame_record(frame: &TightFrame) -> Result<Record> {
    let mut payload: Vec<f32> = narrow(frame.matrix().as_slice()).collect();
    if let Some(c) = frame.center() {
        payload.extend(narrow(c));
    }
    Record::new(
        Kind::Frame,
        vec![
            dim32(frame.bits())?,
            dim32(frame.input_dim())?,
            u32::from(frame.center().is_some()),
        ],
        seed32(frame.seed())?,
        payload,
    )
}

pub fn frame_from_record(rec: &Record) -> Result<TightFrame> {
    rec.expect(Kind::Frame)?;
    let (b, d) = (rec.dims[0] as usize, rec.dims[1] as usize);
    let matrix = FeatureMatrix::new(b, d, widen(&rec.payload[..b * d]))?;
    let center = (rec.dims[2] != 0).then(|| widen(&rec.payload[b * d..]));
    TightFrame::from_parts(matrix, u64::from(rec.seed), center)
}

pub fn pq_record(cb: &PqCodebook) -> Result<Record> {
    Record::new(
        Kind::Pq,
        vec![
            dim32(cb.input_dim())?,
            dim32(cb.num_subquantizers())?,
            dim32(cb.ks())?,
            dim32(cb.sub_dim())?,
        ],
        seed32(cb.seed())?,
        narrow(cb.centroids()).collect(),
    )
}

pub fn pq_from_record(rec: &Record) -> Result<PqCodebook> {
    rec.expect(Kind::Pq)?;
    let d = &rec.dims;
    let cb = PqCodebook::from_parts(
        d[0] as usize,
        d[1] as usize,
        d[2] as usize,
        widen(&rec.payload),
        u64::from(rec.seed),
    )?;
    if cb.sub_dim() != d[3] as usize {
        return Err(Error::Corruption("PQ sub-dimension disagrees with d and M".into()));
    }
    Ok(cb)
}

pub fn softmax_record(model: &SoftmaxModel, seed: u64) -> Result<Record> {
    let mut payload: Vec<f32> = narrow(model.weights()).collect();
    payload.extend(narrow(model.bias()));
    payload.push(model.lambda() as f32);
    Record::new(
        Kind::Softmax,
        vec![dim32(model.num_classes())?, dim32(model.num_features())?],
        seed32(seed)?,
        payload,
    )
}

pub fn softmax_from_record(rec: &Record) -> Result<SoftmaxModel> {
    rec.expect(Kind::Softmax)?;
    let (c, f) = (rec.dims[0] as usize, rec.dims[1] as usize);
    let p = widen(&rec.payload);
    SoftmaxModel::from_parts(c, f, p[..c * f].to_vec(), p[c * f..c * f + c].to_vec(), p[c * f + c])
}

pub fn hidden_layer_record(model: &HiddenLayerModel, seed: u64) -> Result<Record> {
    let (c, f, h) = (model.num_classes(), model.num_features(), model.hidden_units());
    Record::new(
        Kind::HiddenLayer,
        vec![dim32(c)?, dim32(f)?, dim32(h)?],
        seed32(seed)?,
        narrow(model.params())
            .chain(std::iter::once(model.lambda() as f32))
            .collect(),
    )
}

pub fn hidden_layer_from_record(rec: &Record) -> Result<HiddenLayerModel> {
    rec.expect(Kind::HiddenLayer)?;
    let (c, f, h) = (rec.dims[0] as usize, rec.dims[1] as usize, rec.dims[2] as usize);
    let mut p = widen(&rec.payload);
    let lambda = p.pop().unwrap();
    HiddenLayerModel::from_parts(c, f, h, p, lambda)
}

pub fn anchors_record(map: &GaussianAnchorMap) -> Result<Record> {
    let mut payload: Vec<f32> = narrow(map.anchors().as_slice()).collect();
    payload.push(map.sigma() as f32);
    Record::new(
        Kind::Anchors,
        vec![dim32(map.num_anchors())?, dim32(map.input_dim())?],
        seed32(map.seed())?,
        payload,
    )
}

pub fn anchors_from_record(rec: &Record) -> Result<GaussianAnchorMap> {
    rec.expect(Kind::Anchors)?;
    let (h, d) = (rec.dims[0] as usize, rec.dims[1] as usize);
    let p = widen(&rec.payload);
    let anchors = FeatureMatrix::new(h, d, p[..h * d].to_vec())?;
    GaussianAnchorMap::from_parts(anchors, p[h * d], u64::from(rec.seed))
}

/// Reads every record of a stream.
pub fn read_all<R: Read>(r: &mut R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    while let Some(rec) = Record::read_from(r)? {
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let rec = Record::new(Kind::Anchors, vec![1, 2], 7, vec![1.0, -2.0, 0.5]).unwrap();
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        let mut expected = b"HBCODEC1".to_vec();
        for v in [4u32, 2, 1, 2, 7] {
            expected.extend(v.to_le_bytes());
        }
        for v in [1.0f32, -2.0, 0.5] {
            expected.extend(v.to_le_bytes());
        }
        assert_eq!(buf, expected);
        assert_eq!(Record::read_from(&mut buf.as_slice()).unwrap(), Some(rec));
    }

    #[test]
    fn frame_and_pq_round_trip() {
        let frame = TightFrame::new(4, 8, 3).unwrap().with_center(vec![0.25; 4]).unwrap();
        let rec = frame_record(&frame).unwrap();
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        let back = frame_from_record(&read_all(&mut buf.as_slice()).unwrap()[0]).unwrap();
        assert_eq!(back.bits(), 8);
        assert_eq!(back.center(), Some(&[0.25; 4][..]));
        for (a, b) in back.matrix().as_slice().iter().zip(frame.matrix().as_slice()) {
            assert_eq!(*a, *b as f32 as f64);
        }

        let rows: Vec<[f64; 4]> = (0..32).map(|i| [i as f64, 0.5, -(i as f64), 2.0]).collect();
        let data = FeatureMatrix::from_rows(&rows).unwrap();
        let cb = PqCodebook::train(&data, 2, 4, 9).unwrap();
        let back = pq_from_record(&pq_record(&cb).unwrap()).unwrap();
        assert_eq!(back.ks(), 4);
        assert_eq!(back.encode(data.row(3)).unwrap(), cb.encode(data.row(3)).unwrap());
    }

    #[test]
    fn corrupt_streams_rejected() {
        let rec = Record::new(Kind::Softmax, vec![2, 1], 0, vec![0.0; 5]).unwrap();
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        assert!(matches!(
            Record::read_from(&mut &buf[..buf.len() - 1]),
            Err(Error::Corruption(_))
        ));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Record::read_from(&mut bad.as_slice()).is_err());
        assert!(Record::new(Kind::Softmax, vec![2, 1], 0, vec![0.0; 4]).is_err());
        assert_eq!(seed32(u64::from(u32::MAX) + 5).unwrap(), 4);
        assert_eq!(Record::read_from(&mut &[][..]).unwrap(), None);
    }
}
