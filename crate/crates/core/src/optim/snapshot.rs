//! Binary snapshots of [`ParamState`].
//!
//! Layout, little-endian throughout: the magic `ADPX1`, a format version
//! byte, the scalar width in bytes, then the state fields. Matrices are
//! written as `rows, cols` followed by raw scalar bits, so a round trip is
//! bit-exact.

use crate::densela::{DenseMatrix, RngSnapshot, RngStream};
use crate::error::{Error, Result};
use crate::lowrank::FactorPair;
use crate::optim::config::OptimizerKind;
use crate::optim::state::{ParamState, SecondMoment};
use crate::scalar::Real;

const MAGIC: &[u8; 5] = b"ADPX1";
const VERSION: u8 = 1;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Snapshot(msg.into())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }

    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn scalar<T: Real>(&mut self, x: T) {
        match T::BYTES {
            4 => self.0.extend_from_slice(&(x.as_f64() as f32).to_bits().to_le_bytes()),
            _ => self.0.extend_from_slice(&x.as_f64().to_bits().to_le_bytes()),
        }
    }

    fn scalars<T: Real>(&mut self, xs: &[T]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.scalar(x);
        }
    }

    fn matrix<T: Real>(&mut self, m: &DenseMatrix<T>) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for &x in m.as_slice() {
            self.scalar(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated stream at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| corrupt("length overflows usize"))
    }

    fn scalar<T: Real>(&mut self) -> Result<T> {
        Ok(match T::BYTES {
            4 => T::of(f32::from_bits(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"))) as f64),
            _ => T::of(f64::from_bits(self.u64()?)),
        })
    }

    fn scalars<T: Real>(&mut self) -> Result<Vec<T>> {
        let n = self.len()?;
        if n.saturating_mul(T::BYTES) > self.buf.len() - self.pos {
            return Err(corrupt("truncated vector"));
        }
        (0..n).map(|_| self.scalar()).collect()
    }

    fn matrix<T: Real>(&mut self) -> Result<DenseMatrix<T>> {
        let rows = self.len()?;
        let cols = self.len()?;
        let n = rows.checked_mul(cols).ok_or_else(|| corrupt("matrix size overflows"))?;
        if n.saturating_mul(T::BYTES) > self.buf.len() - self.pos {
            return Err(corrupt("truncated matrix"));
        }
        let data = (0..n).map(|_| self.scalar()).collect::<Result<Vec<T>>>()?;
        DenseMatrix::from_vec(rows, cols, data).map_err(|e| corrupt(format!("bad matrix: {e}")))
    }
}

fn kind_tag(kind: OptimizerKind) -> u8 {
    match kind {
        OptimizerKind::AdamW => 0,
        OptimizerKind::Adafactor => 1,
        OptimizerKind::Adapprox => 2,
    }
}

/// Encodes `state` as an `ADPX1` byte stream.
pub fn state_serialize<T: Real>(state: &ParamState<T>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u8(VERSION);
    w.u8(T::BYTES as u8);
    w.u8(kind_tag(state.kind));
    w.u64(state.id);
    w.u64(state.shape.0 as u64);
    w.u64(state.shape.1 as u64);
    w.u64(state.step);

    let snap = state.rng.snapshot();
    w.u64(snap.seed);
    w.u64(snap.stream);
    w.0.extend_from_slice(&snap.word_pos.to_le_bytes());
    match snap.spare {
        Some(z) => {
            w.u8(1);
            w.u64(z.to_bits());
        }
        None => w.u8(0),
    }

    match &state.first_moment {
        Some(m) => {
            w.u8(1);
            w.matrix(m);
        }
        None => w.u8(0),
    }
    match &state.second_moment {
        SecondMoment::Dense(v) => {
            w.u8(0);
            w.matrix(v);
        }
        SecondMoment::Factored(f) => {
            w.u8(1);
            w.matrix(f.q());
            w.matrix(f.ut());
        }
        SecondMoment::RowCol { rows, cols } => {
            w.u8(2);
            w.scalars(rows);
            w.scalars(cols);
        }
    }
    w.0
}

/// Decodes a stream written by [`state_serialize`] with the same scalar type.
pub fn state_deserialize<T: Real>(bytes: &[u8]) -> Result<ParamState<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(corrupt("missing ADPX1 header"));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let width = r.u8()? as usize;
    if width != T::BYTES {
        return Err(corrupt(format!("stream holds {width}-byte scalars, expected {}", T::BYTES)));
    }
    let kind = match r.u8()? {
        0 => OptimizerKind::AdamW,
        1 => OptimizerKind::Adafactor,
        2 => OptimizerKind::Adapprox,
        t => return Err(corrupt(format!("unknown optimizer tag {t}"))),
    };
    let id = r.u64()?;
    let shape = (r.len()?, r.len()?);
    let step = r.u64()?;

    let seed = r.u64()?;
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
    let spare = match r.u8()? {
        0 => None,
        1 => Some(f64::from_bits(r.u64()?)),
        t => return Err(corrupt(format!("bad spare tag {t}"))),
    };
    let rng = RngStream::restore(&RngSnapshot {
        seed,
        stream,
        word_pos,
        spare,
    });

    let first_moment = match r.u8()? {
        0 => None,
        1 => Some(r.matrix()?),
        t => return Err(corrupt(format!("bad first-moment tag {t}"))),
    };
    let second_moment = match r.u8()? {
        0 => SecondMoment::Dense(r.matrix()?),
        1 => {
            let q = r.matrix()?;
            let ut = r.matrix()?;
            SecondMoment::Factored(FactorPair::new(q, ut).map_err(|e| corrupt(format!("bad factors: {e}")))?)
        }
        2 => SecondMoment::RowCol {
            rows: r.scalars()?,
            cols: r.scalars()?,
        },
        t => return Err(corrupt(format!("bad second-moment tag {t}"))),
    };
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let consistent = first_moment.as_ref().is_none_or(|m| m.shape() == shape)
        && match &second_moment {
            SecondMoment::Dense(v) => v.shape() == shape,
            SecondMoment::Factored(f) => f.target_shape() == shape,
            SecondMoment::RowCol { rows, cols } => (rows.len(), cols.len()) == shape,
        };
    if !consistent {
        return Err(corrupt("moment shapes disagree with the parameter shape"));
    }
    Ok(ParamState {
        id,
        kind,
        shape,
        first_moment,
        second_moment,
        step,
        rng,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::gaussian_matrix;
    use crate::optim::{step, AdapproxConfig};

    fn cfg() -> AdapproxConfig {
        AdapproxConfig {
            factor_min_dim: 4,
            ..Default::default()
        }
    }

    fn assert_same<T: Real>(a: &ParamState<T>, b: &ParamState<T>) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.kind, b.kind);
        assert_eq!(a.shape, b.shape);
        assert_eq!(a.step, b.step);
        assert_eq!(a.first_moment, b.first_moment);
        assert_eq!(a.second_moment, b.second_moment);
        assert_eq!(a.rng.snapshot(), b.rng.snapshot());
    }

    #[test]
    fn fresh_round_trip() {
        for kind in OptimizerKind::ALL {
            let s = ParamState::<f64>::new(9, kind, 12, 8, &cfg(), RngStream::with_stream(4, 2)).unwrap();
            assert_same(&s, &state_deserialize(&state_serialize(&s)).unwrap());
            let s = ParamState::<f32>::new(9, kind, 12, 8, &cfg(), RngStream::new(4)).unwrap();
            assert_same(&s, &state_deserialize(&state_serialize(&s)).unwrap());
        }
    }

    #[test]
    fn resumed_run_is_bit_identical() {
        let cfg = cfg();
        let mut data = RngStream::new(77);
        let grads: Vec<DenseMatrix<f64>> = (0..25).map(|_| gaussian_matrix(12, 10, &mut data).unwrap()).collect();
        for kind in OptimizerKind::ALL {
            let mut s = ParamState::<f64>::new(0, kind, 12, 10, &cfg, RngStream::new(5)).unwrap();
            let mut w = DenseMatrix::filled(12, 10, 0.5).unwrap();
            for g in &grads[..15] {
                step(&mut s, &mut w, g, 0.01, &cfg).unwrap();
            }
            let bytes = state_serialize(&s);
            let mut resumed: ParamState<f64> = state_deserialize(&bytes).unwrap();
            let mut w2 = w.clone();
            for g in &grads[15..] {
                step(&mut s, &mut w, g, 0.01, &cfg).unwrap();
                step(&mut resumed, &mut w2, g, 0.01, &cfg).unwrap();
            }
            let bits = |m: &DenseMatrix<f64>| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&w), bits(&w2), "{kind}");
            assert_same(&s, &resumed);
        }
    }

    #[test]
    fn malformed_streams() {
        let s = ParamState::<f64>::new(1, OptimizerKind::Adapprox, 6, 5, &cfg(), RngStream::new(1)).unwrap();
        let bytes = state_serialize(&s);
        for cut in [0, 3, 6, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(state_deserialize::<f64>(&bytes[..cut]), Err(Error::Snapshot(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(state_deserialize::<f64>(&bad).is_err());
        let mut bad = bytes.clone();
        bad[5] = 2;
        assert!(state_deserialize::<f64>(&bad).is_err());
        assert!(state_deserialize::<f32>(&bytes).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(state_deserialize::<f64>(&long).is_err());
    }
}
