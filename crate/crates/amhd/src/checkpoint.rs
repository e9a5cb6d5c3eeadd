//! Checkpoint persistence: the full simulation state as a flat
//! little-endian binary file.
//!
//! Layout, in order:
//!
//! ```text
//! magic   4 bytes  "AMHD"
//! version u32      currently 1
//! n1 n2 n3  u32 x3   grid points per axis
//! l1 l2 l3  f64 x3   box edge lengths
//! t         f64      simulation time
//! gamma mu lambda sigma  f64 x4
//! a u1 u2 u3 B1 B2 B3    f64 x (n1*n2*n3) each, x3-fastest ordering
//! ```
//!
//! Samples are written exactly as stored, so a write/read round trip is
//! bit-identical and a resumed run continues from the same numbers.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::state::State;

const MAGIC: &[u8; 4] = b"AMHD";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 3 * 4 + 3 * 8 + 8 + 4 * 8;

/// Serialize a state with its physical parameters and time stamp.
pub fn write_checkpoint(path: &Path, s: &State, params: &PhysParams, t: f64) -> Result<()> {
    let g = s.grid();
    let [n1, n2, n3] = g.n();
    let len = g.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + 7 * 8 * len);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for n in [n1, n2, n3] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for l in g.l() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&t.to_le_bytes());
    for v in [params.gamma, params.mu, params.lambda, params.sigma] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let arrays = [
        s.a.component(0),
        s.u.component(0),
        s.u.component(1),
        s.u.component(2),
        s.b.component(0),
        s.b.component(1),
        s.b.component(2),
    ];
    for arr in arrays {
        for v in arr {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "file truncated at byte {} (wanted {} more)",
                self.pos, n
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_array(&mut self, len: usize) -> Result<Vec<f64>> {
        let raw = self.take(len * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Read a checkpoint back into a state, its parameters (with the default
/// vacuum floor, which is not persisted), and its time stamp.
pub fn read_checkpoint(path: &Path) -> Result<(State, PhysParams, f64)> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let n = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let l = [r.f64()?, r.f64()?, r.f64()?];
    let t = r.f64()?;
    let (gamma, mu, lambda, sigma) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    if !t.is_finite() {
        return Err(Error::Checkpoint(format!("non-finite time stamp {t}")));
    }
    let params = PhysParams::new(mu, lambda, sigma, gamma)?;
    let grid = Arc::new(Grid::new(n, l)?);
    let len = grid.len();
    let a = r.f64_array(len)?;
    let u: [Vec<f64>; 3] = [r.f64_array(len)?, r.f64_array(len)?, r.f64_array(len)?];
    let b: [Vec<f64>; 3] = [r.f64_array(len)?, r.f64_array(len)?, r.f64_array(len)?];
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after field data",
            buf.len() - r.pos
        )));
    }
    let state = State::new(
        Field::scalar(grid.clone(), a)?,
        Field::vector(grid.clone(), u)?,
        Field::vector(grid, b)?,
    )?;
    Ok((state, params, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ineq::random_bandlimited;
    use crate::ops;
    use std::f64::consts::TAU;

    fn random_state(g: &Arc<Grid>, seed: u64) -> State {
        let a = random_bandlimited(g, seed, 2, 2.0).unwrap().map(|v| 0.1 * v);
        let u = Field::vector(
            g.clone(),
            std::array::from_fn(|c| {
                random_bandlimited(g, seed + 1 + c as u64, 2, 2.0).unwrap().component(0).to_vec()
            }),
        )
        .unwrap();
        let b = ops::project_divfree(
            &Field::vector(
                g.clone(),
                std::array::from_fn(|c| {
                    random_bandlimited(g, seed + 4 + c as u64, 2, 2.0)
                        .unwrap()
                        .component(0)
                        .to_vec()
                }),
            )
            .unwrap(),
        )
        .unwrap();
        State::new(a, u, b).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Arc::new(Grid::new([8, 6, 10], [TAU, 2.0 * TAU, TAU]).unwrap());
        let s = random_state(&g, 17);
        let params = PhysParams::new(0.7, 0.1, 1.3, 1.4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        write_checkpoint(&path, &s, &params, 2.625).unwrap();
        let (back, p2, t2) = read_checkpoint(&path).unwrap();
        assert_eq!(t2, 2.625);
        assert_eq!((p2.mu, p2.lambda, p2.sigma, p2.gamma), (0.7, 0.1, 1.3, 1.4));
        assert_eq!(back.grid().n(), g.n());
        assert_eq!(back.grid().l(), g.l());
        let pairs = [
            (s.a.component(0), back.a.component(0)),
            (s.u.component(0), back.u.component(0)),
            (s.u.component(1), back.u.component(1)),
            (s.u.component(2), back.u.component(2)),
            (s.b.component(0), back.b.component(0)),
            (s.b.component(1), back.b.component(1)),
            (s.b.component(2), back.b.component(2)),
        ];
        for (x, y) in pairs {
            for (a, b) in x.iter().zip(y) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn header_layout_is_frozen() {
        let g = Arc::new(Grid::new([4, 4, 4], [TAU, TAU, TAU]).unwrap());
        let s = State::zero(g);
        let params = PhysParams::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.ckpt");
        write_checkpoint(&path, &s, &params, 0.5).unwrap();
        let buf = fs::read(&path).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 7 * 8 * 64);
        assert_eq!(&buf[0..4], b"AMHD");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        for i in 0..3 {
            let off = 8 + 4 * i;
            assert_eq!(u32::from_le_bytes(buf[off..off + 4].try_into().unwrap()), 4);
        }
        let f = |off: usize| f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        assert_eq!(f(20), TAU);
        assert_eq!(f(28), TAU);
        assert_eq!(f(36), TAU);
        assert_eq!(f(44), 0.5); // t
        assert_eq!(f(52), 2.0); // gamma
        assert_eq!(f(60), 1.0); // mu
        assert_eq!(f(68), 0.0); // lambda
        assert_eq!(f(76), 1.0); // sigma
        assert!(buf[HEADER_LEN..].iter().all(|b| *b == 0));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = Arc::new(Grid::new([4, 4, 4], [TAU, TAU, TAU]).unwrap());
        let s = State::zero(g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        write_checkpoint(&path, &s, &PhysParams::default(), 0.0).unwrap();

        let good = fs::read(&path).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'Z';
        fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        fs::write(&path, &bad_version).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(_))));

        fs::write(&path, &good[..good.len() - 11]).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(_))));

        let mut trailing = good.clone();
        trailing.extend_from_slice(&[0u8; 3]);
        fs::write(&path, &trailing).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
