//! CSV and compact binary persistence for trajectories and transition pairs.
//!
//! Binary layout (little-endian): 4-byte magic, `u32` version, then a fixed header
//! and the raw `f64` payload.
//!
//! - Trajectories (`FXTR`): `dim, n_traj, n_steps, seed, excluded` as `u64`, `dt` as `f64`, data.
//! - Pairs (`FXPR`): `dim, count` as `u64`, `dt` as `f64`, current states, next states.

use std::io::{Read, Write};

use super::data::TransitionPairs;
use super::simulate::TrajectorySet;
use crate::error::{Error, Result};

pub const BINARY_VERSION: u32 = 1;
const TRAJ_MAGIC: &[u8; 4] = b"FXTR";
const PAIR_MAGIC: &[u8; 4] = b"FXPR";

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Header `t,x1..xd,trajectory_id`, one row per recorded state.
pub fn write_trajectories_csv<W: Write>(traj: &TrajectorySet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim).map(|k| format!("x{k}")));
    header.push("trajectory_id".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(traj.dim + 2);
    for j in 0..traj.n_traj() {
        for s in 0..=traj.n_steps {
            row.clear();
            row.push((s as f64 * traj.dt).to_string());
            row.extend(traj.state(j, s).iter().map(f64::to_string));
            row.push(j.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV written by [`write_trajectories_csv`]. Rows of one trajectory
/// must be contiguous and every trajectory must have the same length.
pub fn read_trajectories_csv<R: Read>(input: R, seed: u64) -> Result<TrajectorySet> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < 3 || &header[0] != "t" || &header[header.len() - 1] != "trajectory_id" {
        return Err(Error::Parse(
            "expected header t,x1..xd,trajectory_id".into(),
        ));
    }
    let dim = header.len() - 2;
    let mut data = Vec::new();
    let mut lengths: Vec<usize> = Vec::new();
    let mut last_id: Option<String> = None;
    let mut times = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("{s}: {e}")))
        };
        if last_id.as_deref() != Some(&rec[dim + 1]) {
            lengths.push(0);
            last_id = Some(rec[dim + 1].to_string());
        }
        *lengths.last_mut().expect("pushed above") += 1;
        if lengths.len() == 1 {
            times.push(parse(&rec[0])?);
        }
        for k in 0..dim {
            data.push(parse(&rec[k + 1])?);
        }
    }
    let per = *lengths
        .first()
        .ok_or_else(|| Error::Parse("no trajectory rows".into()))?;
    if per < 2 || lengths.iter().any(|&l| l != per) {
        return Err(Error::Parse(
            "trajectories must share a length of at least 2".into(),
        ));
    }
    let dt = times[1] - times[0];
    Ok(TrajectorySet {
        dim,
        n_steps: per - 1,
        dt,
        seed,
        data,
        excluded: 0,
    })
}

/// Header `dt,x1..xd,next_x1..next_xd`, one row per pair.
pub fn write_pairs_csv<W: Write>(pairs: &TransitionPairs, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["dt".to_string()];
    header.extend((1..=pairs.dim).map(|k| format!("x{k}")));
    header.extend((1..=pairs.dim).map(|k| format!("next_x{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for j in 0..pairs.len() {
        let row: Vec<String> = std::iter::once(pairs.dt)
            .chain(pairs.x(j).iter().copied())
            .chain(pairs.y(j).iter().copied())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Parse("truncated binary payload".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Parse("count overflows usize".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Parse("count overflows".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::Parse("bad magic bytes".into()));
        }
        let version = self.u32()?;
        if version != BINARY_VERSION {
            return Err(Error::Parse(format!(
                "unsupported binary version {version}"
            )));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Parse("trailing bytes after payload".into()));
        }
        Ok(())
    }
}

fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn trajectories_to_bytes(traj: &TrajectorySet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(56 + traj.data.len() * 8);
    buf.extend_from_slice(TRAJ_MAGIC);
    buf.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    for v in [traj.dim, traj.n_traj(), traj.n_steps] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(&traj.seed.to_le_bytes());
    buf.extend_from_slice(&(traj.excluded as u64).to_le_bytes());
    buf.extend_from_slice(&traj.dt.to_le_bytes());
    put_f64s(&mut buf, &traj.data);
    buf
}

pub fn trajectories_from_bytes(bytes: &[u8]) -> Result<TrajectorySet> {
    let mut r = ByteReader { bytes, pos: 0 };
    r.header(TRAJ_MAGIC)?;
    let dim = r.usize()?;
    let n_traj = r.usize()?;
    let n_steps = r.usize()?;
    let seed = r.u64()?;
    let excluded = r.usize()?;
    let dt = r.f64()?;
    if dim == 0 {
        return Err(Error::Parse("zero dimension".into()));
    }
    let count = n_traj
        .checked_mul(n_steps + 1)
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| Error::Parse("count overflows".into()))?;
    let data = r.f64s(count)?;
    r.finish()?;
    Ok(TrajectorySet {
        dim,
        n_steps,
        dt,
        seed,
        data,
        excluded,
    })
}

pub fn pairs_to_bytes(pairs: &TransitionPairs) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + pairs.current.len() * 16);
    buf.extend_from_slice(PAIR_MAGIC);
    buf.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    buf.extend_from_slice(&(pairs.dim as u64).to_le_bytes());
    buf.extend_from_slice(&(pairs.len() as u64).to_le_bytes());
    buf.extend_from_slice(&pairs.dt.to_le_bytes());
    put_f64s(&mut buf, &pairs.current);
    put_f64s(&mut buf, &pairs.next);
    buf
}

pub fn pairs_from_bytes(bytes: &[u8]) -> Result<TransitionPairs> {
    let mut r = ByteReader { bytes, pos: 0 };
    r.header(PAIR_MAGIC)?;
    let dim = r.usize()?;
    let n = r.usize()?;
    let dt = r.f64()?;
    let len = n
        .checked_mul(dim)
        .ok_or_else(|| Error::Parse("count overflows".into()))?;
    let current = r.f64s(len)?;
    let next = r.f64s(len)?;
    r.finish()?;
    TransitionPairs::new(dim, dt, current, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{benchmark, euler_maruyama, make_pairs};

    fn sample() -> TrajectorySet {
        let b = benchmark("ol2d").unwrap();
        euler_maruyama(&b.spec, &b.init, 0.01, 5, 3, 11).unwrap()
    }

    #[test]
    fn binary_round_trips_are_exact() {
        let traj = sample();
        let back = trajectories_from_bytes(&trajectories_to_bytes(&traj)).unwrap();
        assert_eq!(back, traj);
        let pairs = make_pairs(&traj);
        assert_eq!(pairs_from_bytes(&pairs_to_bytes(&pairs)).unwrap(), pairs);
    }

    #[test]
    fn corrupt_binary_is_rejected() {
        let bytes = trajectories_to_bytes(&sample());
        assert!(trajectories_from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(pairs_from_bytes(&bytes).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(trajectories_from_bytes(&bad).is_err());
    }

    #[test]
    fn csv_round_trip_and_header() {
        let traj = sample();
        let mut buf = Vec::new();
        write_trajectories_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2,trajectory_id\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 6);
        let back = read_trajectories_csv(buf.as_slice(), traj.seed).unwrap();
        assert_eq!(back.data, traj.data);
        assert_eq!(back.n_steps, 5);
        assert!((back.dt - 0.01).abs() < 1e-15);

        let mut pbuf = Vec::new();
        write_pairs_csv(&make_pairs(&traj), &mut pbuf).unwrap();
        let ptext = String::from_utf8(pbuf).unwrap();
        assert!(ptext.starts_with("dt,x1,x2,next_x1,next_x2\n"));
        assert_eq!(ptext.lines().count(), 1 + 15);
    }
}
