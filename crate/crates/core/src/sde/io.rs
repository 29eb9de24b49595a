//! Batch serialization.
//!
//! CSV: header `path,t,x1,...,xn`, one row per path and grid time.
//!
//! Binary (all little-endian):
//!
//! ```text
//! b"SAVG1"
//! u64 dim, u64 n_paths, u64 n_times
//! f64 gamma, f64 dt, u64 seed
//! f64 × n_times            time grid
//! f64 × n_paths·n_times·dim  states, path-major then time then coordinate
//! ```

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use super::TrajectoryBatch;

pub const MAGIC: &[u8; 5] = b"SAVG1";

#[derive(Debug, Error)]
pub enum BatchIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a trajectory dump (bad magic bytes)")]
    BadMagic,
    #[error("malformed batch: {0}")]
    Malformed(String),
}

impl TrajectoryBatch {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "path,t")?;
        for i in 1..=self.dim {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for p in 0..self.n_paths {
            for (ti, t) in self.t_grid.iter().enumerate() {
                write!(w, "{p},{t}")?;
                for v in self.state(p, ti) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Reads a CSV written by [`TrajectoryBatch::write_csv`]. Metadata not
    /// carried by the CSV (`gamma`, `dt`, `seed`) is set to zero.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, BatchIoError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| BatchIoError::Malformed("empty input".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "path" || cols[1] != "t" {
            return Err(BatchIoError::Malformed(format!("unexpected header '{header}'")));
        }
        let dim = cols.len() - 2;
        let mut rows: Vec<(usize, f64, Vec<f64>)> = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 2 {
                return Err(BatchIoError::Malformed(format!("row '{line}' has {} fields", fields.len())));
            }
            let bad = |e: String| BatchIoError::Malformed(format!("row '{line}': {e}"));
            let path = fields[0].parse::<usize>().map_err(|e| bad(e.to_string()))?;
            let t = fields[1].parse::<f64>().map_err(|e| bad(e.to_string()))?;
            let x = fields[2..].iter().map(|f| f.parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|e| bad(e.to_string()))?;
            rows.push((path, t, x));
        }
        let n_paths = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let t_grid: Vec<f64> = rows.iter().take_while(|r| r.0 == 0).map(|r| r.1).collect();
        if rows.len() != n_paths * t_grid.len() {
            return Err(BatchIoError::Malformed("rows do not form a full path × time table".into()));
        }
        let mut states = Vec::with_capacity(rows.len() * dim);
        for (i, (path, t, x)) in rows.into_iter().enumerate() {
            if path != i / t_grid.len() || t != t_grid[i % t_grid.len()] {
                return Err(BatchIoError::Malformed(format!("row {i} out of order")));
            }
            states.extend(x);
        }
        TrajectoryBatch::new(dim, n_paths, t_grid, states, 0.0, 0.0, 0).map_err(|e| BatchIoError::Malformed(e.to_string()))
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.dim as u64, self.n_paths as u64, self.t_grid.len() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.gamma.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in self.t_grid.iter().chain(&self.states) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, BatchIoError> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(BatchIoError::BadMagic);
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_paths = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_times = u64::from_le_bytes(next(&mut r)?) as usize;
        let gamma = f64::from_le_bytes(next(&mut r)?);
        let dt = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let total = dim
            .checked_mul(n_paths)
            .and_then(|v| v.checked_mul(n_times))
            .ok_or_else(|| BatchIoError::Malformed("shape overflows".into()))?;
        let mut read_floats = |count: usize| -> io::Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count.min(1 << 24));
            for _ in 0..count {
                out.push(f64::from_le_bytes(next(&mut r)?));
            }
            Ok(out)
        };
        let t_grid = read_floats(n_times)?;
        let states = read_floats(total)?;
        TrajectoryBatch::new(dim, n_paths, t_grid, states, gamma, dt, seed).map_err(|e| BatchIoError::Malformed(e.to_string()))
    }
}
