//! `WFN1` binary snapshots.
//!
//! Layout (all little-endian): magic `WFN1`, `u32` dimension count, then per
//! axis `u64` point count and `f64` box half-length, `f64` time, `u8`
//! representation flag (0 = position, 1 = frequency), then the row-major
//! samples as `(re, im)` pairs of `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use super::grid::Grid;
use super::wave::{Representation, WaveFunction};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WFN1";

pub fn write_checkpoint<W: Write>(state: &WaveFunction, mut out: W) -> Result<()> {
    let grid = state.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(grid.dims() as u32).to_le_bytes())?;
    for a in grid.axes() {
        out.write_all(&(a.points as u64).to_le_bytes())?;
        out.write_all(&a.half_length.to_le_bytes())?;
    }
    out.write_all(&state.time().to_le_bytes())?;
    let flag: u8 = match state.representation() {
        Representation::Position => 0,
        Representation::Frequency => 1,
    };
    out.write_all(&[flag])?;
    for z in state.values() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated WFN1 stream: {e}")))?;
    Ok(buf)
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<WaveFunction> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected WFN1")));
    }
    let dims = u32::from_le_bytes(read_array(&mut input)?) as usize;
    if !(1..=3).contains(&dims) {
        return Err(Error::Format(format!("unsupported dimension count {dims}")));
    }
    let mut points = Vec::with_capacity(dims);
    let mut half_lengths = Vec::with_capacity(dims);
    for _ in 0..dims {
        points.push(u64::from_le_bytes(read_array(&mut input)?) as usize);
        half_lengths.push(f64::from_le_bytes(read_array(&mut input)?));
    }
    let time = f64::from_le_bytes(read_array(&mut input)?);
    let repr = match read_array::<1, _>(&mut input)?[0] {
        0 => Representation::Position,
        1 => Representation::Frequency,
        f => return Err(Error::Format(format!("unknown representation flag {f}"))),
    };
    let grid = Grid::new(&points, &half_lengths)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = f64::from_le_bytes(read_array(&mut input)?);
        let im = f64::from_le_bytes(read_array(&mut input)?);
        values.push(Complex64::new(re, im));
    }
    WaveFunction::new(grid, values, time, repr)
}

pub fn save_checkpoint(state: &WaveFunction, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(state, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<WaveFunction> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let grid = Grid::new(&[16, 32], &[3.0, 5.5]).unwrap();
        let state = WaveFunction::from_position_fn(&grid, 2.25, |x| {
            Complex64::new((x[0] * 0.3).sin(), x[1].cos() / 3.0)
        });
        let mut buf = Vec::new();
        write_checkpoint(&state, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"WFN1");
        assert_eq!(buf.len(), 4 + 4 + 2 * 16 + 8 + 1 + 16 * 16 * 32);
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.time(), 2.25);
        assert_eq!(back.grid(), state.grid());
        assert_eq!(back.representation(), Representation::Position);
        for (a, b) in back.values().iter().zip(state.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(read_checkpoint(&b"WFN2...."[..]), Err(Error::Format(_))));
        let grid = Grid::new(&[16], &[1.0]).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&WaveFunction::zeros(&grid, 0.0, Representation::Frequency), &mut buf)
            .unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_checkpoint(&buf[..]), Err(Error::Format(_))));
    }
}
