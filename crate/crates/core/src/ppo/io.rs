//! Binary parameter file.
//!
//! ```text
//! offset  size  field
//! 0       7     magic "FRSPPO1"
//! 7       1     reserved, 0
//! 8       8     input width        (u64 LE)
//! 16      8     hidden1 width      (u64 LE)
//! 24      8     hidden2 width      (u64 LE)
//! 32      8     N, sensor head     (u64 LE)
//! 40      8     velocity bins      (u64 LE)
//! 48      8     parameter count    (u64 LE)
//! 56      8*P   parameters, f64 LE, flat layout of `MlpParams`
//! ```

use std::io::{Read, Write};

use thiserror::Error;

use super::net::{MlpParams, MlpShape};

pub const MAGIC: &[u8; 7] = b"FRSPPO1";

#[derive(Debug, Error)]
pub enum ParamFileError {
    #[error("not a parameter file (bad magic)")]
    BadMagic,
    #[error("header declares {declared} parameters but shape needs {expected}")]
    CountMismatch { declared: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_params<W: Write>(params: &MlpParams<f64>, mut out: W) -> Result<(), ParamFileError> {
    let s = params.shape;
    out.write_all(MAGIC)?;
    out.write_all(&[0])?;
    for n in [s.input, s.hidden1, s.hidden2, s.n_sensors, s.n_velocity, params.data.len()] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    for x in &params.data {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_params<R: Read>(mut input: R) -> Result<MlpParams<f64>, ParamFileError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic[..7] != MAGIC {
        return Err(ParamFileError::BadMagic);
    }
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<usize, ParamFileError> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word) as usize)
    };
    let shape = MlpShape {
        input: next(&mut input)?,
        hidden1: next(&mut input)?,
        hidden2: next(&mut input)?,
        n_sensors: next(&mut input)?,
        n_velocity: next(&mut input)?,
    };
    let declared = next(&mut input)?;
    let expected = shape.param_count();
    if declared != expected {
        return Err(ParamFileError::CountMismatch { declared, expected });
    }
    let mut data = Vec::with_capacity(expected);
    for _ in 0..expected {
        input.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Ok(MlpParams { shape, data })
}
