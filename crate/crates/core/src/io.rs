//! Little-endian binary dumps of fields ("MPLF") and mask stacks ("MPLM").
//!
//! ```text
//! MPLF: magic, u32 nx, u32 ny, f64 pitch, f64 origin_x, f64 origin_y,
//!       nx·ny × (f64 re, f64 im)
//! MPLM: magic, u32 planes, u32 nx, u32 ny, f64 pitch, f64 plane_spacing,
//!       planes × nx·ny × f64 phase
//! ```
//!
//! Samples are row-major with x fastest. Stacks are stored on a centered grid.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, SamplingGrid};
use crate::propagation::{PhaseMask, PhaseMaskStack};

const FIELD_MAGIC: &[u8; 4] = b"MPLF";
const STACK_MAGIC: &[u8; 4] = b"MPLM";

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("unexpected end of data".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} trailing bytes", self.bytes.len())))
        }
    }
}

fn dims(nx: u32, ny: u32) -> Result<usize> {
    (nx as usize)
        .checked_mul(ny as usize)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format(format!("invalid dimensions {nx}x{ny}")))
}

pub fn encode_field(field: &ComplexField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(36 + 16 * g.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    for v in [g.pitch(), g.origin().0, g.origin().1] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ComplexField> {
    let mut r = Reader { bytes };
    r.magic(FIELD_MAGIC)?;
    let (nx, ny) = (r.u32()?, r.u32()?);
    let n = dims(nx, ny)?;
    let (pitch, ox, oy) = (r.f64()?, r.f64()?, r.f64()?);
    let grid = SamplingGrid::new(nx as usize, ny as usize, pitch, (ox, oy))?;
    if r.bytes.len() != 16 * n {
        return Err(Error::Format(format!("expected {} sample bytes, found {}", 16 * n, r.bytes.len())));
    }
    let values = (0..n).map(|_| Ok(Complex64::new(r.f64()?, r.f64()?))).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    ComplexField::new(grid, values)
}

pub fn encode_stack(stack: &PhaseMaskStack) -> Vec<u8> {
    let g = stack.grid();
    let mut out = Vec::with_capacity(32 + 8 * g.len() * stack.planes());
    out.extend_from_slice(STACK_MAGIC);
    for v in [stack.planes(), g.nx(), g.ny()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&g.pitch().to_le_bytes());
    out.extend_from_slice(&stack.plane_spacing().to_le_bytes());
    for mask in stack.masks() {
        for v in mask.phase() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_stack(bytes: &[u8]) -> Result<PhaseMaskStack> {
    let mut r = Reader { bytes };
    r.magic(STACK_MAGIC)?;
    let planes = r.u32()? as usize;
    let (nx, ny) = (r.u32()?, r.u32()?);
    let n = dims(nx, ny)?;
    let (pitch, spacing) = (r.f64()?, r.f64()?);
    if planes == 0 {
        return Err(Error::Format("stack without planes".into()));
    }
    if r.bytes.len() != 8 * n * planes {
        return Err(Error::Format(format!(
            "expected {} phase bytes, found {}",
            8 * n * planes,
            r.bytes.len()
        )));
    }
    let grid = SamplingGrid::centered(nx as usize, ny as usize, pitch)?;
    let masks = (0..planes)
        .map(|_| {
            let phase = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            PhaseMask::new(grid, phase)
        })
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    PhaseMaskStack::new(masks, spacing)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

pub fn write_field(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    write_bytes(path.as_ref(), &encode_field(field))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ComplexField> {
    decode_field(&read_bytes(path.as_ref())?)
}

pub fn write_stack(path: impl AsRef<Path>, stack: &PhaseMaskStack) -> Result<()> {
    write_bytes(path.as_ref(), &encode_stack(stack))
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<PhaseMaskStack> {
    decode_stack(&read_bytes(path.as_ref())?)
}

/// Writes `pattern` as a one-plane stack plus a `<path>.txt` sidecar of
/// `key = value` lines describing how it was made.
pub fn write_pattern(
    path: impl AsRef<Path>,
    pattern: &PhaseMask,
    plane_spacing: f64,
    notes: &[(&str, String)],
) -> Result<()> {
    let path = path.as_ref();
    let stack = PhaseMaskStack::new(vec![pattern.clone()], plane_spacing)?;
    write_stack(path, &stack)?;
    let mut text = String::new();
    for (k, v) in notes {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".txt");
    fs::write(sidecar, text)?;
    Ok(())
}
