//! Labeled examples and their flat binary record stream.
//!
//! Record layout (all little-endian): `u32 S`, S complex chips of r, S
//! complex chips of y, `u16 K`, then K × (`u32 index`, complex symbol).
//! Complex values are two `f32`s, real part first.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use super::alphabet::SymbolAlphabet;
use super::codes::SpreadingMatrix;
use super::scenario::{generate_scenario, ActiveSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub received: Vec<Complex64>,
    pub clean: Vec<Complex64>,
    pub active: ActiveSet,
}

/// Generates `count` independent scenarios; example `i` is drawn from the
/// stream derived from `(seed, i)`.
pub fn generate_dataset(
    config: &ScenarioConfig,
    codes: &SpreadingMatrix,
    alphabet: &SymbolAlphabet,
    count: usize,
    seed: u64,
) -> Result<Vec<Example>> {
    generate_examples(config, codes, alphabet, count, seed, Purpose::Dataset)
}

pub(crate) fn generate_examples(
    config: &ScenarioConfig,
    codes: &SpreadingMatrix,
    alphabet: &SymbolAlphabet,
    count: usize,
    seed: u64,
    purpose: Purpose,
) -> Result<Vec<Example>> {
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, purpose, i as u64);
            let s = generate_scenario(config, codes, alphabet, &mut rng)?;
            Ok(Example {
                received: s.received,
                clean: s.clean,
                active: s.active,
            })
        })
        .collect()
}

fn put_complex<W: Write>(w: &mut W, c: Complex64) -> io::Result<()> {
    w.write_all(&(c.re as f32).to_le_bytes())?;
    w.write_all(&(c.im as f32).to_le_bytes())
}

pub fn write_record<W: Write>(w: &mut W, example: &Example) -> Result<()> {
    let s = example.received.len();
    if example.clean.len() != s {
        return Err(Error::shape("dataset record", s, example.clean.len()));
    }
    let k = u16::try_from(example.active.len()).map_err(|_| Error::TooMany {
        what: "active users in a record",
        requested: example.active.len(),
        available: u16::MAX as usize,
    })?;
    w.write_all(&(s as u32).to_le_bytes())?;
    for &c in example.received.iter().chain(&example.clean) {
        put_complex(w, c)?;
    }
    w.write_all(&k.to_le_bytes())?;
    for (index, symbol) in example.active.iter() {
        w.write_all(&(index as u32).to_le_bytes())?;
        put_complex(w, symbol)?;
    }
    Ok(())
}

pub fn write_dataset<W: Write>(w: &mut W, examples: &[Example]) -> Result<()> {
    for e in examples {
        write_record(w, e)?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Truncated("dataset record"),
        _ => Error::Io(e),
    })
}

fn get_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn get_complex<R: Read>(r: &mut R) -> Result<Complex64> {
    let re = get_f32(r)?;
    let im = get_f32(r)?;
    Ok(Complex64::new(re as f64, im as f64))
}

/// Reads one record; `Ok(None)` at a clean end of stream.
pub fn read_record<R: Read>(r: &mut R) -> Result<Option<Example>> {
    let mut head = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut head[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(Error::Truncated("dataset record")),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let s = u32::from_le_bytes(head) as usize;
    let received = (0..s).map(|_| get_complex(r)).collect::<Result<Vec<_>>>()?;
    let clean = (0..s).map(|_| get_complex(r)).collect::<Result<Vec<_>>>()?;
    let mut kb = [0u8; 2];
    read_exact_or(r, &mut kb)?;
    let k = u16::from_le_bytes(kb) as usize;
    let mut indices = Vec::with_capacity(k);
    let mut symbols = Vec::with_capacity(k);
    for _ in 0..k {
        let mut ib = [0u8; 4];
        read_exact_or(r, &mut ib)?;
        indices.push(u32::from_le_bytes(ib) as usize);
        symbols.push(get_complex(r)?);
    }
    Ok(Some(Example {
        received,
        clean,
        active: ActiveSet { indices, symbols },
    }))
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    while let Some(e) = read_record(r)? {
        out.push(e);
    }
    Ok(out)
}
