//! Flat little-endian binary layout for datasets and estimators.
//!
//! Header: 8-byte magic, then `d`, `n`, `seed`, method tag as `u64`.
//! Datasets (tag 0) follow with `tau`, the four spectra, `theta0`, labels and
//! row-major covariates; estimators follow with iteration count, residual and
//! weights. Every real is an `f64`.

use std::io::{Read, Write};

use super::dataset::{Dataset, Spectra};
use super::train::{Estimator, Method};
use crate::error::{Error, Result};

const DATA_MAGIC: &[u8; 8] = b"ADVSDATA";
const EST_MAGIC: &[u8; 8] = b"ADVSEST1";

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut b = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(Error::Io(format!("bad magic {:?}", String::from_utf8_lossy(&b))));
    }
    Ok(())
}

pub fn write_dataset(w: &mut impl Write, ds: &Dataset) -> Result<()> {
    w.write_all(DATA_MAGIC)?;
    for v in [ds.d as u64, ds.n as u64, ds.seed, 0] {
        put_u64(w, v)?;
    }
    put_f64s(w, &[ds.tau])?;
    for s in [&ds.spectra.psi, &ds.spectra.delta, &ds.spectra.upsilon, &ds.spectra.t] {
        put_f64s(w, s)?;
    }
    put_f64s(w, &ds.theta0)?;
    put_f64s(w, &ds.y)?;
    put_f64s(w, &ds.x)
}

pub fn read_dataset(r: &mut impl Read) -> Result<Dataset> {
    expect_magic(r, DATA_MAGIC)?;
    let d = get_u64(r)? as usize;
    let n = get_u64(r)? as usize;
    let seed = get_u64(r)?;
    if get_u64(r)? != 0 {
        return Err(Error::Io("dataset header carries a method tag".into()));
    }
    let tau = get_f64s(r, 1)?[0];
    let spectra = Spectra {
        psi: get_f64s(r, d)?,
        delta: get_f64s(r, d)?,
        upsilon: get_f64s(r, d)?,
        t: get_f64s(r, d)?,
    };
    let theta0 = get_f64s(r, d)?;
    let y = get_f64s(r, n)?;
    let x = get_f64s(r, n * d)?;
    Ok(Dataset { d, n, x, y, theta0, spectra, tau, seed })
}

/// `n` and `seed` record the training set the estimator came from.
pub fn write_estimator(w: &mut impl Write, est: &Estimator, n: usize, seed: u64) -> Result<()> {
    w.write_all(EST_MAGIC)?;
    for v in [est.weights.len() as u64, n as u64, seed, est.method.tag(), est.iterations as u64] {
        put_u64(w, v)?;
    }
    put_f64s(w, &[est.residual])?;
    put_f64s(w, &est.weights)
}

/// Returns the estimator with the recorded `n` and `seed`.
pub fn read_estimator(r: &mut impl Read) -> Result<(Estimator, usize, u64)> {
    expect_magic(r, EST_MAGIC)?;
    let d = get_u64(r)? as usize;
    let n = get_u64(r)? as usize;
    let seed = get_u64(r)?;
    let tag = get_u64(r)?;
    let method = Method::from_tag(tag).ok_or_else(|| Error::Io(format!("unknown method tag {tag}")))?;
    let iterations = get_u64(r)? as usize;
    let residual = get_f64s(r, 1)?[0];
    let weights = get_f64s(r, d)?;
    Ok((Estimator { weights, method, iterations, residual }, n, seed))
}
