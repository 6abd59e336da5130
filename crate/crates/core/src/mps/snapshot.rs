//! Compact binary form of an MPS.
//!
//! Layout (little-endian): version `u8`, sites `u32`, physical dimension
//! `u32`, the `sites - 1` bond dimensions as `u32`, then every tensor as
//! `(re, im)` `f64` pairs in `[left][physical][right]` row-major order.
//! The orthogonality center is not stored; loading re-canonicalizes.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{MpsState, SiteTensor, TruncationPolicy};
use crate::error::{Error, Result};
use crate::linalg::C64;

pub const SNAPSHOT_VERSION: u8 = 1;

pub fn write_snapshot<W: Write>(state: &MpsState, mut out: W) -> Result<()> {
    let tensors = state.tensors();
    out.write_u8(SNAPSHOT_VERSION)?;
    out.write_u32::<LittleEndian>(tensors.len() as u32)?;
    out.write_u32::<LittleEndian>(2)?;
    for t in &tensors[..tensors.len() - 1] {
        out.write_u32::<LittleEndian>(t.right as u32)?;
    }
    for t in tensors {
        for z in &t.data {
            out.write_f64::<LittleEndian>(z.re)?;
            out.write_f64::<LittleEndian>(z.im)?;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R, policy: TruncationPolicy) -> Result<MpsState> {
    let version = input.read_u8()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported MPS snapshot version {version}")));
    }
    let sites = input.read_u32::<LittleEndian>()? as usize;
    let phys = input.read_u32::<LittleEndian>()?;
    if sites == 0 || phys != 2 {
        return Err(Error::Format(format!("bad MPS header: sites={sites}, physical dimension={phys}")));
    }
    let mut bonds = vec![1usize];
    for _ in 0..sites - 1 {
        let d = input.read_u32::<LittleEndian>()? as usize;
        if d == 0 {
            return Err(Error::Format("zero bond dimension".into()));
        }
        bonds.push(d);
    }
    bonds.push(1);
    let mut tensors = Vec::with_capacity(sites);
    for site in 0..sites {
        let (left, right) = (bonds[site], bonds[site + 1]);
        let mut data = Vec::with_capacity(left * 2 * right);
        for _ in 0..left * 2 * right {
            let re = input.read_f64::<LittleEndian>()?;
            let im = input.read_f64::<LittleEndian>()?;
            data.push(C64::new(re, im));
        }
        tensors.push(SiteTensor { left, right, data });
    }
    MpsState::from_tensors(tensors, policy)
}
