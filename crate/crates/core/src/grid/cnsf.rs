//! Binary field snapshots.
//!
//! Layout (little-endian): magic `CNSF`, version `u32`, dim `u8`, component
//! count `u8`, cells per axis `u32` each, spacing per axis `f64` each, then the
//! values as `f64`, component-major then row-major. The lattice of each
//! component is recovered from the payload length: all-centre, all-node,
//! MAC faces or (3D) edges.

use std::io::{Read, Write};

use crate::error::{LabError, Result};
use crate::grid::{Boundary, Component, Field, Geometry, Stagger};
use crate::scalar::{lit, to_f64, Real};

pub const CNSF_MAGIC: [u8; 4] = *b"CNSF";
pub const CNSF_VERSION: u32 = 1;

fn layouts(dim: usize, ncomp: usize) -> Vec<Vec<Stagger>> {
    let mut out = vec![vec![Stagger::center(); ncomp], vec![Stagger::node(dim); ncomp]];
    if ncomp == dim {
        out.push((0..dim).map(Stagger::face).collect());
        if dim == 3 {
            out.push((0..dim).map(|a| Stagger::edge(a, dim)).collect());
        }
    }
    out
}

pub fn write_cnsf<T: Real, W: Write>(field: &Field<T>, mut w: W) -> Result<()> {
    let dim = field.geom.dim;
    let staggers = field.staggers();
    if !layouts(dim, staggers.len()).contains(&staggers) {
        return Err(LabError::Format("field layout has no CNSF encoding".into()));
    }
    w.write_all(&CNSF_MAGIC)?;
    w.write_all(&CNSF_VERSION.to_le_bytes())?;
    w.write_all(&[dim as u8, staggers.len() as u8])?;
    for a in 0..dim {
        w.write_all(&(field.geom.cells[a] as u32).to_le_bytes())?;
    }
    for a in 0..dim {
        w.write_all(&to_f64(field.geom.spacing[a]).to_le_bytes())?;
    }
    for c in &field.comps {
        for v in &c.data {
            w.write_all(&to_f64(*v).to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize>(buf: &[u8], pos: &mut usize) -> Result<[u8; N]> {
    let end = *pos + N;
    let bytes = buf.get(*pos..end).ok_or_else(|| LabError::Format("truncated header".into()))?;
    *pos = end;
    Ok(bytes.try_into().expect("slice length"))
}

/// Reads a snapshot; the boundary tag is not stored and comes back as `Free`.
pub fn read_cnsf<T: Real, R: Read>(mut r: R) -> Result<Field<T>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut pos = 0;
    if take::<4>(&buf, &mut pos)? != CNSF_MAGIC {
        return Err(LabError::Format("wrong magic bytes".into()));
    }
    let version = u32::from_le_bytes(take::<4>(&buf, &mut pos)?);
    if version != CNSF_VERSION {
        return Err(LabError::Format(format!("unsupported version {version}")));
    }
    let [dim, ncomp] = take::<2>(&buf, &mut pos)?;
    let (dim, ncomp) = (dim as usize, ncomp as usize);
    if !(2..=3).contains(&dim) || ncomp == 0 {
        return Err(LabError::Format("bad dimension or component count".into()));
    }
    let mut cells = Vec::with_capacity(dim);
    for _ in 0..dim {
        cells.push(u32::from_le_bytes(take::<4>(&buf, &mut pos)?) as usize);
    }
    let mut spacing = Vec::with_capacity(dim);
    for _ in 0..dim {
        spacing.push(f64::from_le_bytes(take::<8>(&buf, &mut pos)?));
    }
    let extent: Vec<T> = cells.iter().zip(&spacing).map(|(&n, &h)| lit::<T>(h * n as f64)).collect();
    let mut geom = Geometry::new(&extent, &cells)?;
    for a in 0..dim {
        geom.spacing[a] = lit(spacing[a]);
    }
    let payload = (buf.len() - pos) / 8;
    if (buf.len() - pos) % 8 != 0 {
        return Err(LabError::Format("payload is not a whole number of f64 values".into()));
    }
    let staggers = layouts(dim, ncomp)
        .into_iter()
        .find(|l| l.iter().map(|s| s.shape(&geom).iter().product::<usize>()).sum::<usize>() == payload)
        .ok_or_else(|| LabError::Format(format!("payload of {payload} values matches no lattice")))?;
    let mut comps = Vec::with_capacity(ncomp);
    for st in staggers {
        let mut c = Component::zeros(&geom, st);
        for v in c.data.iter_mut() {
            *v = lit(f64::from_le_bytes(take::<8>(&buf, &mut pos)?));
        }
        comps.push(c);
    }
    Field::from_components(geom, comps, Boundary::Free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(n: usize, m: usize) -> Geometry<f64> {
        Geometry::new(&[1.0, 0.5], &[n, m]).unwrap()
    }

    #[test]
    fn header_bytes() {
        let f = Field::scalar(geom(8, 4), Stagger::center(), Boundary::Free);
        let mut out = Vec::new();
        write_cnsf(&f, &mut out).unwrap();
        assert_eq!(&out[..4], b"CNSF");
        assert_eq!(u32::from_le_bytes(out[4..8].try_into().unwrap()), 1);
        assert_eq!(out[8], 2);
        assert_eq!(out[9], 1);
        assert_eq!(u32::from_le_bytes(out[10..14].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(out[18..26].try_into().unwrap()), 0.125);
        assert_eq!(out.len(), 4 + 4 + 2 + 8 + 16 + 32 * 8);
    }

    #[test]
    fn wrong_magic_and_version_rejected() {
        let f = Field::scalar(geom(8, 8), Stagger::node(2), Boundary::Free);
        let mut out = Vec::new();
        write_cnsf(&f, &mut out).unwrap();
        let mut bad = out.clone();
        bad[0] = b'X';
        assert!(read_cnsf::<f64, _>(&bad[..]).is_err());
        let mut bad = out;
        bad[4] = 9;
        assert!(read_cnsf::<f64, _>(&bad[..]).is_err());
    }

    proptest! {
        #[test]
        fn mac_round_trip(n in 8usize..14, m in 8usize..14, seed in any::<u64>()) {
            let g = geom(n, m);
            let f = Field::mac_from_fn(g, Boundary::Free, |x| {
                let s = (seed % 1000) as f64;
                [x[0] * s + x[1], (x[0] - x[1]) * 0.5, 0.0]
            });
            let mut out = Vec::new();
            write_cnsf(&f, &mut out).unwrap();
            let back: Field<f64> = read_cnsf(&out[..]).unwrap();
            prop_assert_eq!(back.staggers(), f.staggers());
            prop_assert_eq!(back.comps, f.comps);
        }
    }
}
