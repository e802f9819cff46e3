//! Grid transfers between cell-centered levels: four-cell averaging down,
//! bilinear interpolation up.

use crate::error::{Error, Result};
use crate::grid::{CellField, GridSpec};

/// Four-cell average onto the grid with half as many cells per axis.
pub fn restrict(fine: &CellField) -> Result<CellField> {
    let fs = *fine.spec();
    if fs.n() % 2 != 0 {
        return Err(Error::GridMismatch(format!("cannot restrict odd N = {}", fs.n())));
    }
    let cs = GridSpec::new(fs.n() / 2, fs.l())?;
    Ok(CellField::from_fn(cs, |i, j| {
        let (a, b) = (2 * i, 2 * j);
        0.25 * (fine.get(a, b) + fine.get(a + 1, b) + fine.get(a, b + 1) + fine.get(a + 1, b + 1))
    }))
}

/// Bilinear cell-centered interpolation onto the grid with twice as many cells per axis.
pub fn prolong(coarse: &CellField) -> Result<CellField> {
    let cs = *coarse.spec();
    let fs = GridSpec::new(2 * cs.n(), cs.l())?;
    Ok(CellField::from_fn(fs, |i, j| {
        let (ci, cj) = (i / 2, j / 2);
        // Fine cells on the low side of a coarse center lean on the previous coarse cell.
        let ni = if i % 2 == 0 { cs.prev(ci) } else { cs.next(ci) };
        let nj = if j % 2 == 0 { cs.prev(cj) } else { cs.next(cj) };
        0.5625 * coarse.get(ci, cj)
            + 0.1875 * (coarse.get(ni, cj) + coarse.get(ci, nj))
            + 0.0625 * coarse.get(ni, nj)
    }))
}

/// Restriction into an existing coarse buffer.
pub(crate) fn restrict_into(fine: &[f64], fs: &GridSpec, out: &mut [f64], cs: &GridSpec) {
    for i in 0..cs.n() {
        for j in 0..cs.n() {
            let (a, b) = (2 * i, 2 * j);
            out[cs.idx(i, j)] = 0.25
                * (fine[fs.idx(a, b)] + fine[fs.idx(a + 1, b)] + fine[fs.idx(a, b + 1)] + fine[fs.idx(a + 1, b + 1)]);
        }
    }
}

/// Prolongation into an existing fine buffer.
pub(crate) fn prolong_into(coarse: &[f64], cs: &GridSpec, out: &mut [f64], fs: &GridSpec) {
    for i in 0..fs.n() {
        let ci = i / 2;
        let ni = if i % 2 == 0 { cs.prev(ci) } else { cs.next(ci) };
        for j in 0..fs.n() {
            let cj = j / 2;
            let nj = if j % 2 == 0 { cs.prev(cj) } else { cs.next(cj) };
            out[fs.idx(i, j)] = 0.5625 * coarse[cs.idx(ci, cj)]
                + 0.1875 * (coarse[cs.idx(ni, cj)] + coarse[cs.idx(ci, nj)])
                + 0.0625 * coarse[cs.idx(ni, nj)];
        }
    }
}
