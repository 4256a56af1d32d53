//! Ulam discretization of the transfer operator.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::PiecewiseMap;

/// `N` equal cells of `[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UlamGrid {
    pub cell_count: usize,
}

impl UlamGrid {
    pub fn new(cell_count: usize) -> Result<Self> {
        if cell_count < 2 {
            return Err(Error::InvalidParameters(format!("Ulam grid needs N >= 2, got {cell_count}")));
        }
        Ok(UlamGrid { cell_count })
    }

    pub fn width(&self) -> f64 {
        1.0 / self.cell_count as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        k as f64 / self.cell_count as f64
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.edge(i), self.edge(i + 1))
    }

    /// Cell containing `x`, clamped to the grid.
    pub fn locate(&self, x: f64) -> usize {
        ((x * self.cell_count as f64).floor().max(0.0) as usize).min(self.cell_count - 1)
    }
}

/// Row-stochastic sparse matrix, stored by rows and by columns.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub grid: UlamGrid,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    col_ptr: Vec<usize>,
    rows_t: Vec<u32>,
    vals_t: Vec<f64>,
}

impl TransferMatrix {
    fn from_rows(grid: UlamGrid, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n = grid.cell_count;
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut count = vec![0usize; n];
        for r in &rows {
            for &(j, v) in r {
                cols.push(j);
                vals.push(v);
                count[j as usize] += 1;
            }
            row_ptr.push(cols.len());
        }
        let mut col_ptr = vec![0; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + count[j];
        }
        let mut fill = col_ptr.clone();
        let mut rows_t = vec![0u32; cols.len()];
        let mut vals_t = vec![0.0; cols.len()];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = cols[k] as usize;
                rows_t[fill[j]] = i as u32;
                vals_t[fill[j]] = vals[k];
                fill[j] += 1;
            }
        }
        TransferMatrix { grid, row_ptr, cols, vals, col_ptr, rows_t, vals_t }
    }

    pub fn size(&self) -> usize {
        self.grid.cell_count
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries `(j, P[i][j])` of row `i`, increasing in `j`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&j, &v)| (j as usize, v))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum()
    }

    /// `hP`: the push-forward of a cell density.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        (0..self.size())
            .into_par_iter()
            .map(|j| {
                let r = self.col_ptr[j]..self.col_ptr[j + 1];
                self.rows_t[r.clone()].iter().zip(&self.vals_t[r]).map(|(&i, &v)| h[i as usize] * v).sum()
            })
            .collect()
    }

    /// Coordinate triplets `row col value`, one per line.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        for i in 0..self.size() {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
        Ok(())
    }
}

/// Preimage lengths of the cells met by the image of `[lo, hi]` under
/// branch `b`.
fn row_part(map: &PiecewiseMap, b: usize, grid: UlamGrid, lo: f64, hi: f64, out: &mut Vec<(u32, f64)>) {
    let br = &map.branches[b];
    let (fa, fb) = (br.eval(lo), br.eval(hi));
    let (u, v, xu, xv) = if fa <= fb { (fa, fb, lo, hi) } else { (fb, fa, hi, lo) };
    let first = grid.locate(u);
    let last = grid.locate(v).max(first);
    let mut x_prev = xu;
    for j in first..=last {
        let top = grid.edge(j + 1);
        let x_next = if j == last || top >= v { xv } else { br.inverse(top) };
        let len = (x_next - x_prev).abs();
        if len > 0.0 {
            out.push((j as u32, len));
        }
        x_prev = x_next;
        if j == last || top >= v {
            break;
        }
    }
}

/// `P[i][j] = |cell_i ∩ f⁻¹(cell_j)| / |cell_i|`, rows re-normalized.
pub fn build_ulam_matrix(map: &PiecewiseMap, n: usize) -> Result<TransferMatrix> {
    let grid = UlamGrid::new(n)?;
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (x0, x1) = grid.cell(i);
            let mut parts = Vec::new();
            for (b, br) in map.branches.iter().enumerate() {
                let (lo, hi) = (x0.max(br.lo), x1.min(br.hi));
                if hi > lo {
                    row_part(map, b, grid, lo, hi, &mut parts);
                }
            }
            parts.sort_by_key(|p| p.0);
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(parts.len());
            for (j, l) in parts {
                match row.last_mut() {
                    Some(last) if last.0 == j => last.1 += l,
                    _ => row.push((j, l)),
                }
            }
            let total: f64 = row.iter().map(|e| e.1).sum();
            for e in &mut row {
                e.1 /= total;
            }
            row
        })
        .collect();
    Ok(TransferMatrix::from_rows(grid, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{make_doubling_map, make_lorenz_map};

    #[test]
    fn doubling_two_cells() {
        let p = build_ulam_matrix(&make_doubling_map(), 2).unwrap();
        for i in 0..2 {
            let r: Vec<_> = p.row(i).collect();
            assert_eq!(r, vec![(0, 0.5), (1, 0.5)]);
        }
    }

    #[test]
    fn doubling_rows_are_exact() {
        let p = build_ulam_matrix(&make_doubling_map(), 96).unwrap();
        for i in 0..96 {
            assert_eq!(p.row_sum(i), 1.0);
        }
    }

    #[test]
    fn lorenz_rows_sum_to_one() {
        let p = build_ulam_matrix(&make_lorenz_map(0.6).unwrap(), 1024).unwrap();
        for i in 0..1024 {
            assert!((p.row_sum(i) - 1.0).abs() < 1e-12);
        }
        // The cells next to the singularity spread over many cells.
        assert!(p.row(511).count() > 5);
    }

    #[test]
    fn apply_matches_dense_product() {
        let p = build_ulam_matrix(&make_lorenz_map(0.6).unwrap(), 16).unwrap();
        let h: Vec<f64> = (0..16).map(|i| 1.0 + i as f64 * 0.1).collect();
        let mut want = vec![0.0; 16];
        for i in 0..16 {
            for (j, v) in p.row(i) {
                want[j] += h[i] * v;
            }
        }
        for (a, b) in p.apply(&h).iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn small_grid_is_rejected() {
        assert!(build_ulam_matrix(&make_doubling_map(), 1).is_err());
    }
}
