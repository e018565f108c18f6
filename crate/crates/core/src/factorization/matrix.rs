use rand::Rng;

use crate::rng::SeededRng;

/// Dense row-major embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    /// Entries uniform in `[-scale, scale]`; rows whose norm falls below
    /// `min_norm` are redrawn.
    pub fn random(
        rows: usize,
        cols: usize,
        scale: f64,
        min_norm: f64,
        rng: &mut SeededRng,
    ) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            redraw_row(m.row_mut(r), scale, min_norm, rng);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn redraw_row(row: &mut [f64], scale: f64, min_norm: f64, rng: &mut SeededRng) {
    loop {
        for x in row.iter_mut() {
            *x = rng.random_range(-scale..=scale);
        }
        if norm(row) >= min_norm {
            return;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
