//! Gaussian elimination with partial pivoting for matrices whose rows have
//! nondecreasing first nonzero column (variable-band profile).

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Row {
    start: usize,
    values: Vec<Complex64>,
}

impl Row {
    fn end(&self) -> usize {
        self.start + self.values.len()
    }

    fn get(&self, col: usize) -> Complex64 {
        if col < self.start || col >= self.end() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[col - self.start]
        }
    }
}

/// Square system assembled row by row. Each row is a contiguous window of
/// columns; windows must start at nondecreasing columns.
#[derive(Clone, Debug)]
pub struct ProfileSystem {
    size: usize,
    rows: Vec<Row>,
    rhs: Vec<Complex64>,
}

impl ProfileSystem {
    pub fn new(size: usize) -> Self {
        ProfileSystem {
            size,
            rows: Vec::with_capacity(size),
            rhs: Vec::with_capacity(size),
        }
    }

    pub fn push_row(&mut self, start: usize, values: Vec<Complex64>, rhs: Complex64) {
        debug_assert!(self.rows.last().is_none_or(|r| r.start <= start));
        debug_assert!(start + values.len() <= self.size);
        self.rows.push(Row { start, values });
        self.rhs.push(rhs);
    }

    pub fn solve(mut self) -> Result<Vec<Complex64>> {
        let n = self.size;
        if self.rows.len() != n {
            return Err(Error::Singular(format!("{} rows for {} unknowns", self.rows.len(), n)));
        }
        let scale = self
            .rows
            .iter()
            .flat_map(|r| r.values.iter())
            .fold(0.0f64, |a, v| a.max(v.norm()))
            .max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut last = k;
            while last + 1 < n && self.rows[last + 1].start <= k {
                last += 1;
            }
            let mut piv = k;
            let mut best = self.rows[k].get(k).norm();
            for r in k + 1..=last {
                let v = self.rows[r].get(k).norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= 1e-300 * scale {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            self.rows.swap(k, piv);
            self.rhs.swap(k, piv);
            let pivot_row = self.rows[k].clone();
            let pivot_rhs = self.rhs[k];
            let pv = pivot_row.get(k);
            for r in k + 1..=last {
                let factor = self.rows[r].get(k) / pv;
                let row = &mut self.rows[r];
                let new_end = row.end().max(pivot_row.end());
                let mut values = Vec::with_capacity(new_end - (k + 1));
                for c in k + 1..new_end {
                    values.push(row.get(c) - factor * pivot_row.get(c));
                }
                row.start = k + 1;
                row.values = values;
                self.rhs[r] -= factor * pivot_rhs;
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for k in (0..n).rev() {
            let row = &self.rows[k];
            let mut acc = self.rhs[k];
            for c in k + 1..row.end().min(n) {
                acc -= row.get(c) * x[c];
            }
            x[k] = acc / row.get(k);
        }
        Ok(x)
    }
}
