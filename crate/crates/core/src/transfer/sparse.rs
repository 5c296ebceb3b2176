use alloc::vec::Vec;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Build from triplets; duplicates are summed in a fixed order.
    pub fn from_triplets(n: usize, mut t: Vec<(u32, u32, f64)>) -> Self {
        t.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = alloc::vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for k in 0..n {
            row_ptr[k + 1] += row_ptr[k];
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().zip(&self.vals[span]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(k, _)| k == c).map_or(0.0, |(_, v)| v)
    }

    /// (row, col, value) in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t = self.triplets().map(|(r, c, v)| (c as u32, r as u32, v)).collect();
        SparseMatrix::from_triplets(self.n, t)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = s;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.n];
        for (_, c, v) in self.triplets() {
            s[c] += v;
        }
        s
    }

    /// Multiply row r by a[r] and column c by b[c].
    pub fn scale(&mut self, a: &[f64], b: &[f64]) {
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                self.vals[k] *= a[r] * b[self.cols[k] as usize];
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = alloc::vec![alloc::vec![0.0; self.n]; self.n];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }
}
