//! Banded LU factorization with partial pivoting (LAPACK gbtrf layout).

/// Square band matrix with `kl` sub- and `ku` super-diagonals plus `kl`
/// rows of fill-in storage for pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.ab.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // Column-major band storage, row offset kl + ku + i - j.
        j * self.ldab + self.kl + self.ku + i - j
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    /// Accumulate into entry (i, j). Panics outside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i <= j + self.kl && j <= i + self.ku + self.kl && i < self.n && j < self.n {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Factorize in place and solve `A x = b`, overwriting `b` with `x`.
    /// Returns `None` when the matrix is numerically singular.
    pub fn solve_in_place(&mut self, b: &mut [f64]) -> Option<()> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.ku + self.kl;
        assert_eq!(b.len(), n);
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // Pivot search in column j, rows j..=j+km.
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].abs();
            for i in j + 1..=j + km {
                let v = self.ab[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            piv[j] = p;
            ju = ju.max((p + self.ku).min(n - 1));
            if p != j {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let bidx = self.idx(p, c);
                    self.ab.swap(a, bidx);
                }
            }
            let pivot = self.ab[self.idx(j, j)];
            for i in j + 1..=j + km {
                let k = self.idx(i, j);
                self.ab[k] /= pivot;
            }
            for c in j + 1..=ju {
                let u = self.ab[self.idx(j, c)];
                if u != 0.0 {
                    for i in j + 1..=j + km {
                        let l = self.ab[self.idx(i, j)];
                        let k = self.idx(i, c);
                        self.ab[k] -= l * u;
                    }
                }
            }
        }
        // Forward substitution with row interchanges.
        for j in 0..n {
            let p = piv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            for i in j + 1..=j + km {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
        // Back substitution; U has kl + ku super-diagonals.
        for j in (0..n).rev() {
            b[j] /= self.ab[self.idx(j, j)];
            let bj = b[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
        Some(())
    }
}

/// Solve a tridiagonal system (Thomas algorithm). `lower[0]` and `upper[n-1]` are unused.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i + 1] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve_on_random_band_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let n = 5 + trial % 40;
            let kl = 1 + trial % 5;
            let ku = 1 + (trial / 3) % 6;
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i <= j + kl && j <= i + ku {
                        // Small diagonal forces pivoting.
                        let v = if i == j { rng.random_range(-0.1..0.1) } else { rng.random_range(-1.0..1.0) };
                        band.add(i, j, v);
                        dense[(i, j)] = v;
                    }
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let expected = dense.clone().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
            let mut x = rhs.clone();
            band.solve_in_place(&mut x).unwrap();
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() < 1e-8 * (1.0 + expected[i].abs()), "trial {trial}");
            }
        }
    }

    #[test]
    fn singular_matrix_reports_none() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 0.0);
        band.add(2, 2, 1.0);
        let mut b = vec![1.0; 3];
        assert!(band.solve_in_place(&mut b).is_none());
    }

    #[test]
    fn tridiagonal_solution() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, 2.0, 3.0, 4.0];
        let mut rhs = vec![0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x[i];
            if i > 0 {
                rhs[i] += lower[i] * x[i - 1];
            }
            if i < 3 {
                rhs[i] += upper[i] * x[i + 1];
            }
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-12);
        }
    }
}
