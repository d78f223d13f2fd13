/// Symmetric positive definite band matrix, lower band stored row by row.
#[derive(Clone, Debug)]
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

#[derive(Debug, PartialEq)]
pub(crate) struct NotPositiveDefinite(pub usize);

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to entry (i, j) (and implicitly (j, i)).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    /// In-place Cholesky factorization `A = L L^T`.
    pub fn factor(mut self) -> Result<BandedCholesky, NotPositiveDefinite> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for k in lo..=i {
                let mut sum = self.data[self.idx(i, k)];
                for j in lo.max(k.saturating_sub(bw))..k {
                    sum -= self.data[self.idx(i, j)] * self.data[self.idx(k, j)];
                }
                if k == i {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(NotPositiveDefinite(i));
                    }
                    let ii = self.idx(i, i);
                    self.data[ii] = sum.sqrt();
                } else {
                    let ik = self.idx(i, k);
                    self.data[ik] = sum / self.data[self.idx(k, k)];
                }
            }
        }
        Ok(BandedCholesky(self))
    }
}

pub(crate) struct BandedCholesky(BandedSpd);

impl BandedCholesky {
    pub fn solve(&self, b: &mut [f64]) {
        let l = &self.0;
        let bw = l.bw;
        for i in 0..l.n {
            let mut s = b[i];
            for j in i.saturating_sub(bw)..i {
                s -= l.data[l.idx(i, j)] * b[j];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..l.n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + bw + 1).min(l.n) {
                s -= l.data[l.idx(j, i)] * b[j];
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_poisson() {
        let n = 50;
        let mut a = BandedSpd::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * x_true[i] - if i > 0 { x_true[i - 1] } else { 0.0 } - if i + 1 < n { x_true[i + 1] } else { 0.0 }
            })
            .collect();
        a.factor().unwrap().solve(&mut b);
        for (x, y) in b.iter().zip(&x_true) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn solves_wide_band_against_dense_product() {
        let n = 30;
        let bw = 5;
        let mut a = BandedSpd::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 20.0 + i as f64);
            for k in 1..=bw.min(i) {
                a.add(i, i - k, 1.0 / (1.0 + k as f64 + i as f64 * 0.1));
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a.get(i, j) * x_true[j];
            }
        }
        a.factor().unwrap().solve(&mut b);
        for (x, y) in b.iter().zip(&x_true) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_indefinite() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert_eq!(a.factor().err(), Some(NotPositiveDefinite(1)));
    }
}
