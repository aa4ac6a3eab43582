use serde::{Deserialize, Serialize};

use crate::densela::{all_finite, Mat};

/// Affine map `x -> L x + t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineMap {
    pub l: Mat,
    pub t: Vec<f64>,
}

impl AffineMap {
    pub fn new(l: Mat, t: Vec<f64>) -> Self {
        assert_eq!(l.rows(), t.len(), "affine map shape mismatch");
        debug_assert!(l.is_finite() && all_finite(&t));
        AffineMap { l, t }
    }

    pub fn identity(n: usize) -> Self {
        AffineMap { l: Mat::identity(n), t: vec![0.0; n] }
    }

    pub fn n_in(&self) -> usize {
        self.l.cols()
    }

    pub fn n_out(&self) -> usize {
        self.l.rows()
    }

    pub fn is_identity(&self) -> bool {
        if self.n_in() != self.n_out() {
            return false;
        }
        let n = self.n_in();
        for i in 0..n {
            if self.t[i] != 0.0 {
                return false;
            }
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                if self.l.get(i, j) != want {
                    return false;
                }
            }
        }
        true
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.l.matvec(x);
        for (o, t) in out.iter_mut().zip(&self.t) {
            *o += t;
        }
        out
    }

    /// `self` after `inner`: (self . inner)(x) = self(inner(x)).
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        assert_eq!(self.n_in(), inner.n_out(), "composition shape mismatch");
        let l = self.l.matmul(&inner.l);
        let t = {
            let mut t = self.l.matvec(&inner.t);
            for (a, b) in t.iter_mut().zip(&self.t) {
                *a += b;
            }
            t
        };
        AffineMap { l, t }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_applies_inner_first() {
        // f(x) = 2x + 1, g(x) = x - 3  =>  (f . g)(x) = 2x - 5
        let f = AffineMap::new(Mat::from_rows(&[vec![2.0]]), vec![1.0]);
        let g = AffineMap::new(Mat::from_rows(&[vec![1.0]]), vec![-3.0]);
        let fg = f.compose(&g);
        assert_eq!(fg.apply(&[4.0]), vec![3.0]);
    }
}
