use crate::scalar::{dot, Scalar};

/// Row-major samples with `±1` labels.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a, T> {
    /// `N × m`.
    pub x: &'a [T],
    pub m: usize,
    /// `+1` or `-1` per row.
    pub y: &'a [T],
}

impl<'a, T: Scalar> Problem<'a, T> {
    pub fn new(x: &'a [T], m: usize, y: &'a [T]) -> Self {
        assert_eq!(x.len(), m * y.len(), "x is not N x m");
        Self { x, m, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [T] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn margin(&self, w: &[T], b: T, i: usize) -> T {
        dot(w, self.row(i)) + b
    }

    /// Mean hinge loss `max(0, 1 - y (w·x + b))` over the rows in `idx`.
    pub fn hinge(&self, w: &[T], b: T, idx: &[usize]) -> T {
        if idx.is_empty() {
            return T::zero();
        }
        let total: T = idx
            .iter()
            .map(|&i| (T::one() - self.y[i] * self.margin(w, b, i)).max(T::zero()))
            .sum();
        total / T::lit(idx.len() as f64)
    }

    /// `λ/2 |w|² + mean hinge` over the rows in `idx`.
    pub fn objective(&self, w: &[T], b: T, lambda: T, idx: &[usize]) -> T {
        T::lit(0.5) * lambda * dot(w, w) + self.hinge(w, b, idx)
    }

    /// A subgradient of [`objective`](Self::objective) at `(w, b)`; rows with
    /// margin exactly 1 contribute nothing.
    pub fn subgradient(&self, w: &[T], b: T, lambda: T, idx: &[usize]) -> (Vec<T>, T) {
        let mut gw: Vec<T> = w.iter().map(|&wi| lambda * wi).collect();
        let mut gb = T::zero();
        if idx.is_empty() {
            return (gw, gb);
        }
        let scale = T::one() / T::lit(idx.len() as f64);
        for &i in idx {
            let yi = self.y[i];
            if yi * self.margin(w, b, i) < T::one() {
                let c = yi * scale;
                for (g, &xi) in gw.iter_mut().zip(self.row(i)) {
                    *g = *g - c * xi;
                }
                gb = gb - c;
            }
        }
        (gw, gb)
    }
}
