use num_traits::Float;

use super::eigen::symmetric_eigen;
use super::SigError;
use crate::scalar::{dot, Scalar};

/// Principal directions of a corpus of spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis<T> {
    /// Corpus mean, subtracted before projecting.
    pub mean: Vec<T>,
    /// `M` orthonormal rows of length `mean.len()`, by decreasing variance.
    pub components: Vec<Vec<T>>,
    /// Variance along each component.
    pub explained_variance: Vec<T>,
    /// Trace of the sample covariance.
    pub total_variance: T,
}

impl<T: Scalar> PcaBasis<T> {
    /// Number of retained components.
    pub fn m(&self) -> usize {
        self.components.len()
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Coordinates of `x` along the components.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>, SigError> {
        if x.len() != self.dim() {
            return Err(SigError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let centred: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        Ok(self.components.iter().map(|c| dot(c, &centred)).collect())
    }

    /// Maps coordinates back into the input space.
    pub fn reconstruct(&self, coords: &[T]) -> Vec<T> {
        let mut out = self.mean.clone();
        for (c, &a) in self.components.iter().zip(coords) {
            for (o, &ci) in out.iter_mut().zip(c) {
                *o = *o + a * ci;
            }
        }
        out
    }

    /// The same basis keeping only the first `m` components.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.m());
        Self {
            mean: self.mean.clone(),
            components: self.components[..m].to_vec(),
            explained_variance: self.explained_variance[..m].to_vec(),
            total_variance: self.total_variance,
        }
    }
}

/// Column means and unbiased sample covariance (row-major `F × F`).
pub fn covariance<T: Scalar>(rows: &[Vec<T>]) -> (Vec<T>, Vec<T>) {
    assert!(rows.len() >= 2, "covariance needs at least two rows");
    let f = rows[0].len();
    let n = T::lit(rows.len() as f64);
    let mut mean = vec![T::zero(); f];
    for r in rows {
        assert_eq!(r.len(), f, "ragged rows");
        for (m, &x) in mean.iter_mut().zip(r) {
            *m = *m + x;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut cov = vec![T::zero(); f * f];
    let mut centred = vec![T::zero(); f];
    for r in rows {
        for ((c, &x), &m) in centred.iter_mut().zip(r).zip(&mean) {
            *c = x - m;
        }
        for i in 0..f {
            let ci = centred[i];
            let row = &mut cov[i * f + i..(i + 1) * f];
            for (acc, &cj) in row.iter_mut().zip(&centred[i..]) {
                *acc = *acc + ci * cj;
            }
        }
    }
    let denom = n - T::one();
    for i in 0..f {
        for j in i..f {
            let v = cov[i * f + j] / denom;
            cov[i * f + j] = v;
            cov[j * f + i] = v;
        }
    }
    (mean, cov)
}

/// Fits the top-`m` principal directions of `rows`.
///
/// Each component is signed so that its largest-magnitude entry is positive.
pub fn fit_pca<T: Scalar>(rows: &[Vec<T>], m: usize) -> Result<PcaBasis<T>, SigError> {
    if m == 0 || rows.len() <= m {
        return Err(SigError::InvalidParam(format!(
            "PCA needs more rows ({}) than components ({m}) and at least one component",
            rows.len()
        )));
    }
    let f = rows[0].len();
    if m > f {
        return Err(SigError::RankDeficient {
            requested: m,
            available: f,
        });
    }
    let (mean, cov) = covariance(rows);
    let total_variance = (0..f).map(|i| cov[i * f + i]).sum::<T>();
    let eig = symmetric_eigen(&cov, f);

    let top = eig.values[0];
    // the usual matrix-rank cut-off: largest eigenvalue · dimension · eps
    let tol = top.max(T::zero()) * T::lit(f as f64) * T::epsilon();
    let available = eig.values.iter().filter(|&&v| v > tol).count();
    if available < m {
        return Err(SigError::RankDeficient {
            requested: m,
            available,
        });
    }

    let mut components = Vec::with_capacity(m);
    for mut c in eig.vectors.into_iter().take(m) {
        let mut pivot = 0;
        for (i, x) in c.iter().enumerate() {
            if Float::abs(*x) > Float::abs(c[pivot]) {
                pivot = i;
            }
        }
        if c[pivot] < T::zero() {
            for x in &mut c {
                *x = -*x;
            }
        }
        components.push(c);
    }
    Ok(PcaBasis {
        mean,
        components,
        explained_variance: eig.values[..m].to_vec(),
        total_variance,
    })
}
