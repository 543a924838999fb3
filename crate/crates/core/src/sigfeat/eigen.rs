//! Dense symmetric eigendecomposition: Householder reduction to tridiagonal
//! form followed by the implicit QL algorithm.

use num_traits::Float;

use crate::scalar::Scalar;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<T>>,
}

const MAX_QL_SWEEPS: usize = 64;

/// Decomposes the symmetric `n × n` row-major matrix `a`.
pub fn symmetric_eigen<T: Scalar>(a: &[T], n: usize) -> SymmetricEigen<T> {
    assert_eq!(a.len(), n * n, "matrix is not n x n");
    if n == 0 {
        return SymmetricEigen {
            values: vec![],
            vectors: vec![],
        };
    }
    let mut vt: Vec<Vec<T>> = (0..n).map(|i| a[i * n..(i + 1) * n].to_vec()).collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut vt, &mut d, &mut e);
    ql_implicit(&mut vt, &mut d, &mut e);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = order.iter().map(|&j| std::mem::take(&mut vt[j])).collect();
    SymmetricEigen { values, vectors }
}

/// Householder reduction of the symmetric matrix in `w`. On return `w` holds
/// the transpose of the orthogonal transform, `d` the diagonal and `e` the
/// subdiagonal (in `e[1..]`). Working on the transpose keeps every inner loop
/// on a contiguous row.
fn tridiagonalize<T: Scalar>(w: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for (j, dj) in d.iter_mut().enumerate() {
        *dj = w[j][n - 1];
    }

    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for dk in d.iter().take(i) {
            scale = scale + Float::abs(*dk);
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[j][i - 1];
                w[j][i] = zero;
                w[i][j] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk = *dk / scale;
                h = h + *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }

            for j in 0..i {
                let f = d[j];
                w[i][j] = f;
                let mut g = e[j] + w[j][j] * f;
                for k in j + 1..i {
                    g = g + w[j][k] * d[k];
                    e[k] = e[k] + w[j][k] * f;
                }
                e[j] = g;
            }
            let mut f = zero;
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    w[j][k] = w[j][k] - (f * e[k] + g * d[k]);
                }
                d[j] = w[j][i - 1];
                w[j][i] = zero;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        w[i][n - 1] = w[i][i];
        w[i][i] = T::one();
        let h = d[i + 1];
        if h != zero {
            for (dk, &wk) in d.iter_mut().zip(&w[i + 1][..=i]) {
                *dk = wk / h;
            }
            for j in 0..=i {
                let g = w[i + 1][..=i]
                    .iter()
                    .zip(&w[j][..=i])
                    .fold(zero, |g, (&a, &b)| g + a * b);
                for (wjk, &dk) in w[j][..=i].iter_mut().zip(&d[..=i]) {
                    *wjk = *wjk - g * dk;
                }
            }
        }
        w[i + 1][..=i].fill(zero);
    }
    for j in 0..n {
        d[j] = w[j][n - 1];
        w[j][n - 1] = zero;
    }
    w[n - 1][n - 1] = T::one();
    e[0] = zero;
}

/// Implicit QL iterations on the tridiagonal `(d, e)`, accumulating into the
/// transposed transform `vt` (row `j` is column `j`).
fn ql_implicit<T: Scalar>(vt: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(Float::abs(d[l]) + Float::abs(e[l]));
        let mut m = l;
        while m < n - 1 && Float::abs(e[m]) > eps * tst1 {
            m += 1;
        }
        if m > l {
            for _ in 0..MAX_QL_SWEEPS {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.split_at_mut(i + 1);
                    for (a, b) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if Float::abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = zero;
    }
}
