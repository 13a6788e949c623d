//! Small dense singular value decomposition.
//!
//! One-sided (Hestenes) Jacobi: the columns of `A` are rotated pairwise until
//! they are mutually orthogonal. The accumulated rotations form `V`, and the
//! final column norms are the singular values. Works for any row count,
//! including `rows < cols`, which the four-point homography system needs
//! (8 × 9) and which thin SVD routines cannot answer for the null vector.

use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// Right singular vectors and singular values of a matrix, sorted by
/// decreasing singular value.
#[derive(Debug, Clone)]
pub struct RightSvd<T> {
    pub singular_values: Vec<T>,
    /// `vectors[j]` is the unit right singular vector for `singular_values[j]`.
    pub vectors: Vec<Vec<T>>,
}

impl<T: Scalar> RightSvd<T> {
    /// Unit vector minimizing `‖A x‖` over `‖x‖ = 1`.
    pub fn smallest(&self) -> &[T] {
        self.vectors.last().expect("svd of a matrix with at least one column")
    }
}

/// Decomposes a row-major `rows × cols` matrix.
pub fn right_svd<T: Scalar>(rows: usize, cols: usize, data: &[T]) -> RightSvd<T> {
    assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
    assert!(cols > 0);

    // column-major working copy of A
    let mut a: Vec<Vec<T>> = (0..cols).map(|j| (0..rows).map(|i| data[i * cols + j]).collect()).collect();
    let mut v: Vec<Vec<T>> =
        (0..cols).map(|j| (0..cols).map(|i| if i == j { T::one() } else { T::zero() }).collect()).collect();

    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = column_products(&a[p], &a[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(T, usize)> =
        a.iter().enumerate().map(|(j, col)| (col.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt(), j)).collect();
    order.sort_by(|l, r| r.0.partial_cmp(&l.0).unwrap_or(std::cmp::Ordering::Equal).then(l.1.cmp(&r.1)));

    RightSvd {
        singular_values: order.iter().map(|&(s, _)| s).collect(),
        vectors: order.iter().map(|&(_, j)| v[j].clone()).collect(),
    }
}

fn column_products<T: Scalar>(x: &[T], y: &[T]) -> (T, T, T) {
    x.iter()
        .zip(y)
        .fold((T::zero(), T::zero(), T::zero()), |(a, b, g), (&xi, &yi)| (a + xi * xi, b + yi * yi, g + xi * yi))
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let (u, w) = (*xp, *xq);
        *xp = c * u - s * w;
        *xq = s * u + c * w;
    }
}
