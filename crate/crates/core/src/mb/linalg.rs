use crate::scalar::Scalar;

/// Inverts the row-major `n x n` matrix `a` by Gauss-Jordan elimination with
/// partial pivoting. `None` when a pivot falls below `tol`.
pub(crate) fn invert<T: Scalar>(a: &[T], n: usize, tol: T) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let w = 2 * n;
    let mut m = vec![T::zero(); n * w];
    for r in 0..n {
        m[r * w..r * w + n].copy_from_slice(&a[r * n..(r + 1) * n]);
        m[r * w + n + r] = T::one();
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| {
                m[x * w + col]
                    .abs()
                    .partial_cmp(&m[y * w + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        let pivot = m[pivot_row * w + col];
        if !(pivot.abs() > tol) {
            return None;
        }
        if pivot_row != col {
            for k in 0..w {
                m.swap(col * w + k, pivot_row * w + k);
            }
        }
        for k in 0..w {
            m[col * w + k] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r * w + col];
            if factor == T::zero() {
                continue;
            }
            for k in 0..w {
                let v = m[col * w + k];
                m[r * w + k] -= factor * v;
            }
        }
    }
    let mut inv = vec![T::zero(); n * n];
    for r in 0..n {
        inv[r * n..(r + 1) * n].copy_from_slice(&m[r * w + n..r * w + w]);
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_and_detects_singular() {
        let a = [4.0f64, 7.0, 2.0, 6.0];
        let inv = invert(&a, 2, 1e-12).unwrap();
        let expect = [0.6, -0.7, -0.2, 0.4];
        for (x, y) in inv.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2, 1e-12).is_none());
    }

    #[test]
    fn works_in_f32() {
        let inv = invert(&[2.0f32, 0.0, 0.0, 0.5], 2, 1e-5).unwrap();
        assert_eq!(inv, vec![0.5, 0.0, 0.0, 2.0]);
    }
}
