//! Small dense helpers shared by the generators and diagnostics.

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use rand_distr::{Distribution, StandardNormal};

use crate::rng::Rng;
use crate::{Error, Result};

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

pub fn norm(a: ArrayView1<f64>) -> f64 {
    a.dot(&a).sqrt()
}

/// `a -= <a, v> v` for a unit vector `v`.
pub fn remove_component(mut a: ArrayViewMut1<f64>, v: ArrayView1<f64>) {
    let c = a.dot(&v);
    a.scaled_add(-c, &v);
}

/// `count` orthonormal vectors in `R^dim`, stored as rows.
///
/// Rows come from a seeded Gaussian matrix orthonormalized with modified
/// Gram-Schmidt, run twice per vector ("twice is enough") to hold the Gram
/// matrix at the identity to ~1e-15.
pub fn random_orthonormal_rows(count: usize, dim: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    if count > dim {
        return Err(Error::DimensionTooSmall {
            required: count,
            actual: dim,
        });
    }
    let mut rows = Array2::<f64>::zeros((count, dim));
    for i in 0..count {
        loop {
            for x in rows.row_mut(i).iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            for _ in 0..2 {
                for j in 0..i {
                    let (done, mut rest) = rows.view_mut().split_at(ndarray::Axis(0), i);
                    remove_component(rest.row_mut(0), done.row(j));
                }
            }
            let n = norm(rows.row(i));
            // A Gaussian draw lands in the span of earlier rows with probability zero;
            // redraw on the off chance of severe cancellation.
            if n > 1e-6 {
                rows.row_mut(i).mapv_inplace(|x| x / n);
                break;
            }
        }
    }
    Ok(rows)
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Average ranks (ties share the mean rank), 1-based.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    pearson(&ra, &rb)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn orthonormal_rows_have_identity_gram() {
        let mut rng = seeded(3);
        let q = random_orthonormal_rows(12, 16, &mut rng).unwrap();
        let g = q.dot(&q.t());
        for i in 0..12 {
            for j in 0..12 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - target).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn too_many_rows_is_an_error() {
        let mut rng = seeded(3);
        assert!(random_orthonormal_rows(5, 4, &mut rng).is_err());
    }

    #[test]
    fn spearman_of_monotone_sequence_is_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [0.1, 5.0, 7.0, 100.0];
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-15);
        let c = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &c) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0];
        let y = [3.0, 5.0, 7.0];
        assert!((ls_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}
