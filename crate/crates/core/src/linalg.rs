//! Dense matrix exponential and small helpers.

use nalgebra::{DMatrix, DVector};

const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068,
    5.371920351148152,
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Maximum absolute column sum.
pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with Padé approximants of
/// degree 3, 5, 7, 9 or 13 (Higham, 2005). The zero matrix maps exactly to
/// the identity.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    assert!(norm.is_finite(), "expm of a non-finite matrix");
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;

    let low = |b: &[f64]| {
        // Odd and even parts of the Padé numerator for degrees up to 9.
        let mut u = &id * b[1];
        let mut v = &id * b[0];
        let mut pow = id.clone();
        let m = b.len() - 1;
        for k in (2..=m).step_by(2) {
            pow = &pow * &a2;
            u += &pow * b[k + 1];
            v += &pow * b[k];
        }
        (a * u, v)
    };
    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = low(&B3);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = low(&B5);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = low(&B7);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = low(&B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
        let scale = 2f64.powi(-s);
        let a1 = a * scale;
        let a2 = &a2 * (scale * scale);
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let b = &B13;
        let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
        let u = &a1 * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
        let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
        let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// `expm(t * a)` with `t = 0` mapping exactly to the identity.
pub fn expm_scaled(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if t == 0.0 {
        return DMatrix::identity(a.nrows(), a.ncols());
    }
    expm(&(a * t))
}

/// Largest elementwise relative difference, measured against the largest
/// magnitude of `b`.
pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.amax().max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

/// Dot product of two vectors given as slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(k: f64, h: f64, t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                (-k * t).exp(),
                k * ((-h * t).exp() - (-k * t).exp()) / (k - h),
                0.0,
                (-h * t).exp(),
            ],
        )
    }

    #[test]
    fn zero_is_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(expm(&z), DMatrix::identity(4, 4));
        let a = DMatrix::from_element(3, 3, 1.0);
        assert_eq!(expm_scaled(&a, 0.0), DMatrix::identity(3, 3));
    }

    #[test]
    fn single_link_closed_form_across_scales() {
        // Hits every Padé degree and the squaring branch.
        for &(k, h) in &[(2.0, 1.0), (1.0, 1e-3), (5.0, 4.0), (3e-4, 2e-2)] {
            let m = DMatrix::from_row_slice(2, 2, &[-k, k, 0.0, -h]);
            for &t in &[1e-4, 1e-2, 0.1, 0.5, 1.0, 3.0, 10.0, 100.0] {
                let got = expm_scaled(&m, t);
                let want = two_by_two(k, h, t);
                for i in 0..2 {
                    for j in 0..2 {
                        let err = (got[(i, j)] - want[(i, j)]).abs();
                        assert!(err <= 1e-13 * want[(i, j)].abs().max(1e-300) + 1e-300 || err < 1e-15,
                            "k={k} h={h} t={t} ({i},{j}): {} vs {}", got[(i, j)], want[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_and_nilpotent() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5, -20.0]));
        let e = expm(&d);
        for (i, v) in [-1.0f64, 0.5, -20.0].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() <= 1e-13 * v.exp());
        }
        let n = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = expm(&(n * 7.0));
        assert!((e[(0, 2)] - 24.5).abs() < 1e-12);
        assert!((e[(0, 1)] - 7.0).abs() < 1e-13);
    }

    #[test]
    fn rotation() {
        let w = 30.0;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - w.cos()).abs() < 1e-12);
        assert!((e[(0, 1)] - w.sin()).abs() < 1e-12);
    }
}
