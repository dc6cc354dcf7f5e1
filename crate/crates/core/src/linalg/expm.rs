//! Scaling-and-squaring Padé exponential (Higham 2005 degree selection).

use alloc::vec::Vec;

use super::{C64, DenseMatrix, ONE, ZERO};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

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

/// Matrix exponential `e^A` of a square complex matrix.
pub fn expm(a: &DenseMatrix) -> DenseMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.rows();
    let ident = DenseMatrix::identity(n);
    let norm = a.norm_one();
    if norm == 0.0 {
        return ident;
    }
    for (m, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = low_order_terms(a, coeffs);
            return pade_solve(&u, &v);
        }
    }
    let s = if norm > THETA_13 { libm::ceil(libm::log2(norm / THETA_13)) as i32 } else { 0 };
    let scaled = a.scale(C64::new(libm::pow(2.0, -s as f64), 0.0));
    let (u, v) = degree13_terms(&scaled);
    let mut r = pade_solve(&u, &v);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

fn axpy_matrix(acc: &mut DenseMatrix, coeff: f64, m: &DenseMatrix) {
    for (x, y) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *x += y * coeff;
    }
}

fn low_order_terms(a: &DenseMatrix, b: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let n = a.rows();
    let a2 = a.matmul(a);
    let mut powers = Vec::with_capacity(b.len() / 2);
    powers.push(DenseMatrix::identity(n));
    for k in 1..b.len() / 2 {
        let next = powers[k - 1].matmul(&a2);
        powers.push(next);
    }
    let mut u_inner = DenseMatrix::zeros(n, n);
    let mut v = DenseMatrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        axpy_matrix(&mut u_inner, b[2 * k + 1], p);
        axpy_matrix(&mut v, b[2 * k], p);
    }
    (a.matmul(&u_inner), v)
}

fn degree13_terms(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = a.rows();
    let ident = DenseMatrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let b = &B13;

    let mut inner_u = DenseMatrix::zeros(n, n);
    axpy_matrix(&mut inner_u, b[13], &a6);
    axpy_matrix(&mut inner_u, b[11], &a4);
    axpy_matrix(&mut inner_u, b[9], &a2);
    let mut u_sum = a6.matmul(&inner_u);
    axpy_matrix(&mut u_sum, b[7], &a6);
    axpy_matrix(&mut u_sum, b[5], &a4);
    axpy_matrix(&mut u_sum, b[3], &a2);
    axpy_matrix(&mut u_sum, b[1], &ident);
    let u = a.matmul(&u_sum);

    let mut inner_v = DenseMatrix::zeros(n, n);
    axpy_matrix(&mut inner_v, b[12], &a6);
    axpy_matrix(&mut inner_v, b[10], &a4);
    axpy_matrix(&mut inner_v, b[8], &a2);
    let mut v = a6.matmul(&inner_v);
    axpy_matrix(&mut v, b[6], &a6);
    axpy_matrix(&mut v, b[4], &a4);
    axpy_matrix(&mut v, b[2], &a2);
    axpy_matrix(&mut v, b[0], &ident);
    (u, v)
}

/// Solves `(V − U) R = (V + U)`.
fn pade_solve(u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
    let p = v.add(u);
    let q = v.sub(u);
    solve(q, p)
}

/// Gaussian elimination with partial pivoting, `A X = B`.
fn solve(mut a: DenseMatrix, mut b: DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let m = b.cols();
    for col in 0..n {
        let mut piv = col;
        let mut best = a[(col, col)].norm();
        for r in col + 1..n {
            let v = a[(r, col)].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                let t = a[(col, c)];
                a[(col, c)] = a[(piv, c)];
                a[(piv, c)] = t;
            }
            for c in 0..m {
                let t = b[(col, c)];
                b[(col, c)] = b[(piv, c)];
                b[(piv, c)] = t;
            }
        }
        let inv = ONE / a[(col, col)];
        for r in col + 1..n {
            let f = a[(r, col)] * inv;
            if f == ZERO {
                continue;
            }
            for c in col..n {
                let t = a[(col, c)];
                a[(r, c)] -= f * t;
            }
            for c in 0..m {
                let t = b[(col, c)];
                b[(r, c)] -= f * t;
            }
        }
    }
    let mut x = DenseMatrix::zeros(n, m);
    for r in (0..n).rev() {
        for c in 0..m {
            let mut acc = b[(r, c)];
            for k in r + 1..n {
                acc -= a[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = acc / a[(r, r)];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;

    #[test]
    fn exponential_of_zero_is_identity() {
        assert_eq!(expm(&DenseMatrix::zeros(3, 3)), DenseMatrix::identity(3));
    }

    #[test]
    fn pauli_x_rotation_matches_closed_form() {
        // exp(-i θ X) = cos θ I − i sin θ X
        for theta in [1e-4, 0.3, 1.7, 12.0, 250.0] {
            let a = DenseMatrix::from_row_major(
                2,
                2,
                alloc::vec![ZERO, C64::new(0.0, -theta), C64::new(0.0, -theta), ZERO],
            );
            let e = expm(&a);
            let (s, c) = (libm::sin(theta), libm::cos(theta));
            let expect = DenseMatrix::from_row_major(
                2,
                2,
                alloc::vec![C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)],
            );
            assert!(e.max_abs_diff(&expect) < 1e-12 * theta.max(1.0), "theta = {theta}");
        }
    }

    #[test]
    fn agrees_with_spectral_route_on_hermitian_generators() {
        let n = 8;
        let h = DenseMatrix::from_fn(n, n, |r, c| {
            let x = ((r * 7 + c * 3) % 5) as f64 - 2.0;
            let y = if r == c { 0.0 } else { ((r + 2 * c) % 3) as f64 - 1.0 };
            if r <= c {
                C64::new(x + c as f64 * 0.1, y)
            } else {
                C64::new(((c * 7 + r * 3) % 5) as f64 - 2.0 + r as f64 * 0.1, -(((c + 2 * r) % 3) as f64 - 1.0))
            }
        });
        assert!(h.hermiticity_error() < 1e-15);
        for t in [0.01, 0.5, 3.0] {
            let a = h.scale(C64::new(0.0, -t));
            let pade = expm(&a);
            let eig = hermitian_eigen(&h);
            let phases: alloc::vec::Vec<C64> =
                eig.values.iter().map(|l| C64::new(0.0, -l * t).exp()).collect();
            let spectral = eig
                .vectors
                .matmul(&DenseMatrix::from_diagonal(&phases))
                .matmul(&eig.vectors.adjoint());
            assert!(pade.max_abs_diff(&spectral) < 1e-12, "t = {t}");
        }
    }
}
