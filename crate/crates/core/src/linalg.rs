//! Dense small-matrix helpers: complex matrix exponential, stationary vectors
//! of generators and the deflated solves used by the counting-process moments.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub fn complexify(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn norm1(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Diagonal Pade coefficients b_0..b_m for the exponential.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
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
const PADE13: [f64; 14] = [
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

// Largest 1-norms for which the [m/m] approximant meets unit roundoff.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

fn scaled(a: &CMatrix, c: f64) -> CMatrix {
    a * Complex64::new(c, 0.0)
}

fn pade_low(a: &CMatrix, b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let eye = CMatrix::identity(n, n);
    let a2 = a * a;
    let mut even_pow = eye.clone();
    let mut u_inner = scaled(&eye, b[1]);
    let mut v = scaled(&eye, b[0]);
    let mut k = 2;
    while k < b.len() {
        even_pow = &even_pow * &a2;
        v += scaled(&even_pow, b[k]);
        if k + 1 < b.len() {
            u_inner += scaled(&even_pow, b[k + 1]);
        }
        k += 2;
    }
    (a * u_inner, v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let b = &PADE13;
    let n = a.nrows();
    let eye = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u_inner = &a6 * u_hi
        + scaled(&a6, b[7])
        + scaled(&a4, b[5])
        + scaled(&a2, b[3])
        + scaled(&eye, b[1]);
    let v_hi = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * v_hi + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&eye, b[0]);
    (a * u_inner, v)
}

fn pade_solve(u: CMatrix, v: CMatrix) -> CMatrix {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Pade denominator is nonsingular for scaled arguments")
}

/// Matrix exponential by scaling and squaring with a diagonal Pade approximant.
///
/// The approximant degree (3, 5, 7, 9 or 13) and the number of squarings are
/// selected from the 1-norm of the argument.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    if n == 1 {
        return CMatrix::from_element(1, 1, a[(0, 0)].exp());
    }
    let nrm = norm1(a);
    for (theta, coeffs) in [
        (THETA3, &PADE3[..]),
        (THETA5, &PADE5[..]),
        (THETA7, &PADE7[..]),
        (THETA9, &PADE9[..]),
    ] {
        if nrm <= theta {
            let (u, v) = pade_low(a, coeffs);
            return pade_solve(u, v);
        }
    }
    let squarings = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a_scaled = scaled(a, 0.5f64.powi(squarings));
    let (u, v) = pade13(&a_scaled);
    let mut r = pade_solve(u, v);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

pub fn expm_real(a: &RMatrix) -> RMatrix {
    expm(&complexify(a)).map(|z| z.re)
}

/// True when the directed graph of positive off-diagonal rates is strongly connected.
pub fn is_irreducible(d: &RMatrix) -> bool {
    let n = d.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let rate = if forward { d[(i, j)] } else { d[(j, i)] };
                if i != j && rate > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary row vector of an irreducible generator: `pi D = 0`, `pi e = 1`.
pub fn stationary_of_generator(d: &RMatrix) -> Result<DVector<f64>> {
    let n = d.nrows();
    if !is_irreducible(d) {
        return Err(Error::Reducible(format!(
            "{n}x{n} generator has more than one communicating class"
        )));
    }
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    // Solve D^T pi^T = 0 with the last equation replaced by normalization.
    let mut a = d.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Reducible("stationary system is singular".into()))?;
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::Reducible("stationary vector is not strictly positive".into()));
    }
    Ok(pi)
}

/// Stationary law of a stochastic matrix `P` (rows sum to one): `rho P = rho`.
pub fn stationary_of_stochastic(p: &RMatrix) -> Result<DVector<f64>> {
    let n = p.nrows();
    let generator = p - RMatrix::identity(n, n);
    stationary_of_generator(&generator)
}

/// Solves `(D - e pi) x = b` without forming the inverse.
pub fn deflated_solve(d: &RMatrix, pi: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = d.nrows();
    let mut a = d.clone();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] -= pi[j];
        }
    }
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("D - e pi".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    // Truncated Taylor series, evaluated with many terms: independent oracle
    // for moderate norms.
    fn taylor_expm(a: &CMatrix, terms: usize) -> CMatrix {
        let n = a.nrows();
        let mut term = CMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..terms {
            term = &term * a * c(1.0 / k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn symmetric_generator_closed_form() {
        let d = RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        for &t in &[0.0, 0.3, 1.0, 10.0, 40.0] {
            let e = expm_real(&(&d * t));
            let decay = (-2.0 * t).exp();
            assert!((e[(0, 0)] - 0.5 * (1.0 + decay)).abs() < 1e-13);
            assert!((e[(0, 1)] - 0.5 * (1.0 - decay)).abs() < 1e-13);
        }
    }

    #[test]
    fn matches_taylor_on_complex_matrices() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(-1.2, 0.3),
                c(0.7),
                Complex64::new(0.1, -0.4),
                c(0.2),
                Complex64::new(-2.0, 0.0),
                c(1.1),
                Complex64::new(0.0, 0.5),
                c(0.3),
                c(-0.6),
            ],
        );
        for &scale in &[0.01, 0.2, 1.0, 3.0] {
            let m = &a * c(scale);
            let diff = (expm(&m) - taylor_expm(&m, 80)).norm();
            assert!(diff < 1e-12, "scale {scale}: {diff}");
        }
    }

    #[test]
    fn large_norm_generator_closed_form() {
        // D = [[-3, 3], [1, -1]]: exp(Dt) = e pi + e^{-4t} (I - e pi), pi = (1/4, 3/4).
        let d = RMatrix::from_row_slice(2, 2, &[-3.0, 3.0, 1.0, -1.0]);
        let pi = [0.25, 0.75];
        for &t in &[2.5, 20.0, 80.0] {
            let e = expm_real(&(&d * t));
            let decay = (-4.0 * t).exp();
            for i in 0..2 {
                for j in 0..2 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    let want = pi[j] + decay * (delta - pi[j]);
                    assert!((e[(i, j)] - want).abs() < 1e-12, "t={t}");
                }
            }
        }
    }

    #[test]
    fn stationary_two_state() {
        let d = RMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 1.0, -1.0]);
        let pi = stationary_of_generator(&d).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn reducible_is_rejected() {
        let d = RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(stationary_of_generator(&d), Err(Error::Reducible(_))));
    }
}
