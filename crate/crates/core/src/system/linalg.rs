use nalgebra::{DMatrix, DVector};

/// Spectral norm by power iteration on `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let n = gram.nrows();
    if n == 0 || gram.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    // Deterministic start with all components excited.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = &gram * &v;
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        let converged = (next - lambda).abs() <= 1e-10 * next;
        v = w / next;
        lambda = next;
        if converged {
            break;
        }
    }
    // Rayleigh quotient is second-order accurate in the eigenvector error.
    let rq = v.dot(&(&gram * &v));
    rq.max(lambda).sqrt()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 2 {
        let (re, im) = eigenvalues_2x2(m);
        return re
            .iter()
            .zip(im.iter())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max);
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues of a 2x2 matrix as (real parts, imaginary parts).
pub fn eigenvalues_2x2(m: &DMatrix<f64>) -> ([f64; 2], [f64; 2]) {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Avoid cancellation for the smaller root.
        let big = if half >= 0.0 { half + s } else { half - s };
        let small = if big != 0.0 { det / big } else { 0.0 };
        ([big, small], [0.0, 0.0])
    } else {
        let s = (-disc).sqrt();
        ([half, half], [s, -s])
    }
}

/// Real eigenvalues (with multiplicity) for matrices whose spectrum is real,
/// or the real parts otherwise; sorted ascending.
pub fn eigenvalue_real_parts(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = if m.nrows() == 2 {
        eigenvalues_2x2(m).0.to_vec()
    } else {
        m.complex_eigenvalues().iter().map(|z| z.re).collect()
    };
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    eigenvalue_real_parts(m).iter().all(|re| *re < 0.0)
}
