use nalgebra::DVector;
use std::f64::consts::PI;

const INV_GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Root `g > 1` of `x^{d+1} = x + 1` (golden ratio for d = 1, plastic
/// number for d = 2); `1/g^i` are the R_d Kronecker increments.
fn kronecker_base(d: usize) -> f64 {
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (d as f64 + 1.0));
    }
    g
}

/// Deterministic, asymptotically dense sequence of unit vectors with one
/// representative per antipodal pair.
///
/// - `n = 2`: golden-angle sequence on the half circle, starting at `(1, 0)`.
/// - `n = 3`: Fibonacci-type Kronecker lattice, area-preserving onto the
///   upper hemisphere.
/// - `n ≥ 4`: R_d Kronecker points pushed through Box–Muller and normalized.
///
/// Because no term depends on `count`, `sphere_sequence(n, a)` is a prefix of
/// `sphere_sequence(n, b)` whenever `a < b`.
pub fn sphere_sequence(n: usize, count: usize) -> Vec<DVector<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0); count.min(1)],
        2 => (0..count)
            .map(|k| {
                let th = PI * (k as f64 * INV_GOLDEN).fract();
                DVector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect(),
        3 => {
            let g = kronecker_base(2);
            let (a1, a2) = (1.0 / g, 1.0 / (g * g));
            (0..count)
                .map(|k| {
                    let z = (0.5 + a1 * k as f64).fract();
                    let phi = 2.0 * PI * (0.5 + a2 * k as f64).fract();
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
        _ => {
            // Pairs of uniform coordinates feed one Box–Muller transform each.
            let pairs = n.div_ceil(2);
            let g = kronecker_base(2 * pairs);
            let alphas: Vec<f64> = (1..=2 * pairs).map(|i| g.powi(-(i as i32))).collect();
            (0..count)
                .map(|k| {
                    let u: Vec<f64> = alphas.iter().map(|a| (0.5 + a * (k + 1) as f64).fract()).collect();
                    let mut v = Vec::with_capacity(2 * pairs);
                    for p in 0..pairs {
                        let u1 = u[2 * p].max(1e-300);
                        let rad = (-2.0 * u1.ln()).sqrt();
                        let ang = 2.0 * PI * u[2 * p + 1];
                        v.push(rad * ang.cos());
                        v.push(rad * ang.sin());
                    }
                    v.truncate(n);
                    let mut x = DVector::from_vec(v);
                    let norm = x.norm();
                    x /= norm;
                    if x[n - 1] < 0.0 {
                        x = -x;
                    }
                    x
                })
                .collect()
        }
    }
}
