//! Small numeric building blocks: scalar math shims for `no_std`, 3-vector
//! and 3×3 matrix helpers, a tridiagonal solver, a Jacobi eigensolver and
//! seeded random sampling.

use alloc::vec;
use alloc::vec::Vec;

/// Scalar math routed to `std` or `libm` depending on the build.
pub mod fp {
    #[cfg(feature = "std")]
    macro_rules! shim {
        ($name:ident, $( $arg:ident ),+) => {
            #[inline(always)]
            pub fn $name($($arg: f64),+) -> f64 {
                f64::$name($($arg),+)
            }
        };
    }

    #[cfg(not(feature = "std"))]
    macro_rules! shim {
        ($name:ident, $( $arg:ident ),+) => {
            #[inline(always)]
            pub fn $name($($arg: f64),+) -> f64 {
                libm::$name($($arg),+)
            }
        };
    }

    shim!(sqrt, x);
    shim!(sin, x);
    shim!(cos, x);
    shim!(tan, x);
    shim!(asin, x);
    shim!(acos, x);
    shim!(atan2, y, x);
    shim!(floor, x);
    shim!(ceil, x);
    shim!(round, x);
    shim!(cbrt, x);
    shim!(exp, x);

    /// Natural logarithm (named `ln` in `std`, `log` in `libm`).
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        #[cfg(feature = "std")]
        {
            f64::ln(x)
        }
        #[cfg(not(feature = "std"))]
        {
            libm::log(x)
        }
    }

    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        f64::from_bits(x.to_bits() & !(1 << 63))
    }

    #[inline(always)]
    pub fn hypot(x: f64, y: f64) -> f64 {
        sqrt(x * x + y * y)
    }

    #[inline(always)]
    pub fn powi(x: f64, n: i32) -> f64 {
        let mut out = 1.0;
        let mut base = if n < 0 { 1.0 / x } else { x };
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                out *= base;
            }
            base *= base;
            e >>= 1;
        }
        out
    }
}

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    fp::sqrt(dot(a, a))
}

#[inline]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn dist_sq(a: Vec3, b: Vec3) -> f64 {
    norm_sq(sub(a, b))
}

/// Unit vector along `a`; returns `None` if `‖a‖ < eps`.
#[inline]
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n < 1e-12 {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Arithmetic mean of a point set.
pub fn centroid(points: &[Vec3]) -> Vec3 {
    let mut c = [0.0; 3];
    for p in points {
        c = add(c, *p);
    }
    scale(c, 1.0 / points.len() as f64)
}

/// Row-vector convention: `out = p · m`.
#[inline]
pub fn mat3_apply_row(p: Vec3, m: &Mat3) -> Vec3 {
    [
        p[0] * m[0][0] + p[1] * m[1][0] + p[2] * m[2][0],
        p[0] * m[0][1] + p[1] * m[1][1] + p[2] * m[2][1],
        p[0] * m[0][2] + p[1] * m[1][2] + p[2] * m[2][2],
    ]
}

/// Matrix product `a · b`.
pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat3_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

/// Two unit vectors completing `n` to a right-handed orthonormal basis.
///
/// Deterministic: the seed axis is the coordinate axis least aligned with `n`.
pub fn plane_basis(n: Vec3) -> (Vec3, Vec3) {
    let ax = fp::abs(n[0]);
    let ay = fp::abs(n[1]);
    let az = fp::abs(n[2]);
    let seed: Vec3 = if ax <= ay && ax <= az {
        [1.0, 0.0, 0.0]
    } else if ay <= az {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let u = normalize(cross(n, seed)).expect("basis seed parallel to normal");
    let v = cross(n, u);
    (u, v)
}

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i`; `upper[i]` multiplies `x[i+1]`.
/// Requires a diagonally dominant (or otherwise stable) system, which holds
/// for the spline systems built in this crate.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n > 0 && lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// rows of the second output. Intended for the small Gram matrices of the
/// shape-model build (n = cohort size), not large systems.
pub fn eigh_symmetric(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let off = |a: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[i][j] * a[i][j];
            }
        }
        s
    };
    let mut frob = 0.0;
    for row in &a {
        for &x in row {
            frob += x * x;
        }
    }
    let tol = 1e-28 * frob.max(1e-300);

    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if fp::abs(a[p][q]) < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + fp::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + fp::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / fp::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    (values, vectors)
}

pub mod rng {
    //! Seeded sampling helpers. All randomness in the crate flows through a
    //! [`ChaCha8Rng`](rand_chacha::ChaCha8Rng) derived from a root seed and a
    //! stage label so that independent pipeline stages decorrelate without
    //! extra bookkeeping.

    use rand::RngCore;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// FNV-1a hash of a label, mixed into a root seed.
    pub fn derive_seed(root: u64, label: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        root ^ h
    }

    pub fn chacha(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Uniform sample in `[0, 1)` with 53 bits of precision.
    pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * uniform(rng)
    }

    /// Standard normal sample via Box–Muller.
    pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
        use super::fp;
        let u = loop {
            let u = uniform(rng);
            if u > 0.0 {
                break u;
            }
        };
        let v = uniform(rng);
        fp::sqrt(-2.0 * fp::ln(u)) * fp::cos(2.0 * core::f64::consts::PI * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solves_known_system() {
        // 2x + y = 4; x + 3y + z = 9; y + 2z = 7  ->  (1.3, 1.4, 2.8)
        let x = solve_tridiagonal(
            &[0.0, 1.0, 1.0],
            &[2.0, 3.0, 2.0],
            &[1.0, 1.0, 0.0],
            &[4.0, 9.0, 7.0],
        );
        assert!((2.0 * x[0] + x[1] - 4.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] + x[2] - 9.0).abs() < 1e-12);
        assert!((x[1] + 2.0 * x[2] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_recovers_diagonal_spectrum() {
        let m = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let (vals, vecs) = eigh_symmetric(&m);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        // A v = λ v for each pair.
        for (lambda, v) in vals.iter().zip(&vecs) {
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| m[i][j] * v[j]).sum();
                assert!((av - lambda * v[i]).abs() < 1e-9);
            }
        }
        // Trace preserved.
        let trace: f64 = vals.iter().sum();
        assert!((trace - 9.0).abs() < 1e-9);
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let mut a = rng::chacha(rng::derive_seed(7, "stage"));
        let mut b = rng::chacha(rng::derive_seed(7, "stage"));
        for _ in 0..10 {
            assert_eq!(rng::uniform(&mut a).to_bits(), rng::uniform(&mut b).to_bits());
        }
        let mut c = rng::chacha(rng::derive_seed(7, "other"));
        assert_ne!(rng::uniform(&mut a).to_bits(), rng::uniform(&mut c).to_bits());
    }

    #[test]
    fn normal_moments_are_plausible() {
        let mut rng = rng::chacha(42);
        let n = 20_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = rng::normal(&mut rng);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn plane_basis_is_orthonormal() {
        let n = normalize([0.3, -0.5, 0.8]).unwrap();
        let (u, v) = plane_basis(n);
        assert!(dot(u, n).abs() < 1e-12);
        assert!(dot(v, n).abs() < 1e-12);
        assert!(dot(u, v).abs() < 1e-12);
        assert!((norm(u) - 1.0).abs() < 1e-12);
        assert!((norm(v) - 1.0).abs() < 1e-12);
    }
}
