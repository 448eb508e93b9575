//! Orthonormal complex spherical harmonics with the Condon-Shortley phase.

use num_complex::Complex64;

/// Flat index of `(l, m)` in a table holding all orders up to some `l_max`.
pub fn lm_index(l: usize, m: i32) -> usize {
    ((l * l + l) as i64 + m as i64) as usize
}

/// Number of `(l, m)` pairs with `l ≤ l_max`.
pub fn table_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// All `Y_lm(k̂)` for `l ≤ l_max`, laid out by [`lm_index`]. `k` must be a
/// unit vector. Evaluated as `p̃_lm(cosθ) (x + iy)^m`, which stays regular at
/// the poles.
pub fn spherical_harmonics(l_max: usize, k: &[f64; 3]) -> Vec<Complex64> {
    let z = k[2];
    let xy = Complex64::new(k[0], k[1]);
    let mut out = vec![Complex64::new(0.0, 0.0); table_len(l_max)];

    // p̃_lm = P̄_lm / sin^m θ, normalized so Y_lm = p̃_lm (x+iy)^m.
    let mut pmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    let mut xy_pow = Complex64::new(1.0, 0.0);
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
            xy_pow *= xy;
        }
        let mut p_prev2 = 0.0;
        let mut p_prev = pmm;
        out[lm_index(m, m as i32)] = xy_pow * pmm;
        for l in (m + 1)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = if l == m + 1 {
                0.0
            } else {
                (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt()
            };
            let p = a * (z * p_prev - b * p_prev2);
            out[lm_index(l, m as i32)] = xy_pow * p;
            p_prev2 = p_prev;
            p_prev = p;
        }
    }
    // Y_l,-m = (-1)^m Y_lm*
    for l in 1..=l_max {
        for m in 1..=l as i32 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            out[lm_index(l, -m)] = out[lm_index(l, m)].conj() * sign;
        }
    }
    out
}
