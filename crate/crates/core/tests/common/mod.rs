//! Shared helpers for the integration suites.
#![allow(dead_code)]

use rug::Float;

/// Lowest eigenvalue of `p² + x⁴` from a harmonic-oscillator basis of
/// `size` even states with length scale `l`, by bisection on the inertia of
/// `H − λ` (number of negative pivots of its LDLᵀ factorization).
pub fn ho_basis_ground_state(size: usize, l: f64, prec: u32) -> Float {
    ho_basis_level(0, size, l, prec)
}

/// `E_n` from the parity block of `n`, as above.
pub fn ho_basis_level(n: usize, size: usize, l: f64, prec: u32) -> Float {
    let h = parity_block(n % 2, size, l, prec);
    let k = n / 2;
    let mut lo = Float::with_val(prec, 0);
    let mut hi = Float::with_val(prec, 10.0 * (n as f64 + 1.0).powf(4.0 / 3.0) + 10.0);
    for _ in 0..(prec + 10) {
        let mid = Float::with_val(prec, &lo + &hi) / 2u32;
        if negative_pivots(&h, &mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Dense block of basis states `n ≡ parity (mod 2)`; entries vanish beyond
/// the second off-diagonal.
fn parity_block(parity: usize, size: usize, l: f64, prec: u32) -> Vec<Vec<Float>> {
    // ξ² on the full basis 0..2·size+2, padded so (ξ²)² is exact on the block
    let full = 2 * size + 6;
    let x2 = |m: usize, n: usize| -> Float {
        let f = |a: usize| Float::with_val(prec, a);
        if m == n {
            f(2 * n + 1) / 2u32
        } else if m == n + 2 {
            (f(n + 1) * f(n + 2)).sqrt() / 2u32
        } else if n == m + 2 {
            (f(m + 1) * f(m + 2)).sqrt() / 2u32
        } else {
            Float::new(prec)
        }
    };
    let l = Float::with_val(prec, l);
    let kin = Float::with_val(prec, l.square_ref()).recip();
    let pot = Float::with_val(prec, l.square_ref()).square();
    let mut h = vec![vec![Float::new(prec); size]; size];
    for i in 0..size {
        for j in 0..size {
            let (m, n) = (2 * i + parity, 2 * j + parity);
            if m.abs_diff(n) > 4 {
                continue;
            }
            let mut x4 = Float::new(prec);
            for k in m.saturating_sub(2)..=(m + 2).min(full) {
                x4 += x2(m, k) * x2(k, n);
            }
            // p² = (2n+1) − ξ²
            let mut p2 = -x2(m, n);
            if m == n {
                p2 += Float::with_val(prec, 2 * n + 1);
            }
            h[i][j] = Float::with_val(prec, &kin * &p2) + Float::with_val(prec, &pot * &x4);
        }
    }
    h
}

fn negative_pivots(h: &[Vec<Float>], lambda: &Float) -> usize {
    let n = h.len();
    let prec = lambda.prec();
    let mut a: Vec<Vec<Float>> = h.to_vec();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let mut count = 0;
    for k in 0..n {
        let piv = a[k][k].clone();
        if piv.is_sign_negative() {
            count += 1;
        }
        let end = (k + 3).min(n);
        for i in k + 1..end {
            let f = Float::with_val(prec, &a[i][k] / &piv);
            for j in k + 1..end {
                let t = Float::with_val(prec, &f * &a[k][j]);
                a[i][j] -= t;
            }
        }
    }
    count
}
