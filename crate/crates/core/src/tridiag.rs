//! Negative-pivot (Sturm) counting for `Δ + V` restricted to a finite box
//! with Dirichlet boundary conditions. Off-diagonal entries are all 1.

/// Pivots smaller than this in magnitude are replaced by `-PIVOT_FLOOR`.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Number of eigenvalues strictly below `energy` of the tridiagonal matrix
/// with diagonal `diag` and unit off-diagonals, via the LDLᵀ pivot signs.
pub fn count_below(diag: &[f64], energy: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0_f64;
    let mut first = true;
    for &v in diag {
        q = if first { v - energy } else { (v - energy) - 1.0 / q };
        first = false;
        if q.abs() < PIVOT_FLOOR {
            q = -PIVOT_FLOOR;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues in ascending order, each bisected to full precision
/// inside `[lo, hi]` (which must contain the whole spectrum).
pub fn eigenvalues(diag: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n = diag.len();
    let mut out = Vec::with_capacity(n);
    let mut left = lo;
    for k in 0..n {
        let (mut a, mut b) = (left, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(diag, mid) <= k {
                a = mid;
            } else {
                b = mid;
            }
        }
        let ev = 0.5 * (a + b);
        out.push(ev);
        left = a;
    }
    out
}
