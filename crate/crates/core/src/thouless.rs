//! Thouless-formula cross-check: `L(E) = ∫ log|E - E'| dk(E')`.
//!
//! The integral is taken band by band in the IDS parametrisation: band `j`
//! carries `dk = dt / p` with `t ∈ [0, 1]` and `E_j(t)` the inverse of the
//! in-band fraction. For a band not containing `E` the integrand is smooth
//! and goes to adaptive Gauss–Kronrod directly. For a band containing `E`,
//! with `E = E_j(t*)`, the logarithm is split as
//!
//! `log|E - E_j(t)| = log|cos πt* - cos πt| - log|Q(t)|`,
//!
//! where `Q` is the divided difference of `s_j D / 2` between `E` and
//! `E_j(t)`. The first term integrates to `-log 2` over `[0, 1]` for every
//! `t*`; `Q` is smooth and nonzero, and its integral is split at `t*`.

use crate::bands::BandStructure;
use crate::error::{ensure_finite, Error, Result};
use crate::ids::{band_fraction, band_sign};
use crate::transfer::{scaled_trace, PeriodicPotential};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Quadrature controls.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Absolute error target per band integral.
    pub tolerance: f64,
    /// Maximum number of subintervals per band integral.
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { tolerance: 1e-9, max_intervals: 400 }
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut parts = vec![(a, b, kronrod(&f, a, b))];
    loop {
        let (total, err) = parts.iter().fold((0.0, 0.0), |(s, e), p| (s + p.2 .0, e + p.2 .1));
        if err <= opts.tolerance {
            return Ok(total);
        }
        if parts.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure { error_estimate: err });
        }
        let worst =
            parts.iter().enumerate().max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1)).map(|(i, _)| i).unwrap_or(0);
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::QuadratureFailure { error_estimate: err });
        }
        parts.push((lo, mid, kronrod(&f, lo, mid)));
        parts.push((mid, hi, kronrod(&f, mid, hi)));
    }
}

/// `E_j(t)`: the energy in band `j` (1-based) at IDS fraction `t`.
fn band_energy(values: &[f64], p: usize, j: usize, lower: f64, upper: f64, t: f64) -> f64 {
    let s = band_sign(p, j);
    let target = (std::f64::consts::PI * t).cos();
    // s D / 2 decreases from 1 to -1 across the band.
    let (mut a, mut b) = (lower, upper);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if s * scaled_trace(values, mid).value() / 2.0 > target {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// `∫ log|E - E'| dk(E')` for the periodic potential with bands `bs`.
pub fn thouless_lyapunov(pot: &PeriodicPotential, bs: &BandStructure, e: f64) -> Result<f64> {
    thouless_lyapunov_with(pot, bs, e, QuadratureOptions::default())
}

pub fn thouless_lyapunov_with(
    pot: &PeriodicPotential,
    bs: &BandStructure,
    e: f64,
    opts: QuadratureOptions,
) -> Result<f64> {
    ensure_finite("energy", e)?;
    let p = pot.period();
    if bs.period != p || bs.bands.len() != p {
        return Err(Error::InvalidInput("band structure does not match the potential".into()));
    }
    let values = pot.values();
    let pi = std::f64::consts::PI;
    let mut sum = 0.0;
    for (idx, band) in bs.bands.iter().enumerate() {
        let j = idx + 1;
        let (lo, hi) = (band.lower, band.upper);
        if band.width() == 0.0 {
            sum += (e - lo).abs().ln();
            continue;
        }
        let energy_at = |t: f64| band_energy(values, p, j, lo, hi, t);
        if band.contains(e) {
            let t_star = band_fraction(p, j, scaled_trace(values, e).value());
            let log_q = |t: f64| {
                // cos πt* - cos πt, in product form to keep digits near t*.
                let num = -2.0 * (pi * (t_star + t) / 2.0).sin() * (pi * (t_star - t) / 2.0).sin();
                let den = e - energy_at(t);
                if den == 0.0 || num == 0.0 {
                    // Only reachable on a node coinciding with t*; use the
                    // slope of s D / 2 there.
                    let dd = scaled_trace(values, e).derivative() * band_sign(p, j) / 2.0;
                    dd.abs().ln()
                } else {
                    (num / den).abs().ln()
                }
            };
            let left = integrate(log_q, 0.0, t_star, opts)?;
            let right = integrate(log_q, t_star, 1.0, opts)?;
            sum += -std::f64::consts::LN_2 - (left + right);
        } else {
            sum += integrate(|t| (e - energy_at(t)).abs().ln(), 0.0, 1.0, opts)?;
        }
    }
    Ok(sum / p as f64)
}
