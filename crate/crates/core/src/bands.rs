//! Band structure of periodic potentials.
//!
//! The spectrum of a `p`-periodic operator is `{E : |D(E)| ≤ 2}`, a union of
//! `p` closed bands. Edges are found by interlacing: the `p - 1` Dirichlet
//! eigenvalues `μ_j` (sites `1..p-1`) sit one in each closed gap, so every
//! interval `[μ_{j-1}, μ_j]` contains exactly band `j` and `D` changes sign
//! exactly once on it. Bisection finds that zero, and then the two crossings
//! of `|D| = 2` on either side of it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::{scaled_trace, PeriodicPotential};
use crate::tridiag;

/// Widths below this are flagged `thin`; they still count toward the measure.
pub const THIN_BAND_WIDTH: f64 = 1e-12;

/// Margin added to the operator-norm bound `2 + ‖V‖` when searching for edges.
pub const SEARCH_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
    pub thin: bool,
}

impl Band {
    pub fn new(lower: f64, upper: f64) -> Self {
        Band { lower, upper, thin: upper - lower < THIN_BAND_WIDTH }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, e: f64) -> bool {
        self.lower <= e && e <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub period: usize,
    pub bands: Vec<Band>,
    pub measure: f64,
}

impl BandStructure {
    pub fn from_bands(period: usize, bands: Vec<Band>) -> Self {
        let measure = bands.iter().map(Band::width).sum();
        BandStructure { period, bands, measure }
    }

    /// The `2p` edges in ascending order.
    pub fn edges(&self) -> Vec<f64> {
        self.bands.iter().flat_map(|b| [b.lower, b.upper]).collect()
    }

    pub fn lowest(&self) -> f64 {
        self.bands[0].lower
    }

    pub fn highest(&self) -> f64 {
        self.bands[self.bands.len() - 1].upper
    }

    pub fn has_thin_band(&self) -> bool {
        self.bands.iter().any(|b| b.thin)
    }

    /// Index (0-based) of a band containing `e`, preferring the lower band
    /// when two bands touch at `e`.
    pub fn band_containing(&self, e: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.contains(e))
    }

    pub fn contains(&self, e: f64) -> bool {
        self.band_containing(e).is_some()
    }

    pub fn shifted(&self, c: f64) -> BandStructure {
        let bands = self.bands.iter().map(|b| Band::new(b.lower + c, b.upper + c)).collect();
        BandStructure::from_bands(self.period, bands)
    }

    /// Checks the structural invariants; `Err` names the first violation.
    pub fn check(&self) -> Result<()> {
        if self.bands.len() != self.period {
            return Err(Error::InvariantViolation(format!("{} bands for period {}", self.bands.len(), self.period)));
        }
        for (j, b) in self.bands.iter().enumerate() {
            if !(b.lower <= b.upper) {
                return Err(Error::InvariantViolation(format!("band {} is inverted", j + 1)));
            }
            if let Some(next) = self.bands.get(j + 1) {
                if b.upper > next.lower {
                    return Err(Error::InvariantViolation(format!("bands {} and {} overlap", j + 1, j + 2)));
                }
            }
        }
        Ok(())
    }
}

fn search_interval(pot: &PeriodicPotential) -> (f64, f64) {
    let r = 2.0 + pot.supnorm() + SEARCH_MARGIN;
    (-r, r)
}

/// Shrinks `[a, b]` to adjacent floats, keeping `!is_right(a)` and `is_right(b)`.
fn bisect<F: Fn(f64) -> bool>(mut a: f64, mut b: f64, is_right: F) -> (f64, f64) {
    for _ in 0..256 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if is_right(mid) {
            b = mid;
        } else {
            a = mid;
        }
    }
    (a, b)
}

/// The `p` bands of `Δ + V`.
pub fn band_edges(pot: &PeriodicPotential) -> Result<BandStructure> {
    let p = pot.period();
    if p == 1 {
        let v = pot.values()[0];
        return Ok(BandStructure::from_bands(1, vec![Band::new(v - 2.0, v + 2.0)]));
    }
    let values = pot.values();
    let d = |e: f64| scaled_trace(values, e).value();
    // Only the sign of D' is needed, so the unscaled mantissa suffices.
    let dsign = |e: f64| scaled_trace(values, e).dtrace;
    let (lo, hi) = search_interval(pot);
    // D has sign (-1)^(p-j) on the gap above band j (1-based).
    let upper_sign = |j: usize| if (p - j).is_multiple_of(2) { 1.0 } else { -1.0 };
    let failure = |reason: String, bands: Vec<Band>| Error::BandIsolationFailure {
        reason,
        partial: Box::new(BandStructure::from_bands(p, bands)),
    };

    let mut bounds = Vec::with_capacity(p + 1);
    bounds.push(lo);
    bounds.extend(tridiag::eigenvalues(&values[..p - 1], lo, hi));
    bounds.push(hi);
    // Sturm bisection is accurate to a few ulps; next to a band narrower
    // than that the rounded eigenvalue can land on the wrong side of it.
    // Step outward until the bound sits in the gap above band j.
    for j in 1..p {
        let s = upper_sign(j);
        if d(bounds[j]) * s > 0.0 {
            continue;
        }
        let (below, above) = (bounds[j - 1], bounds[j + 1]);
        let ulp = f64::EPSILON * bounds[j].abs().max(1.0);
        let mut step = ulp;
        let mut fixed = None;
        while fixed.is_none() && step < 1e-6 {
            fixed =
                [bounds[j] + step, bounds[j] - step].into_iter().find(|&e| e > below && e < above && d(e) * s > 0.0);
            step *= 2.0;
        }
        match fixed {
            Some(e) => bounds[j] = e,
            None => return Err(failure(format!("no sign change of the discriminant around band {j}"), Vec::new())),
        }
    }

    // One zero of D per band, bracketed by consecutive Dirichlet eigenvalues.
    let mut zeros = Vec::with_capacity(p);
    for j in 1..=p {
        let (a, b) = (bounds[j - 1], bounds[j]);
        let s = upper_sign(j);
        if d(a) * s >= 0.0 || d(b) * s <= 0.0 {
            return Err(failure(format!("no sign change of the discriminant around band {j}"), Vec::new()));
        }
        zeros.push(bisect(a, b, |e| d(e) * s > 0.0).0);
    }
    // One critical point per gap: s D increases through band j and
    // decreases through band j + 1.
    let crit: Vec<f64> = (1..p)
        .map(|j| {
            let s = upper_sign(j);
            bisect(zeros[j - 1], zeros[j], |e| dsign(e) * s < 0.0).0
        })
        .collect();

    let outside = |e: f64| d(e).abs() > 2.0;
    let mut bands: Vec<Band> = Vec::with_capacity(p);
    for j in 1..=p {
        let z = zeros[j - 1];
        let left = if j == 1 { lo } else { crit[j - 2] };
        let right = if j == p { hi } else { crit[j - 1] };
        // Edges are reported on the spectrum side of the final bracket; a
        // critical point with |D| <= 2 is a closed gap.
        let lower = if outside(left) { bisect(left, z, |e| !outside(e)).1 } else { left };
        let upper = if outside(right) { bisect(z, right, outside).0 } else { right };
        if !(lower <= z && z <= upper) {
            return Err(failure(format!("band {j} edges do not enclose its centre"), bands));
        }
        let lower = match bands.last() {
            Some(prev) => lower.max(prev.upper),
            None => lower,
        };
        bands.push(Band::new(lower, upper));
    }
    Ok(BandStructure::from_bands(p, bands))
}

/// Independent route to the edges: closed form for `p ≤ 2`, otherwise the
/// eigenvalues of the `p × p` periodic (`D = 2`) and antiperiodic (`D = -2`)
/// matrices from a dense symmetric eigensolver.
pub fn band_edges_dense(pot: &PeriodicPotential) -> BandStructure {
    let v = pot.values();
    let p = v.len();
    let mut edges = match p {
        1 => vec![v[0] - 2.0, v[0] + 2.0],
        2 => {
            let m = 0.5 * (v[0] + v[1]);
            let h = 0.5 * (v[0] - v[1]);
            let r = (h * h + 4.0).sqrt();
            vec![m - r, v[0].min(v[1]), v[0].max(v[1]), m + r]
        }
        _ => {
            let mut all = Vec::with_capacity(2 * p);
            for corner in [1.0, -1.0] {
                let mut h = DMatrix::<f64>::zeros(p, p);
                for i in 0..p {
                    h[(i, i)] = v[i];
                    if i + 1 < p {
                        h[(i, i + 1)] = 1.0;
                        h[(i + 1, i)] = 1.0;
                    }
                }
                h[(0, p - 1)] = corner;
                h[(p - 1, 0)] = corner;
                all.extend(h.symmetric_eigenvalues().iter().copied());
            }
            all
        }
    };
    edges.sort_by(f64::total_cmp);
    let bands = edges.chunks(2).map(|c| Band::new(c[0], c[1])).collect();
    BandStructure::from_bands(p, bands)
}

pub fn spectrum_measure(bs: &BandStructure) -> f64 {
    bs.bands.iter().map(Band::width).sum()
}

/// `(distance, nearest spectral point)`; ties go to the smaller energy.
pub fn distance_to_spectrum(bs: &BandStructure, e: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, e);
    for b in &bs.bands {
        let candidate = if e < b.lower {
            (b.lower - e, b.lower)
        } else if e > b.upper {
            (e - b.upper, b.upper)
        } else {
            return (0.0, e);
        };
        if candidate.0 < best.0 || (candidate.0 == best.0 && candidate.1 < best.1) {
            best = candidate;
        }
    }
    best
}
