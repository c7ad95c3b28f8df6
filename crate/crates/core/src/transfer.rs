//! Transfer matrices, monodromy, the Floquet discriminant and Lyapunov
//! exponents of periodic potentials.
//!
//! The eigenvalue equation `u(n+1) + u(n-1) + v(n) u(n) = E u(n)` is
//! propagated one site at a time by a 2×2 matrix acting on `(u(n), u(n-1))`.
//! Two sign conventions are supported:
//!
//! * [`Convention::VMinusE`]: `[[v - E, -1], [1, 0]]`
//! * [`Convention::Standard`]: `[[E - v, -1], [1, 0]]`
//!
//! The standard convention is the one used for band and IDS computations,
//! since its trace `D(E)` equals `+2` exactly at periodic eigenvalues.
//! Over one period the traces of the two conventions differ by `(-1)^p`;
//! spectral radii coincide.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    VMinusE,
    #[default]
    Standard,
}

/// Row-major 2×2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    fn scale(&self, s: f64) -> Mat2 {
        Mat2 { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    fn add(&self, o: &Mat2) -> Mat2 {
        Mat2 { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c, d: self.d + o.d }
    }
}

impl std::ops::Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

/// A real sequence of period `p`, stored as one period `v(1), …, v(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PeriodicPotential {
    values: Vec<f64>,
    supnorm: f64,
}

impl PeriodicPotential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("potential needs at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("potential value at index {i} is not finite")));
        }
        let supnorm = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(PeriodicPotential { values, supnorm })
    }

    /// The zero potential with period 1.
    pub fn free() -> Self {
        PeriodicPotential { values: vec![0.0], supnorm: 0.0 }
    }

    pub fn constant(c: f64, period: usize) -> Result<Self> {
        Self::new(vec![c; period.max(1)])
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn supnorm(&self) -> f64 {
        self.supnorm
    }

    /// Value at an arbitrary site of ℤ, with site 1 the first stored entry.
    pub fn at(&self, site: i64) -> f64 {
        let p = self.period() as i64;
        self.values[(site - 1).rem_euclid(p) as usize]
    }

    /// The same sequence viewed with period `m·p`.
    pub fn tile(&self, m: usize) -> PeriodicPotential {
        let values = self.values.iter().copied().cycle().take(self.period() * m.max(1)).collect();
        PeriodicPotential { values, supnorm: self.supnorm }
    }

    pub fn shifted(&self, c: f64) -> Result<PeriodicPotential> {
        Self::new(self.values.iter().map(|v| v + c).collect())
    }

    /// Sup-norm distance between the two sequences on ℤ; the periods may differ.
    pub fn sup_distance(&self, other: &PeriodicPotential) -> f64 {
        let l = lcm(self.period(), other.period());
        (1..=l as i64).fold(0.0_f64, |m, n| m.max((self.at(n) - other.at(n)).abs()))
    }
}

impl TryFrom<Vec<f64>> for PeriodicPotential {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        PeriodicPotential::new(values)
    }
}

impl From<PeriodicPotential> for Vec<f64> {
    fn from(p: PeriodicPotential) -> Vec<f64> {
        p.values
    }
}

pub(crate) fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// A finite multiset of potentials sharing one period.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteFamily {
    members: Vec<PeriodicPotential>,
}

impl FiniteFamily {
    pub fn new(members: Vec<PeriodicPotential>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidInput("family must have at least one member".into()));
        };
        let p = first.period();
        if members.iter().any(|m| m.period() != p) {
            return Err(Error::InvalidInput("family members must share one period".into()));
        }
        Ok(FiniteFamily { members })
    }

    pub fn members(&self) -> &[PeriodicPotential] {
        &self.members
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn period(&self) -> usize {
        self.members[0].period()
    }

    pub fn max_supnorm(&self) -> f64 {
        self.members.iter().fold(0.0, |m, f| m.max(f.supnorm()))
    }
}

pub fn step_matrix(v: f64, energy: f64, convention: Convention) -> Result<Mat2> {
    ensure_finite("potential value", v)?;
    ensure_finite("energy", energy)?;
    Ok(step_unchecked(v, energy, convention))
}

#[inline]
fn step_unchecked(v: f64, energy: f64, convention: Convention) -> Mat2 {
    let diag = match convention {
        Convention::VMinusE => v - energy,
        Convention::Standard => energy - v,
    };
    Mat2 { a: diag, b: -1.0, c: 1.0, d: 0.0 }
}

/// Ordered product `T(p) ⋯ T(2) T(1)` over one period.
pub fn monodromy(pot: &PeriodicPotential, energy: f64, convention: Convention) -> Result<Mat2> {
    ensure_finite("energy", energy)?;
    Ok(pot.values().iter().fold(Mat2::IDENTITY, |m, &v| step_unchecked(v, energy, convention) * m))
}

// Products are rescaled by 2^-RESCALE_BITS whenever an entry exceeds 2^RESCALE_BITS.
const RESCALE_BITS: i32 = 256;

/// Trace (and derivative) of the standard monodromy, stored as a mantissa
/// times `2^(RESCALE_BITS * rescales)` so long periods cannot overflow.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledTrace {
    pub trace: f64,
    pub dtrace: f64,
    pub rescales: i32,
}

impl ScaledTrace {
    fn factor(&self) -> f64 {
        2f64.powi(RESCALE_BITS * self.rescales)
    }

    /// `D(E)`; saturates to ±∞ when the true value exceeds the f64 range.
    pub fn value(&self) -> f64 {
        if self.trace == 0.0 {
            0.0
        } else {
            self.trace * self.factor()
        }
    }

    pub fn derivative(&self) -> f64 {
        if self.dtrace == 0.0 {
            0.0
        } else {
            self.dtrace * self.factor()
        }
    }

    /// `log ρ(M)` for the det-1 monodromy with this trace.
    pub fn log_spectral_radius(&self) -> f64 {
        let t = self.value();
        if t.is_finite() {
            log_spectral_radius(t)
        } else {
            // |t| ≫ 2, so ρ = |t| to all printed digits.
            self.trace.abs().ln() + (RESCALE_BITS * self.rescales) as f64 * std::f64::consts::LN_2
        }
    }
}

/// One pass over the period accumulating `M` and `dM/dE` by the product rule.
pub(crate) fn scaled_trace(values: &[f64], energy: f64) -> ScaledTrace {
    let big = 2f64.powi(RESCALE_BITS);
    let shrink = 2f64.powi(-RESCALE_BITS);
    let mut m = Mat2::IDENTITY;
    let mut dm = Mat2 { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };
    let mut rescales = 0;
    for &v in values {
        let t = step_unchecked(v, energy, Convention::Standard);
        // dT/dE = [[1,0],[0,0]], so (dT) M is the first row of M.
        let dt_m = Mat2 { a: m.a, b: m.b, c: 0.0, d: 0.0 };
        dm = (t * dm).add(&dt_m);
        m = t * m;
        if m.max_abs() > big || dm.max_abs() > big {
            m = m.scale(shrink);
            dm = dm.scale(shrink);
            rescales += 1;
        }
    }
    ScaledTrace { trace: m.trace(), dtrace: dm.trace(), rescales }
}

/// `log ρ` of a det-1 2×2 matrix with trace `t`: `acosh(|t|/2)` outside
/// `[-2, 2]`, zero inside.
pub fn log_spectral_radius(t: f64) -> f64 {
    let a = t.abs();
    if a <= 2.0 {
        0.0
    } else {
        (a / 2.0).acosh()
    }
}

/// `(D(E), D'(E))` for the standard convention. The derivative comes from
/// the product rule, not from differencing.
pub fn discriminant(pot: &PeriodicPotential, energy: f64) -> Result<(f64, f64)> {
    ensure_finite("energy", energy)?;
    let s = scaled_trace(pot.values(), energy);
    Ok((s.value(), s.derivative()))
}

/// `(1/p) log ρ(M(E))`.
pub fn lyapunov_periodic(pot: &PeriodicPotential, energy: f64) -> Result<f64> {
    ensure_finite("energy", energy)?;
    let s = scaled_trace(pot.values(), energy);
    Ok(s.log_spectral_radius() / pot.period() as f64)
}

/// Mean of the member exponents, counted with multiplicity.
pub fn averaged_lyapunov(fam: &FiniteFamily, energy: f64) -> Result<f64> {
    let mut sum = 0.0;
    for f in fam.members() {
        sum += lyapunov_periodic(f, energy)?;
    }
    Ok(sum / fam.count() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinnessEstimate {
    /// Grid minimum of `L(E, F) / (#F · p)`.
    pub delta_hat: f64,
    /// `exp(-delta_hat · candidate_period / 2)`.
    pub predicted_measure: f64,
}

/// Estimate of the spectral thinness a refinement of `fam` to
/// `candidate_period` could reach. The infimum over ℝ is replaced by the
/// plain minimum over the supplied grid points. Diagnostic only.
pub fn thinness_diagnostic(fam: &FiniteFamily, grid: &[f64], candidate_period: usize) -> Result<ThinnessEstimate> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("thinness grid is empty".into()));
    }
    if candidate_period == 0 {
        return Err(Error::InvalidInput("candidate period must be positive".into()));
    }
    let reach = 2.0 + fam.max_supnorm();
    let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    if lo > -reach || hi < reach {
        return Err(Error::InvalidInput(format!("thinness grid [{lo}, {hi}] does not span [{}, {reach}]", -reach)));
    }
    let scale = (fam.count() * fam.period()) as f64;
    let mut min = f64::INFINITY;
    for &e in grid {
        min = min.min(averaged_lyapunov(fam, e)? / scale);
    }
    Ok(ThinnessEstimate { delta_hat: min, predicted_measure: (-min * candidate_period as f64 / 2.0).exp() })
}
