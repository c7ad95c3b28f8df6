//! Integrated density of states.
//!
//! For a `p`-periodic potential every band carries weight exactly `1/p`.
//! Inside band `j` (1-based, counted from the bottom) the IDS is
//! `(j - 1 + t_j(E)) / p` with `t_j(E) = arccos(s_j D(E) / 2) / π` and
//! `s_j = (-1)^(p - j + 1)`, which runs from 0 at the lower edge to 1 at the
//! upper edge. The finite-volume estimator counts Dirichlet eigenvalues of a
//! window below `E` by negative pivots and is the independent check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{band_edges, BandStructure};
use crate::error::{ensure_finite, Error, Result};
use crate::grid::EnergyGrid;
use crate::transfer::{scaled_trace, PeriodicPotential};
use crate::tridiag;

/// `s_j` for 1-based band `j` of a period-`p` structure.
pub(crate) fn band_sign(p: usize, j: usize) -> f64 {
    if (p - j + 1).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Position in band `j` as a fraction of its IDS weight, in `[0, 1]`.
pub(crate) fn band_fraction(p: usize, j: usize, d: f64) -> f64 {
    let x = (band_sign(p, j) * d / 2.0).clamp(-1.0, 1.0);
    (x.acos() / std::f64::consts::PI).clamp(0.0, 1.0)
}

pub fn ids_periodic_exact(pot: &PeriodicPotential, bs: &BandStructure, e: f64) -> Result<f64> {
    ensure_finite("energy", e)?;
    let p = pot.period();
    if bs.period != p || bs.bands.len() != p {
        return Err(Error::InvalidInput(format!(
            "band structure of period {} does not belong to a potential of period {p}",
            bs.period
        )));
    }
    Ok(exact_unchecked(pot, bs, e))
}

fn exact_unchecked(pot: &PeriodicPotential, bs: &BandStructure, e: f64) -> f64 {
    let p = bs.period;
    let pf = p as f64;
    // Number of bands lying entirely below e.
    let below = bs.bands.partition_point(|b| b.upper < e);
    match bs.bands.get(below) {
        None => 1.0,
        Some(b) if e < b.lower => below as f64 / pf,
        // Edges sit on |D| = 2 by definition; acos would amplify the
        // rounding in D there.
        Some(b) if e == b.upper => (below + 1) as f64 / pf,
        Some(b) if e == b.lower => below as f64 / pf,
        Some(_) => {
            let j = below + 1;
            let d = scaled_trace(pot.values(), e).value();
            (below as f64 + band_fraction(p, j, d)) / pf
        }
    }
}

/// A potential bundled with its band structure for repeated IDS queries.
#[derive(Debug, Clone)]
pub struct ExactIds {
    pot: PeriodicPotential,
    bands: BandStructure,
}

impl ExactIds {
    pub fn new(pot: PeriodicPotential) -> Result<Self> {
        let bands = band_edges(&pot)?;
        Ok(ExactIds { pot, bands })
    }

    pub fn from_parts(pot: PeriodicPotential, bands: BandStructure) -> Result<Self> {
        if bands.period != pot.period() {
            return Err(Error::InvalidInput("band structure period mismatch".into()));
        }
        Ok(ExactIds { pot, bands })
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.pot
    }

    pub fn bands(&self) -> &BandStructure {
        &self.bands
    }

    pub fn at(&self, e: f64) -> f64 {
        exact_unchecked(&self.pot, &self.bands, e)
    }
}

/// Fraction of eigenvalues of the Dirichlet restriction to the window that
/// lie strictly below `e`.
pub fn ids_finite_count(window: &[f64], e: f64) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::InvalidInput("finite-volume window is empty".into()));
    }
    ensure_finite("energy", e)?;
    Ok(tridiag::count_below(window, e) as f64 / window.len() as f64)
}

/// Sites `0..n` of the periodic sequence.
pub fn window(pot: &PeriodicPotential, n: usize) -> Vec<f64> {
    (0..n as i64).map(|site| pot.at(site)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsCurve {
    pub potential: PeriodicPotential,
    pub bands: BandStructure,
    /// `(E, k(E))`, increasing in `E`.
    pub samples: Vec<(f64, f64)>,
}

impl IdsCurve {
    /// Monotonicity, the `[0, 1]` range and the per-band range constraints.
    pub fn check(&self) -> Result<()> {
        let p = self.bands.period as f64;
        for w in self.samples.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::InvariantViolation(format!("IDS samples not increasing at E = {}", w[1].0)));
            }
        }
        for &(e, k) in &self.samples {
            let below = self.bands.bands.partition_point(|b| b.upper < e) as f64;
            let in_band = self.bands.contains(e);
            let ok = if in_band { k >= below / p - 1e-15 && k <= (below + 1.0) / p + 1e-15 } else { k == below / p };
            if !ok || !(0.0..=1.0).contains(&k) {
                return Err(Error::InvariantViolation(format!("IDS value {k} out of range at E = {e}")));
            }
        }
        Ok(())
    }
}

pub fn sample_curve(pot: &PeriodicPotential, grid: &EnergyGrid) -> Result<IdsCurve> {
    grid.validate()?;
    let ids = ExactIds::new(pot.clone())?;
    let samples = grid.energies().into_par_iter().map(|e| (e, ids.at(e))).collect();
    Ok(IdsCurve { potential: ids.pot, bands: ids.bands, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::band_edges;
    use proptest::prelude::*;

    fn exact(v: &[f64], e: f64) -> f64 {
        ExactIds::new(PeriodicPotential::new(v.to_vec()).unwrap()).unwrap().at(e)
    }

    #[test]
    fn free_values() {
        assert!((exact(&[0.0], 0.0) - 0.5).abs() < 1e-15);
        assert!((exact(&[0.0], 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(exact(&[0.0], -2.0), 0.0);
        assert_eq!(exact(&[0.0], 2.0), 1.0);
    }

    #[test]
    fn dimer_plateaus() {
        let v = [1.5, -1.5];
        assert_eq!(exact(&v, 0.0), 0.5);
        assert!((exact(&v, 2.5) - 1.0).abs() < 1e-12);
        assert!(exact(&v, -2.5).abs() < 1e-12);
        assert_eq!(exact(&v, 3.0), 1.0);
        assert_eq!(exact(&v, -3.0), 0.0);
    }

    #[test]
    fn mismatch_rejected() {
        let free = PeriodicPotential::free();
        let bs = band_edges(&PeriodicPotential::new(vec![1.0, -1.0]).unwrap()).unwrap();
        assert!(ids_periodic_exact(&free, &bs, 0.0).is_err());
    }

    #[test]
    fn finite_count_basics() {
        assert_eq!(ids_finite_count(&[0.0], 1.0).unwrap(), 1.0);
        assert!(ids_finite_count(&[], 1.0).is_err());
        let w = window(&PeriodicPotential::free(), 100_000);
        assert!((ids_finite_count(&w, 0.0).unwrap() - 0.5).abs() <= 8e-5);
        let w = window(&PeriodicPotential::new(vec![0.3, -1.0, 0.8]).unwrap(), 500);
        let mut last = 0.0;
        for i in 0..=100 {
            let k = ids_finite_count(&w, -4.0 + 0.08 * i as f64).unwrap();
            assert!(k >= last);
            last = k;
        }
    }

    /// Full diagonalisation of a small window as an oracle for the pivot count.
    #[test]
    fn finite_count_matches_dense_eigenvalues() {
        let pot = PeriodicPotential::new(vec![0.9, -0.4, 1.7, -1.2, 0.1]).unwrap();
        let w = window(&pot, 60);
        let mut h = nalgebra::DMatrix::<f64>::zeros(60, 60);
        for i in 0..60 {
            h[(i, i)] = w[i];
            if i + 1 < 60 {
                h[(i, i + 1)] = 1.0;
                h[(i + 1, i)] = 1.0;
            }
        }
        let ev = h.symmetric_eigenvalues();
        for i in 0..=80 {
            let e = -4.0 + 0.1 * i as f64;
            let dense = ev.iter().filter(|&&x| x < e).count() as f64 / 60.0;
            assert_eq!(ids_finite_count(&w, e).unwrap(), dense, "E = {e}");
        }
    }

    #[test]
    fn sample_curve_examples() {
        let free = PeriodicPotential::free();
        let g = EnergyGrid::Explicit { energies: vec![-3.0, -2.0, 0.0, 2.0, 3.0] };
        let c = sample_curve(&free, &g).unwrap();
        let ks: Vec<f64> = c.samples.iter().map(|s| s.1).collect();
        assert_eq!(ks[0], 0.0);
        assert_eq!(ks[1], 0.0);
        assert!((ks[2] - 0.5).abs() < 1e-15);
        assert_eq!(ks[3], 1.0);
        assert_eq!(ks[4], 1.0);
        c.check().unwrap();

        let dimer = PeriodicPotential::new(vec![1.5, -1.5]).unwrap();
        let g = EnergyGrid::Explicit { energies: vec![-3.0, 0.0, 3.0] };
        let c = sample_curve(&dimer, &g).unwrap();
        assert_eq!(c.samples.iter().map(|s| s.1).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    }

    fn random_potential(max_p: usize) -> impl Strategy<Value = PeriodicPotential> {
        prop::collection::vec(-2.0..2.0f64, 1..=max_p).prop_map(|v| PeriodicPotential::new(v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn band_increment_is_one_over_p(p in random_potential(20)) {
            let ids = ExactIds::new(p.clone()).unwrap();
            let pf = p.period() as f64;
            for b in &ids.bands().bands {
                // Step below zero-width bands so the whole jump is seen.
                let lower = if b.width() == 0.0 { b.lower - f64::EPSILON * b.lower.abs().max(1.0) } else { b.lower };
                let inc = ids.at(b.upper) - ids.at(lower);
                prop_assert!((inc - 1.0 / pf).abs() < 1e-10, "increment {}", inc);
            }
        }

        #[test]
        fn continuous_across_edges(p in random_potential(12)) {
            // Edge values must match the neighbouring gap plateaus.
            let ids = ExactIds::new(p.clone()).unwrap();
            let pf = p.period() as f64;
            for (j, b) in ids.bands().bands.iter().enumerate() {
                if b.width() > 0.0 {
                    prop_assert!((ids.at(b.lower) - j as f64 / pf).abs() < 1e-10);
                }
                prop_assert!((ids.at(b.upper) - (j + 1) as f64 / pf).abs() < 1e-10);
            }
        }

        #[test]
        fn shift_covariance(p in random_potential(10), c in -2.0..2.0f64) {
            let g = EnergyGrid::uniform(-6.0, 6.0, 61);
            let a = sample_curve(&p, &g).unwrap();
            let shifted = EnergyGrid::Explicit { energies: g.energies().iter().map(|e| e + c).collect() };
            let b = sample_curve(&p.shifted(c).unwrap(), &shifted).unwrap();
            for (x, y) in a.samples.iter().zip(&b.samples) {
                prop_assert!((x.1 - y.1).abs() < 1e-9);
            }
            a.check().unwrap();
        }

        #[test]
        fn trace_positivity_on_grid(
            v in prop::collection::vec(-1.5..1.5f64, 1..=6),
            w in prop::collection::vec(-1.5..1.5f64, 1..=6),
        ) {
            let v = PeriodicPotential::new(v).unwrap();
            let w = PeriodicPotential::new(w).unwrap();
            let d = v.sup_distance(&w);
            let kv = ExactIds::new(v).unwrap();
            let kw = ExactIds::new(w).unwrap();
            for i in 0..=200 {
                let e = -4.0 + 0.04 * i as f64;
                prop_assert!(kw.at(e - d) <= kv.at(e) + 1e-10);
                prop_assert!(kv.at(e) <= kw.at(e + d) + 1e-10);
            }
        }
    }
}
