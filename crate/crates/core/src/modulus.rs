//! Modulus of continuity of the IDS along a constructed sequence.
//!
//! From below: for every stage `j` and every `E0` in the spectrum of the
//! last approximant `V_J`, a partner `E_j` within a few `ε_j` of `E0` whose
//! IDS differs by at least `1/(2p_j)`. The stage ratios
//! `R_j = log(1/(2ε_j)) / (2 p_j φ(2ε_j))` are the finite-stage surrogate
//! for the blow-up of `|Δk| log|ΔE|⁻¹ / φ(|ΔE|)`.
//!
//! From above: the largest `|Δk| · log|ΔE|⁻¹` over sampled pairs with
//! `|ΔE| ∈ [1e-8, 1/2]`, an empirical lower estimate of the log-Hölder
//! constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{band_edges, distance_to_spectrum, Band, BandStructure};
use crate::construct::{PhiFunction, StageRecord};
use crate::error::{ensure_finite, Error, Result};
use crate::ids::{ExactIds, IdsCurve};
use crate::transfer::PeriodicPotential;

/// Smallest and largest `|ΔE|` considered by the log-Hölder scan.
pub const SCAN_MIN: f64 = 1e-8;
pub const SCAN_MAX: f64 = 0.5;

/// Slack on the `1/(2p_j)` and `1/p_j` IDS bounds.
const IDS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    pub j: usize,
    pub e0: f64,
    /// Nearest point of `σ(Δ + V_j)` to `e0`.
    pub e1: f64,
    /// Band of `V_j` containing `e1`.
    pub band: Band,
    pub ej: f64,
    pub delta_k: f64,
    /// `k(E+ + ε_j) - k(E- - ε_j)`, at least `1/p_j`.
    pub band_increment: f64,
    /// `|Δk| · log|E0 - Ej|⁻¹ / φ(|E0 - Ej|)`.
    pub ratio: f64,
}

/// Everything about stage `j` a witness needs: its period, measure and
/// band structure.
#[derive(Debug, Clone)]
pub struct StageBands {
    pub j: usize,
    pub period: usize,
    pub eps_j: f64,
    pub bands: BandStructure,
}

impl StageBands {
    pub fn from_record(r: &StageRecord) -> Result<Self> {
        Ok(StageBands { j: r.j, period: r.period, eps_j: r.eps_j, bands: band_edges(&r.potential)? })
    }
}

/// The witness of the lower bound at `e0` for stage `j`, with `k_eval`
/// the exact IDS of the last approximant.
pub fn witness_for_energy(stage: &StageBands, e0: f64, k_eval: &ExactIds, phi: &PhiFunction) -> Result<WitnessPair> {
    ensure_finite("probe energy", e0)?;
    let (dist, _) = distance_to_spectrum(k_eval.bands(), e0);
    if dist > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "probe energy {e0} is {dist:e} away from the spectrum of the last stage"
        )));
    }
    let eps = stage.eps_j;
    let (_, e1) = distance_to_spectrum(&stage.bands, e0);
    let band = stage
        .bands
        .band_containing(e1)
        .map(|i| stage.bands.bands[i])
        .ok_or_else(|| Error::InvariantViolation(format!("no band of V_{} contains {e1}", stage.j)))?;
    let below = band.lower - eps;
    let above = band.upper + eps;
    let pj = stage.period as f64;
    let increment = k_eval.at(above) - k_eval.at(below);
    if increment < 1.0 / pj - IDS_SLACK {
        return Err(Error::InvariantViolation(format!(
            "stage {}: IDS gains only {increment} across [{below}, {above}], below 1/{}",
            stage.j, stage.period
        )));
    }
    let k0 = k_eval.at(e0);
    let dk_below = (k0 - k_eval.at(below)).abs();
    let dk_above = (k_eval.at(above) - k0).abs();
    let (ej, delta_k) = if dk_above > dk_below { (above, dk_above) } else { (below, dk_below) };
    let de: f64 = (e0 - ej).abs();
    Ok(WitnessPair {
        j: stage.j,
        e0,
        e1,
        band,
        ej,
        delta_k,
        band_increment: increment,
        ratio: delta_k * (1.0 / de).ln() / phi.eval(de),
    })
}

/// Probe energies in `σ(Δ + V_J)`: band edges and midpoints spread over
/// the bands, then seeded uniform points inside them.
pub fn probe_energies(bs: &BandStructure, count: usize, seed: u64) -> Vec<f64> {
    let nb = bs.bands.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let b = bs.bands[(k * nb) / count.max(1)];
            match k % 4 {
                0 => b.lower,
                1 => 0.5 * (b.lower + b.upper),
                2 => b.upper,
                _ => b.lower + b.width() * rng.gen::<f64>(),
            }
        })
        .collect()
}

/// Witnesses for every stage at `count` probes of the last stage's spectrum.
pub fn witness_suite(records: &[StageRecord], phi: &PhiFunction, count: usize, seed: u64) -> Result<Vec<WitnessPair>> {
    let last = records.last().ok_or_else(|| Error::InvalidInput("no stages to extract witnesses from".into()))?;
    let k_eval = ExactIds::new(last.potential.clone())?;
    let probes = probe_energies(k_eval.bands(), count, seed);
    let mut out = Vec::with_capacity(records.len() * count);
    for r in records {
        let stage = StageBands::from_record(r)?;
        let pairs: Result<Vec<WitnessPair>> =
            probes.par_iter().map(|&e0| witness_for_energy(&stage, e0, &k_eval, phi)).collect();
        out.extend(pairs?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRatio {
    pub j: usize,
    pub ratio: f64,
    /// `p_{j-1}/2 - log 2 / (2 p_j φ(2ε_j))`.
    pub lower_bound: f64,
    pub bound_holds: bool,
}

/// `R_j` for every record, with the lower bound implied by the stage
/// inequality.
pub fn ratio_curve(records: &[StageRecord], phi: &PhiFunction) -> Vec<StageRatio> {
    records
        .iter()
        .map(|r| {
            let p = r.period as f64;
            let f = phi.eval(2.0 * r.eps_j);
            let ratio = (1.0 / (2.0 * r.eps_j)).ln() / (2.0 * p * f);
            let lower_bound = r.prev_period as f64 / 2.0 - std::f64::consts::LN_2 / (2.0 * p * f);
            // Equality is the boundary case; allow the rounding of the two
            // expressions.
            let bound_holds = ratio >= lower_bound - 1e-12 * lower_bound.abs().max(1.0);
            StageRatio { j: r.j, ratio, lower_bound, bound_holds }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraigSimonFit {
    /// `max |Δk| · log|ΔE|⁻¹` over the sampled pairs.
    pub c_fit: f64,
    /// `(E, k(E))` of the attaining pair, lower energy first.
    pub pair: [(f64, f64); 2],
    pub samples: usize,
}

/// Pair scan over an IDS curve.
pub fn craig_simon_scan(curve: &IdsCurve) -> Result<CraigSimonFit> {
    let s = &curve.samples;
    if s.len() < 2 || s.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidInput("IDS curve needs at least two increasing energies".into()));
    }
    // For each left end, sweep right while the best possible remaining
    // product, bounded by the IDS gain up to SCAN_MAX, can still win.
    let per_left: Vec<Option<(f64, usize, usize)>> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            let (e, k) = s[i];
            let start = s.partition_point(|x| x.0 - e < SCAN_MIN);
            let end = s.partition_point(|x| x.0 - e <= SCAN_MAX);
            if start >= end {
                return None;
            }
            let k_end = s[end - 1].1;
            let mut best: Option<(f64, usize, usize)> = None;
            for (jj, &(e2, k2)) in s.iter().enumerate().take(end).skip(start) {
                let log = (1.0 / (e2 - e)).ln();
                if let Some((b, _, _)) = best {
                    if (k_end - k) * log <= b {
                        break;
                    }
                }
                let v = (k2 - k).abs() * log;
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, i, jj));
                }
            }
            best
        })
        .collect();
    let (c_fit, i, j) = per_left
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(f64, usize, usize)>, x| match acc {
            Some(a) if a.0 >= x.0 => Some(a),
            _ => Some(x),
        })
        .ok_or_else(|| Error::InvalidInput(format!("no sample pair with spacing in [{SCAN_MIN}, {SCAN_MAX}]")))?;
    Ok(CraigSimonFit { c_fit, pair: [s[i], s[j]], samples: s.len() })
}

/// Energies for the log-Hölder scan: `base_points` uniform points over the
/// spectrum padded by `SCAN_MAX`, plus offsets `SCAN_MIN · ratio^k` (up to
/// `SCAN_MAX`) on both sides of every band edge.
pub fn scan_energies(bs: &BandStructure, base_points: usize, ratio: f64) -> Result<Vec<f64>> {
    if base_points < 2 || !(ratio > 1.0) {
        return Err(Error::InvalidInput("scan grid needs two points and an offset ratio above 1".into()));
    }
    let (lo, hi) = match (bs.bands.first(), bs.bands.last()) {
        (Some(a), Some(b)) => (a.lower - SCAN_MAX, b.upper + SCAN_MAX),
        _ => return Err(Error::InvalidInput("empty band structure".into())),
    };
    let mut out: Vec<f64> = crate::grid::EnergyGrid::uniform(lo, hi, base_points).energies();
    let mut offsets = Vec::new();
    let mut d = SCAN_MIN;
    while d <= SCAN_MAX {
        offsets.push(d);
        d *= ratio;
    }
    for e in bs.edges() {
        out.push(e);
        for &d in &offsets {
            out.push(e - d);
            out.push(e + d);
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Scan on the base grid and on one 2× refinement of it (twice the
/// uniform points, square-rooted offset ratio).
pub fn craig_simon_pair(
    pot: &PeriodicPotential,
    base_points: usize,
    ratio: f64,
) -> Result<(CraigSimonFit, CraigSimonFit)> {
    let ids = ExactIds::new(pot.clone())?;
    let curve_on = |energies: Vec<f64>| IdsCurve {
        potential: pot.clone(),
        bands: ids.bands().clone(),
        samples: energies.into_par_iter().map(|e| (e, ids.at(e))).collect(),
    };
    let base = craig_simon_scan(&curve_on(scan_energies(ids.bands(), base_points, ratio)?))?;
    let fine = craig_simon_scan(&curve_on(scan_energies(ids.bands(), 2 * base_points - 1, ratio.sqrt())?))?;
    Ok((base, fine))
}

/// `k_W(E - d) ≤ k_V(E) ≤ k_W(E + d)` with `d = ‖V - W‖∞`, within 1e-10,
/// at every grid energy.
pub fn trace_positivity_check(v: &PeriodicPotential, w: &PeriodicPotential, grid: &[f64]) -> Result<bool> {
    let d = v.sup_distance(w);
    let kv = ExactIds::new(v.clone())?;
    let kw = ExactIds::new(w.clone())?;
    Ok(grid.par_iter().all(|&e| kw.at(e - d) <= kv.at(e) + 1e-10 && kv.at(e) <= kw.at(e + d) + 1e-10))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub base_points: usize,
    pub offset_ratio: f64,
    pub min_spacing: f64,
    pub max_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub ratios: Vec<StageRatio>,
    pub craig_simon: CraigSimonFit,
    pub craig_simon_refined: CraigSimonFit,
    /// `|C_refined - C| / C`.
    pub craig_simon_drift: f64,
    pub probes_per_stage: usize,
    pub seed: u64,
    pub grid: ScanGrid,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusOptions {
    pub probes_per_stage: usize,
    pub seed: u64,
    pub base_points: usize,
    pub offset_ratio: f64,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        ModulusOptions { probes_per_stage: 10, seed: 0, base_points: 2001, offset_ratio: 4.0 }
    }
}

/// Witnesses, ratios and the log-Hölder scan of the last stage.
pub fn modulus_report(
    records: &[StageRecord],
    phi: &PhiFunction,
    opts: ModulusOptions,
) -> Result<(ModulusReport, Vec<WitnessPair>)> {
    let last = records.last().ok_or_else(|| Error::InvalidInput("modulus report needs at least one stage".into()))?;
    let witnesses = witness_suite(records, phi, opts.probes_per_stage, opts.seed)?;
    let ratios = ratio_curve(records, phi);
    let mut warnings = Vec::new();
    for r in &ratios {
        if !r.bound_holds {
            warnings.push(format!("stage {}: R = {} below its lower bound {}", r.j, r.ratio, r.lower_bound));
        }
    }
    for w in ratios.windows(2) {
        if w[1].ratio <= w[0].ratio {
            warnings.push(format!("R_{} = {} does not exceed R_{} = {}", w[1].j, w[1].ratio, w[0].j, w[0].ratio));
        }
    }
    for w in &witnesses {
        let bound = 2.0 * records[w.j - 1].eps_j;
        if (w.e0 - w.ej).abs() > bound {
            warnings.push(format!(
                "stage {}: witness at E0 = {} lies {} away, more than 2 eps_j",
                w.j,
                w.e0,
                (w.e0 - w.ej).abs()
            ));
        }
    }
    if records.len() > 1 {
        warnings.push(format!(
            "witness IDS evaluated with V_{} in place of the limit; valid for stages below {}",
            last.j, last.j
        ));
    }
    let (base, fine) = craig_simon_pair(&last.potential, opts.base_points, opts.offset_ratio)?;
    let drift = if base.c_fit > 0.0 { (fine.c_fit - base.c_fit).abs() / base.c_fit } else { 0.0 };
    let report = ModulusReport {
        ratios,
        craig_simon: base,
        craig_simon_refined: fine,
        craig_simon_drift: drift,
        probes_per_stage: opts.probes_per_stage,
        seed: opts.seed,
        grid: ScanGrid {
            base_points: opts.base_points,
            offset_ratio: opts.offset_ratio,
            min_spacing: SCAN_MIN,
            max_spacing: SCAN_MAX,
        },
        warnings,
    };
    Ok((report, witnesses))
}
