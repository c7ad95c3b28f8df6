//! Stagewise construction of periodic approximants `V_1, V_2, …` whose
//! spectra become thin fast enough relative to their periods.
//!
//! Stage `j` starts from `V_{j-1}` (period `p_{j-1}`) and must produce a
//! `p_j`-periodic `V_j` with `p_{j-1} | p_j`,
//!
//! * `log(1/ε_j) ≥ p_{j-1} · p_j · φ(2ε_j)` where `ε_j = |σ(Δ + V_j)|`, and
//! * `‖V_j - V_{j-1}‖ ≤ min(ε, ε_1, …, ε_{j-1}) / 2^j`.
//!
//! There is no constructive recipe for the refinement step, so candidates
//! are enumerated (`V_{j-1}` tiled `m = 2, 4, 8, …` times plus a seeded
//! uniform perturbation of half the allowed step) and each one is accepted
//! only after its band structure has been computed and the inequality
//! checked. Records can be re-verified from the stored potentials alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{band_edges, spectrum_measure, BandStructure};
use crate::error::{Error, Result};
use crate::ids::{ids_finite_count, window, ExactIds};
use crate::transfer::{thinness_diagnostic, FiniteFamily, PeriodicPotential};

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

/// The modulus `φ` to be beaten. `scale` multiplies the whole function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhiFunction {
    /// `scale · x^alpha`
    Power {
        alpha: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    /// `scale · (log log(e^e + 1/x))^(-beta)`
    Loglog {
        beta: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
}

impl PhiFunction {
    pub fn power(alpha: f64) -> Self {
        PhiFunction::Power { alpha, scale: 1.0 }
    }

    pub fn loglog(beta: f64) -> Self {
        PhiFunction::Loglog { beta, scale: 1.0 }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            PhiFunction::Power { scale, .. } | PhiFunction::Loglog { scale, .. } => scale,
        }
    }

    pub fn rescaled(&self, c: f64) -> Self {
        match *self {
            PhiFunction::Power { alpha, scale } => PhiFunction::Power { alpha, scale: scale * c },
            PhiFunction::Loglog { beta, scale } => PhiFunction::Loglog { beta, scale: scale * c },
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PhiFunction::Power { alpha, scale } => scale * x.powf(alpha),
            PhiFunction::Loglog { beta, scale } => {
                let inner = (std::f64::consts::E.exp() + 1.0 / x).ln().ln();
                scale * inner.powf(-beta)
            }
        }
    }

    /// Parameters positive; `φ` finite, positive and increasing on a
    /// 1000-point logarithmic grid over `[1e-300, 1e6]`.
    pub fn validate(&self) -> Result<()> {
        let (param, scale) = match *self {
            PhiFunction::Power { alpha, scale } => (alpha, scale),
            PhiFunction::Loglog { beta, scale } => (beta, scale),
        };
        if !(param > 0.0 && param.is_finite()) {
            return Err(Error::InvalidInput(format!("phi parameter must be positive, got {param}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!("phi scale must be positive, got {scale}")));
        }
        let mut last = 0.0;
        for i in 0..1000 {
            let x = 10f64.powf(-300.0 + 306.0 * i as f64 / 999.0);
            let y = self.eval(x);
            if !(y.is_finite() && y > 0.0 && y >= last) {
                return Err(Error::InvalidInput(format!("phi is not positive and increasing near x = {x:e}")));
            }
            last = y;
        }
        Ok(())
    }
}

/// `ψ(x) = p_{j-1} · φ(2x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psi {
    pub prev_period: usize,
    pub phi: PhiFunction,
}

impl Psi {
    pub fn eval(&self, x: f64) -> f64 {
        self.prev_period as f64 * self.phi.eval(2.0 * x)
    }
}

fn default_attempts() -> usize {
    8
}

fn default_n_validate() -> usize {
    20_000
}

fn default_grid_points() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    /// Sup-norm ceiling for every `V_j`.
    pub c0: f64,
    /// Initial step budget `ε`.
    pub eps: f64,
    pub stages: usize,
    pub period_cap: usize,
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub candidate_attempts: usize,
    /// Window length for the finite-volume cross-check of accepted stages.
    #[serde(default = "default_n_validate")]
    pub n_validate: usize,
    /// Points of the uniform grid used by the thinness diagnostic.
    #[serde(default = "default_grid_points")]
    pub diagnostic_grid_points: usize,
}

impl ConstructionConfig {
    pub fn validate(&self, v0: &PeriodicPotential) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return bad(format!("c0 must be positive, got {}", self.c0));
        }
        if !(self.eps > 0.0 && self.eps < self.c0) {
            return bad(format!("eps must lie in (0, c0), got {}", self.eps));
        }
        if self.period_cap == 0 || self.candidate_attempts == 0 || self.n_validate == 0 {
            return bad("period_cap, candidate_attempts and n_validate must be positive".into());
        }
        if self.diagnostic_grid_points < 2 {
            return bad("diagnostic_grid_points must be at least 2".into());
        }
        if v0.supnorm() > self.c0 - self.eps {
            return bad(format!(
                "seed potential has sup-norm {} above c0 - eps = {}",
                v0.supnorm(),
                self.c0 - self.eps
            ));
        }
        if v0.period() > self.period_cap {
            return bad(format!("seed period {} exceeds period_cap {}", v0.period(), self.period_cap));
        }
        Ok(())
    }
}

/// Measured spectral data of a candidate together with both sides of
/// `log(1/|σ|) ≥ p · ψ(|σ|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub measure: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub thin_band: bool,
}

impl Certificate {
    /// A zero measured measure means every band fell below resolution; it
    /// certifies nothing.
    pub fn holds(&self) -> bool {
        self.measure > 0.0 && self.lhs.is_finite() && self.lhs >= self.rhs
    }

    /// `rhs - lhs`; positive when the inequality fails.
    pub fn gap(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn certificate_from_bands(period: usize, bs: &BandStructure, psi: &Psi) -> Certificate {
    let measure = spectrum_measure(bs);
    Certificate { measure, lhs: -measure.ln(), rhs: period as f64 * psi.eval(measure), thin_band: bs.has_thin_band() }
}

/// Computes the band structure of `pot` and evaluates the certificate on it.
pub fn certify(pot: &PeriodicPotential, psi: &Psi) -> Result<Certificate> {
    let bs = band_edges(pot)?;
    Ok(certificate_from_bands(pot.period(), &bs, psi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub potential: PeriodicPotential,
    pub multiplier: usize,
    pub seed_used: Option<u64>,
    pub certificate: Certificate,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub candidate: Candidate,
    /// Candidates evaluated, including the accepted one; 0 when the input
    /// already satisfied the inequality.
    pub attempts: usize,
}

/// Seeded perturbation of `f` tiled `m` times, entries uniform in
/// `[-amplitude, amplitude]`. Stream `stage` keeps stages independent.
pub fn perturbed_candidate(
    f: &PeriodicPotential,
    m: usize,
    amplitude: f64,
    seed: u64,
    stage: usize,
) -> Result<PeriodicPotential> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    let tiled = f.tile(m);
    let values = tiled.values().iter().map(|v| v + amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect();
    PeriodicPotential::new(values)
}

/// One refinement step: returns `f` itself if it already satisfies the
/// inequality, otherwise the verified candidate with the lowest
/// `(m, attempt)` index.
pub fn refine_once(
    f: &PeriodicPotential,
    eps_budget: f64,
    psi: &Psi,
    cfg: &ConstructionConfig,
    stage: usize,
) -> Result<Refinement> {
    if !(eps_budget > 0.0) {
        return Err(Error::InvalidInput(format!("step budget must be positive, got {eps_budget}")));
    }
    if f.supnorm() + eps_budget > cfg.c0 {
        return Err(Error::InvalidInput(format!(
            "sup-norm {} plus budget {eps_budget} exceeds c0 = {}",
            f.supnorm(),
            cfg.c0
        )));
    }
    let own = certify(f, psi)?;
    if own.holds() {
        return Ok(Refinement {
            candidate: Candidate { potential: f.clone(), multiplier: 1, seed_used: None, certificate: own, step: 0.0 },
            attempts: 0,
        });
    }
    let amplitude = eps_budget / 2.0;
    let mut best: Option<Candidate> = None;
    let mut tried = 0;
    let mut m = 2;
    while f.period() * m <= cfg.period_cap {
        let level = tried as u64;
        let results: Vec<Result<Candidate>> = (0..cfg.candidate_attempts)
            .into_par_iter()
            .map(|attempt| {
                let seed = cfg.seed.wrapping_add(level + attempt as u64);
                let potential = perturbed_candidate(f, m, amplitude, seed, stage)?;
                let certificate = certify(&potential, psi)?;
                let step = potential.sup_distance(f);
                Ok(Candidate { potential, multiplier: m, seed_used: Some(seed), certificate, step })
            })
            .collect();
        for (attempt, r) in results.into_iter().enumerate() {
            let c = r?;
            if c.certificate.holds() {
                return Ok(Refinement { candidate: c, attempts: tried + attempt + 1 });
            }
            if best.as_ref().is_none_or(|b| c.certificate.gap() < b.certificate.gap()) {
                best = Some(c);
            }
        }
        tried += cfg.candidate_attempts;
        m *= 2;
    }
    // With no room to tile, the input itself is the best on offer.
    let best =
        best.unwrap_or(Candidate { potential: f.clone(), multiplier: 1, seed_used: None, certificate: own, step: 0.0 });
    Err(Error::ConstructionBudgetExceeded { stage, best: Box::new(best) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub j: usize,
    pub potential: PeriodicPotential,
    pub period: usize,
    pub prev_period: usize,
    /// `ε_j = |σ(Δ + V_j)|`.
    pub eps_j: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub budget: f64,
    pub actual_step: f64,
    pub supnorm: f64,
    pub multiplier: usize,
    pub seed_used: Option<u64>,
    pub attempts: usize,
    pub thin_band: bool,
    /// Thinness predicted from `{V_{j-1}}` at period `p_j` (diagnostic).
    pub predicted_measure: f64,
    /// Largest deviation of the finite-volume IDS from the exact one over
    /// band and gap midpoints.
    pub finite_volume_error: f64,
    pub warnings: Vec<String>,
}

/// `min(ε, ε_1, …, ε_{j-1}) / 2^j` given the recorded measures of stages
/// `1..j`.
pub fn stage_budget(eps: f64, previous: &[StageRecord]) -> f64 {
    let j = previous.len() + 1;
    let m = previous.iter().fold(eps, |m, r| m.min(r.eps_j));
    m / 2f64.powi(j as i32)
}

fn finite_volume_error(pot: &PeriodicPotential, bs: &BandStructure, n: usize) -> f64 {
    let ids = match ExactIds::from_parts(pot.clone(), bs.clone()) {
        Ok(ids) => ids,
        Err(_) => return f64::NAN,
    };
    let w = window(pot, n);
    let mut probes: Vec<f64> = bs.bands.iter().map(|b| 0.5 * (b.lower + b.upper)).collect();
    probes.extend(bs.bands.windows(2).map(|b| 0.5 * (b[0].upper + b[1].lower)));
    let stride = (probes.len() / 64).max(1);
    probes
        .par_iter()
        .step_by(stride)
        .map(|&e| (ids_finite_count(&w, e).unwrap_or(f64::NAN) - ids.at(e)).abs())
        .reduce(|| 0.0, f64::max)
}

/// Everything a run produced: the accepted stages, and the error that ended
/// it early if any.
#[derive(Debug)]
pub struct ConstructionOutcome {
    pub records: Vec<StageRecord>,
    pub failure: Option<Error>,
}

pub fn run_construction(
    v0: &PeriodicPotential,
    phi: &PhiFunction,
    cfg: &ConstructionConfig,
) -> Result<ConstructionOutcome> {
    phi.validate()?;
    cfg.validate(v0)?;
    let mut records: Vec<StageRecord> = Vec::with_capacity(cfg.stages);
    let mut current = v0.clone();
    for j in 1..=cfg.stages {
        let budget = stage_budget(cfg.eps, &records);
        let psi = Psi { prev_period: current.period(), phi: *phi };
        let refinement = match refine_once(&current, budget, &psi, cfg, j) {
            Ok(r) => r,
            Err(e) => return Ok(ConstructionOutcome { records, failure: Some(e) }),
        };
        let c = refinement.candidate;
        let bs = band_edges(&c.potential)?;
        let reach = 2.0 + current.supnorm() + 0.1;
        let grid: Vec<f64> = crate::grid::EnergyGrid::uniform(-reach, reach, cfg.diagnostic_grid_points).energies();
        let family = FiniteFamily::new(vec![current.clone()])?;
        let predicted = thinness_diagnostic(&family, &grid, c.potential.period())?.predicted_measure;
        let fv_error = finite_volume_error(&c.potential, &bs, cfg.n_validate);
        let mut warnings = Vec::new();
        if c.certificate.thin_band {
            warnings.push(format!("thin band: a band of V_{j} is narrower than 1e-12"));
        }
        let fv_tol = 4.0 * (c.potential.period() + 1) as f64 / cfg.n_validate as f64;
        if !(fv_error <= fv_tol) {
            warnings.push(format!("finite-volume IDS deviates by {fv_error:e} (tolerance {fv_tol:e})"));
        }
        let prev_period = current.period();
        current = c.potential.clone();
        records.push(StageRecord {
            j,
            period: c.potential.period(),
            prev_period,
            eps_j: c.certificate.measure,
            lhs: c.certificate.lhs,
            rhs: c.certificate.rhs,
            budget,
            actual_step: c.step,
            supnorm: c.potential.supnorm(),
            multiplier: c.multiplier,
            seed_used: c.seed_used,
            attempts: refinement.attempts,
            thin_band: c.certificate.thin_band,
            predicted_measure: predicted,
            finite_volume_error: fv_error,
            warnings,
            potential: c.potential,
        });
    }
    Ok(ConstructionOutcome { records, failure: None })
}

/// All `J` stages or the first error, annotated with its stage.
pub fn build_sequence(v0: &PeriodicPotential, phi: &PhiFunction, cfg: &ConstructionConfig) -> Result<Vec<StageRecord>> {
    let out = run_construction(v0, phi, cfg)?;
    match out.failure {
        None => Ok(out.records),
        Some(e) => Err(e),
    }
}

/// Re-derives every stage invariant from the stored potentials alone:
/// band structure, measure, both sides of the inequality, budgets, steps,
/// divisibility and the sup-norm ceiling.
pub fn verify_records(
    v0: &PeriodicPotential,
    phi: &PhiFunction,
    cfg: &ConstructionConfig,
    records: &[StageRecord],
) -> Result<()> {
    let fail = |m: String| Err(Error::InvariantViolation(m));
    let mut prev = v0.clone();
    for (i, r) in records.iter().enumerate() {
        let j = i + 1;
        if r.j != j {
            return fail(format!("record {i} is labelled stage {}", r.j));
        }
        let p = r.potential.period();
        if p != r.period || p % prev.period() != 0 || r.prev_period != prev.period() {
            return fail(format!("stage {j}: period {p} is not a multiple of {}", prev.period()));
        }
        let psi = Psi { prev_period: prev.period(), phi: *phi };
        let cert = certify(&r.potential, &psi)?;
        if !cert.holds() {
            return fail(format!("stage {j}: log(1/eps) = {} < {} recomputed", cert.lhs, cert.rhs));
        }
        if cert.measure != r.eps_j {
            return fail(format!("stage {j}: recorded measure {} but recomputed {}", r.eps_j, cert.measure));
        }
        let budget = stage_budget(cfg.eps, &records[..i]);
        if budget != r.budget {
            return fail(format!("stage {j}: recorded budget {} but expected {budget}", r.budget));
        }
        let step = r.potential.sup_distance(&prev);
        if step > budget {
            return fail(format!("stage {j}: step {step} exceeds budget {budget}"));
        }
        if r.potential.supnorm() > cfg.c0 {
            return fail(format!("stage {j}: sup-norm {} exceeds c0", r.potential.supnorm()));
        }
        prev = r.potential.clone();
    }
    Ok(())
}

/// `Σ_{i>j} budget_i`, checked against `ε_j · 2^{-j}` with `ε_0 = ε`.
pub fn limit_proximity_bound(records: &[StageRecord], j: usize, eps: f64) -> Result<f64> {
    if j > records.len() {
        return Err(Error::InvalidInput(format!("stage {j} requested but only {} recorded", records.len())));
    }
    let tail: f64 = records[j..].iter().map(|r| r.budget).sum();
    let eps_j = if j == 0 { eps } else { records[j - 1].eps_j };
    let bound = eps_j * 2f64.powi(-(j as i32));
    if tail > bound * (1.0 + 1e-12) {
        return Err(Error::InvariantViolation(format!("budgets after stage {j} sum to {tail}, above {bound}")));
    }
    Ok(tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ConstructionConfig {
        ConstructionConfig {
            c0: 3.0,
            eps: 0.5,
            stages: 2,
            period_cap: 1024,
            seed: 1,
            candidate_attempts: 4,
            n_validate: 4000,
            diagnostic_grid_points: 101,
        }
    }

    #[test]
    fn phi_shapes() {
        let p = PhiFunction::power(0.25);
        assert!((p.eval(16.0) - 2.0).abs() < 1e-15);
        p.validate().unwrap();
        let l = PhiFunction::loglog(2.0);
        l.validate().unwrap();
        assert!(l.eval(1e-300) < l.eval(1e-3));
        assert!(PhiFunction::power(0.0).validate().is_err());
        assert!(PhiFunction::power(1.0).rescaled(-1.0).validate().is_err());
        assert_eq!(PhiFunction::power(0.5).rescaled(3.0).eval(4.0), 6.0);
    }

    #[test]
    fn phi_json_forms() {
        let p: PhiFunction = serde_json::from_str(r#"{"kind":"power","alpha":0.25}"#).unwrap();
        assert_eq!(p, PhiFunction::power(0.25));
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"kind":"power","alpha":0.25}"#);
        let l: PhiFunction = serde_json::from_str(r#"{"kind":"loglog","beta":1.5,"scale":2}"#).unwrap();
        assert_eq!(l, PhiFunction::Loglog { beta: 1.5, scale: 2.0 });
    }

    #[test]
    fn config_rejects_oversized_seed() {
        let v0 = PeriodicPotential::new(vec![2.7]).unwrap();
        assert!(cfg().validate(&v0).is_err());
        assert!(cfg().validate(&PeriodicPotential::free()).is_ok());
        let mut c = cfg();
        c.eps = 3.0;
        assert!(c.validate(&PeriodicPotential::free()).is_err());
    }

    #[test]
    fn already_certified_input_is_returned_unchanged() {
        // Strong coupling: five narrow bands, and a tiny ψ.
        let f = PeriodicPotential::new(vec![-8.0, -4.0, 0.0, 4.0, 8.0]).unwrap();
        let psi = Psi { prev_period: 1, phi: PhiFunction::power(0.25).rescaled(1e-3) };
        let mut c = cfg();
        c.c0 = 20.0;
        let r = refine_once(&f, 0.1, &psi, &c, 1).unwrap();
        assert_eq!(r.candidate.multiplier, 1);
        assert_eq!(r.candidate.potential, f);
        assert_eq!(r.attempts, 0);
        assert_eq!(r.candidate.step, 0.0);
        assert_eq!(r.candidate.certificate, certify(&f, &psi).unwrap());
    }

    #[test]
    fn tiny_cap_exhausts_budget() {
        let psi = Psi { prev_period: 1, phi: PhiFunction::power(0.25) };
        let mut c = cfg();
        c.period_cap = 2;
        match refine_once(&PeriodicPotential::free(), 0.5, &psi, &c, 1) {
            Err(Error::ConstructionBudgetExceeded { stage, best }) => {
                assert_eq!(stage, 1);
                assert!(best.certificate.gap() > 0.0);
                assert!(best.potential.period() <= 2);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn refine_rejects_bad_budget() {
        let psi = Psi { prev_period: 1, phi: PhiFunction::power(0.25) };
        assert!(refine_once(&PeriodicPotential::free(), 0.0, &psi, &cfg(), 1).is_err());
        assert!(refine_once(&PeriodicPotential::free(), 5.0, &psi, &cfg(), 1).is_err());
    }

    #[test]
    fn perturbation_is_seeded_and_bounded() {
        let f = PeriodicPotential::new(vec![0.5, -0.5]).unwrap();
        let a = perturbed_candidate(&f, 4, 0.125, 7, 1).unwrap();
        let b = perturbed_candidate(&f, 4, 0.125, 7, 1).unwrap();
        let c = perturbed_candidate(&f, 4, 0.125, 7, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.period(), 8);
        assert!(a.sup_distance(&f) <= 0.125);
    }

    #[test]
    fn zero_stages_is_empty() {
        let mut c = cfg();
        c.stages = 0;
        let r = build_sequence(&PeriodicPotential::free(), &PhiFunction::power(0.25), &c).unwrap();
        assert!(r.is_empty());
        assert_eq!(limit_proximity_bound(&r, 0, c.eps).unwrap(), 0.0);
    }

    #[test]
    fn first_budget_uses_eps() {
        assert_eq!(stage_budget(0.5, &[]), 0.25);
    }
}
