//! NI, SNI, PR and SPR classification by frequency sweep, LMI certificate and
//! invariant zeros, plus the augmented-LMI sufficient conditions for SNI.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{dim_err, param_err, Error, Result};
use crate::lmi::{self, AffineExpr, LmiCertificate, LmiProblem, SolverOptions, Strictness, VarId};
use crate::lti::StateSpace;
use crate::numerics::{self, block_diag, fm, CMat, Mat};
use crate::zeros;

/// NI sweep accepts `lambda_min(H) >= -NI_TOL * (1 + |P(jw)|)`.
pub const NI_TOL: f64 = 1e-8;
/// SNI sweep requires `lambda_min(H) > SNI_STRICT_TOL * |P(jw)|` for `w > 0`.
pub const SNI_STRICT_TOL: f64 = 1e-10;
/// Eigenvalues and zeros with `|Re| < AXIS_TOL * (1 + |z|)` count as imaginary-axis.
pub const AXIS_TOL: f64 = 1e-7;
/// Zeros with `|z| <= ORIGIN_TOL` count as the origin.
pub const ORIGIN_TOL: f64 = 1e-8;
/// Pole-shift ladder for the SPR test.
pub const SPR_SHIFTS: [f64; 3] = [1e-6, 1e-4, 1e-2];
/// Points per decade of the default grid.
pub const DEFAULT_PPD: usize = 200;

const REFINE_MINIMA: usize = 8;
const REFINE_ITERS: usize = 60;

/// Sorted positive frequencies (rad/s), optionally with `w = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
    include_zero: bool,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>, include_zero: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(param_err("frequency grid is empty"));
        }
        if points.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(param_err("grid points must be positive and finite"));
        }
        if points.windows(2).any(|p| p[1] <= p[0]) {
            return Err(param_err("grid points must be strictly increasing"));
        }
        Ok(Self { points, include_zero })
    }

    /// `ppd` logarithmically spaced points per decade over `[w_min, w_max]`.
    pub fn logspace(w_min: f64, w_max: f64, ppd: usize, include_zero: bool) -> Result<Self> {
        if !(w_min > 0.0 && w_max >= w_min && w_max.is_finite()) || ppd == 0 {
            return Err(param_err("logspace needs 0 < w_min <= w_max and ppd > 0"));
        }
        let (lo, hi) = (fm::log10(w_min), fm::log10(w_max));
        let count = (fm::ceil((hi - lo) * ppd as f64) as usize).max(1) + 1;
        let points: Vec<f64> = if w_max == w_min {
            alloc::vec![w_min]
        } else {
            (0..count)
                .map(|i| fm::powf(10.0, lo + (hi - lo) * i as f64 / (count - 1) as f64))
                .collect()
        };
        Self::new(points, include_zero)
    }

    /// Three decades beyond the extreme nonzero pole magnitudes, 200 points per decade, plus `w = 0`.
    pub fn default_for(sys: &StateSpace) -> Result<Self> {
        let mags: Vec<f64> =
            sys.poles()?.iter().map(|p| p.norm()).filter(|m| *m > numerics::ABS_FLOOR).collect();
        let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = mags.iter().copied().fold(0.0, f64::max);
        let (lo, hi) = if mags.is_empty() { (1.0, 1.0) } else { (lo, hi) };
        Self::logspace(1e-3 * lo, 1e3 * hi, DEFAULT_PPD, true)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn include_zero(&self) -> bool {
        self.include_zero
    }

    /// All frequencies in increasing order, `0` first when included.
    pub fn all(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.points.len() + 1);
        if self.include_zero {
            v.push(0.0);
        }
        v.extend_from_slice(&self.points);
        v
    }
}

/// Why a verdict is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailReason {
    UnstablePole,
    ImaginaryAxisPole,
    NegativeMargin,
    NotStrict,
    NearPoleOnGrid,
    AsymmetricFeedthrough,
    ImaginaryAxisZero,
    LmiInfeasible,
}

/// Outcome of a frequency-sweep property check.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqVerdict {
    pub holds: bool,
    pub worst_frequency: f64,
    /// The relevant smallest eigenvalue at `worst_frequency`.
    pub worst_margin: f64,
    /// Every frequency evaluated, including refinement points, sorted.
    pub grid: Vec<f64>,
    pub reason: Option<FailReason>,
    /// Pole shift that made the SPR test pass.
    pub shift: Option<f64>,
    pub notes: Vec<String>,
}

impl FreqVerdict {
    fn failed_before_sweep(reason: FailReason) -> Self {
        Self {
            holds: false,
            worst_frequency: 0.0,
            worst_margin: f64::NEG_INFINITY,
            grid: Vec::new(),
            reason: Some(reason),
            shift: None,
            notes: Vec::new(),
        }
    }
}

/// `H(w) = j (P(jw) - P(jw)^*)`.
pub fn hermitian_imaginary_part(sys: &StateSpace, omega: f64) -> Result<CMat> {
    let p = sys.freq_response(omega)?;
    Ok(hermitian_from_response(&p))
}

fn hermitian_from_response(p: &CMat) -> CMat {
    let j = Complex64::new(0.0, 1.0);
    (p - p.adjoint()) * j
}

fn ensure_square_system(sys: &StateSpace) -> Result<()> {
    if sys.is_square() {
        Ok(())
    } else {
        Err(dim_err(format!("system must be square, got {}x{}", sys.outputs(), sys.inputs())))
    }
}

pub(crate) fn is_axis(z: Complex64) -> bool {
    fm::abs(z.re) < AXIS_TOL * (1.0 + z.norm())
}

/// Classifies the poles: `None` when all lie strictly in the open left half-plane.
pub(crate) fn pole_failure(sys: &StateSpace) -> Result<Option<FailReason>> {
    let mut reason = None;
    for p in sys.poles()? {
        if is_axis(p) {
            reason = Some(FailReason::ImaginaryAxisPole);
        } else if p.re > 0.0 {
            return Ok(Some(FailReason::UnstablePole));
        }
    }
    Ok(reason)
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    omega: f64,
    lambda: f64,
    size: f64,
}

/// Smallest eigenvalue of a Hermitian-valued frequency function and `|P(jw)|`.
fn sample_at<F>(f: &F, omega: f64) -> Result<Sample>
where
    F: Fn(f64) -> Result<(CMat, f64)>,
{
    let (h, size) = f(omega)?;
    let lambda = numerics::eig_hermitian(&h)?.first().copied().unwrap_or(f64::INFINITY);
    Ok(Sample { omega, lambda, size })
}

/// Evaluates the grid, then polishes the deepest interior minima of `score`
/// by golden-section search in `log w`.
fn sweep<F, S>(grid: &FrequencyGrid, f: &F, score: S) -> Result<Vec<Sample>>
where
    F: Fn(f64) -> Result<(CMat, f64)>,
    S: Fn(&Sample) -> f64,
{
    let mut samples = Vec::new();
    for w in grid.all() {
        samples.push(sample_at(f, w)?);
    }
    let positive: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].omega > 0.0).collect();
    let mut minima: Vec<(f64, usize)> = Vec::new();
    for k in 1..positive.len().saturating_sub(1) {
        let (a, b, c) = (positive[k - 1], positive[k], positive[k + 1]);
        let sb = score(&samples[b]);
        if sb <= score(&samples[a]) && sb <= score(&samples[c]) {
            minima.push((sb, k));
        }
    }
    minima.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut extra = Vec::new();
    for &(_, k) in minima.iter().take(REFINE_MINIMA) {
        let lo = fm::ln(samples[positive[k - 1]].omega);
        let hi = fm::ln(samples[positive[k + 1]].omega);
        extra.push(golden_section(f, &score, lo, hi)?);
    }
    samples.extend(extra);
    samples.sort_by(|x, y| x.omega.total_cmp(&y.omega));
    samples.dedup_by(|x, y| x.omega == y.omega);
    Ok(samples)
}

fn golden_section<F, S>(f: &F, score: &S, mut lo: f64, mut hi: f64) -> Result<Sample>
where
    F: Fn(f64) -> Result<(CMat, f64)>,
    S: Fn(&Sample) -> f64,
{
    let r = 0.5 * (fm::sqrt(5.0) - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut s1 = sample_at(f, fm::exp(x1))?;
    let mut s2 = sample_at(f, fm::exp(x2))?;
    for _ in 0..REFINE_ITERS {
        if score(&s1) <= score(&s2) {
            hi = x2;
            x2 = x1;
            s2 = s1;
            x1 = hi - r * (hi - lo);
            s1 = sample_at(f, fm::exp(x1))?;
        } else {
            lo = x1;
            x1 = x2;
            s1 = s2;
            x2 = lo + r * (hi - lo);
            s2 = sample_at(f, fm::exp(x2))?;
        }
    }
    Ok(if score(&s1) <= score(&s2) { s1 } else { s2 })
}

fn ni_score(s: &Sample) -> f64 {
    s.lambda / (1.0 + s.size)
}

fn sni_score(s: &Sample) -> f64 {
    if s.omega == 0.0 {
        f64::INFINITY
    } else {
        s.lambda / s.size.max(numerics::ABS_FLOOR)
    }
}

fn hermitian_sampler(sys: &StateSpace) -> impl Fn(f64) -> Result<(CMat, f64)> + '_ {
    move |w| {
        let p = sys.freq_response(w)?;
        let size = p.norm();
        Ok((hermitian_from_response(&p), size))
    }
}

/// Like [`hermitian_sampler`] but sized by the strictly proper part `|P(jw) - D|`,
/// which carries all of `H(w)`.
fn strict_sampler(sys: &StateSpace) -> impl Fn(f64) -> Result<(CMat, f64)> + '_ {
    let d = numerics::to_complex(sys.d());
    move |w| {
        let p = sys.freq_response(w)?;
        let size = (&p - &d).norm();
        Ok((hermitian_from_response(&p), size))
    }
}

fn worst_by<S: Fn(&Sample) -> f64>(samples: &[Sample], score: S) -> Sample {
    *samples
        .iter()
        .min_by(|a, b| score(a).total_cmp(&score(b)))
        .expect("grid is nonempty")
}

fn run_sweep<F, S>(grid: &FrequencyGrid, f: &F, score: S) -> Result<core::result::Result<Vec<Sample>, FreqVerdict>>
where
    F: Fn(f64) -> Result<(CMat, f64)>,
    S: Fn(&Sample) -> f64,
{
    match sweep(grid, f, score) {
        Ok(s) => Ok(Ok(s)),
        Err(Error::NearPole) => Ok(Err(FreqVerdict::failed_before_sweep(FailReason::NearPoleOnGrid))),
        Err(e) => Err(e),
    }
}

/// NI by sweep: poles in the open left half-plane and `lambda_min(H(w)) >= -tol (1 + |P|)`.
pub fn check_ni_sweep(sys: &StateSpace, grid: &FrequencyGrid, tol: f64) -> Result<FreqVerdict> {
    ensure_square_system(sys)?;
    if let Some(reason) = pole_failure(sys)? {
        return Ok(FreqVerdict::failed_before_sweep(reason));
    }
    let sampler = hermitian_sampler(sys);
    let samples = match run_sweep(grid, &sampler, ni_score)? {
        Ok(s) => s,
        Err(v) => return Ok(v),
    };
    let worst = worst_by(&samples, ni_score);
    let holds = samples.iter().all(|s| s.lambda >= -tol * (1.0 + s.size));
    Ok(FreqVerdict {
        holds,
        worst_frequency: worst.omega,
        worst_margin: worst.lambda,
        grid: samples.iter().map(|s| s.omega).collect(),
        reason: (!holds).then_some(FailReason::NegativeMargin),
        shift: None,
        notes: Vec::new(),
    })
}

/// SNI by sweep: NI plus `lambda_min(H(w)) > tol_strict |P(jw) - D|` for every grid `w > 0`.
pub fn check_sni_sweep(
    sys: &StateSpace,
    grid: &FrequencyGrid,
    tol: f64,
    tol_strict: f64,
) -> Result<FreqVerdict> {
    ensure_square_system(sys)?;
    if let Some(reason) = pole_failure(sys)? {
        return Ok(FreqVerdict::failed_before_sweep(reason));
    }
    let sampler = strict_sampler(sys);
    let samples = match run_sweep(grid, &sampler, sni_score)? {
        Ok(s) => s,
        Err(v) => return Ok(v),
    };
    let d_norm = sys.d().norm();
    let ni = samples.iter().all(|s| s.lambda >= -tol * (1.0 + s.size + d_norm));
    let strict = samples
        .iter()
        .filter(|s| s.omega > 0.0)
        .all(|s| s.lambda > tol_strict * s.size.max(numerics::ABS_FLOOR));
    let (worst, reason) = if !ni {
        (worst_by(&samples, ni_score), Some(FailReason::NegativeMargin))
    } else {
        (worst_by(&samples, sni_score), (!strict).then_some(FailReason::NotStrict))
    };
    Ok(FreqVerdict {
        holds: ni && strict,
        worst_frequency: worst.omega,
        worst_margin: worst.lambda,
        grid: samples.iter().map(|s| s.omega).collect(),
        reason,
        shift: None,
        notes: Vec::new(),
    })
}

/// PR by sweep: poles in the closed left half-plane and `lambda_min(P + P^*) >= -tol (1 + |P|)`.
pub fn check_positive_real(sys: &StateSpace, grid: &FrequencyGrid, tol: f64) -> Result<FreqVerdict> {
    ensure_square_system(sys)?;
    let mut notes = Vec::new();
    for p in sys.poles()? {
        if is_axis(p) {
            notes.push(format!("imaginary-axis pole at {:.6e}{:+.6e}j tolerated", p.re, p.im));
        } else if p.re > 0.0 {
            return Ok(FreqVerdict::failed_before_sweep(FailReason::UnstablePole));
        }
    }
    let sampler = |w: f64| -> Result<(CMat, f64)> {
        let p = sys.freq_response(w)?;
        let size = p.norm();
        Ok((&p + p.adjoint(), size))
    };
    let samples = match run_sweep(grid, &sampler, ni_score)? {
        Ok(s) => s,
        Err(v) => return Ok(FreqVerdict { notes, ..v }),
    };
    let worst = worst_by(&samples, ni_score);
    let holds = samples.iter().all(|s| s.lambda >= -tol * (1.0 + s.size));
    Ok(FreqVerdict {
        holds,
        worst_frequency: worst.omega,
        worst_margin: worst.lambda,
        grid: samples.iter().map(|s| s.omega).collect(),
        reason: (!holds).then_some(FailReason::NegativeMargin),
        shift: None,
        notes,
    })
}

/// SPR: PR of `P(s - eps)` for the first `eps` in `shifts` that succeeds.
pub fn check_strictly_positive_real(
    sys: &StateSpace,
    grid: &FrequencyGrid,
    tol: f64,
    shifts: &[f64],
) -> Result<FreqVerdict> {
    if shifts.is_empty() || shifts.iter().any(|e| !(*e > 0.0)) {
        return Err(param_err("SPR shifts must be positive"));
    }
    let mut last = None;
    for &eps in shifts {
        let shifted = sys.shifted(eps);
        if shifted.poles()?.iter().any(|p| p.re > -AXIS_TOL * (1.0 + p.norm())) {
            last = Some(FreqVerdict {
                shift: Some(eps),
                ..FreqVerdict::failed_before_sweep(FailReason::UnstablePole)
            });
            continue;
        }
        let mut v = check_positive_real(&shifted, grid, tol)?;
        v.shift = Some(eps);
        if v.holds {
            return Ok(v);
        }
        last = Some(v);
    }
    Ok(last.expect("at least one shift"))
}

/// Result of the NI-sys1 LMI test.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiVerdict {
    pub holds: bool,
    pub certificate: Option<LmiCertificate>,
    /// The `Y` of the certificate, when one was found.
    pub y: Option<Mat>,
    pub minimal: bool,
    pub reason: Option<FailReason>,
    pub notes: Vec<String>,
}

/// NI-sys1 feasibility problem: `Y > 0`, `AY + YA^T <= 0`, `B + AYC^T = 0`.
pub fn ni_lemma_problem(a: &Mat, b: &Mat, c: &Mat) -> Result<(LmiProblem, VarId)> {
    let n = a.nrows();
    let mut p = LmiProblem::new();
    let y = p.symmetric(n);
    let scale = b.norm() / (a.norm() * c.norm()).max(numerics::ABS_FLOOR);
    let margin = (1e-8 * scale).max(numerics::ABS_FLOOR);
    p.psd("Y > 0", AffineExpr::var(y), Strictness::Margin(margin));
    p.nsd(
        "AY + YA' <= 0",
        AffineExpr::term(a.clone(), y, Mat::identity(n, n))?.plus_transpose()?,
        Strictness::NonStrict,
    );
    p.equal_zero("B + AYC' = 0", AffineExpr::constant(b.clone()).plus_term(a.clone(), y, c.transpose())?);
    Ok((p, y))
}

fn symmetric_feedthrough(sys: &StateSpace) -> bool {
    numerics::is_symmetric(sys.d(), numerics::SYM_TOL) || sys.d().norm() <= numerics::ABS_FLOOR
}

fn lmi_ni(a: &Mat, b: &Mat, c: &Mat, opts: &SolverOptions) -> Result<(bool, Option<LmiCertificate>, Option<Mat>)> {
    let (problem, y) = ni_lemma_problem(a, b, c)?;
    let out = lmi::solve_feasibility(&problem, opts)?;
    Ok(match out.certificate() {
        Some(cert) => (true, Some(cert.clone()), Some(cert.value(y).clone())),
        None => (false, None, None),
    })
}

/// NI by the NI sys1. A non-minimal realization is noted, not rejected.
pub fn check_ni_lmi(sys: &StateSpace) -> Result<LmiVerdict> {
    check_ni_lmi_with(sys, &SolverOptions::default())
}

pub fn check_ni_lmi_with(sys: &StateSpace, opts: &SolverOptions) -> Result<LmiVerdict> {
    ensure_square_system(sys)?;
    let minimal = sys.is_minimal();
    let mut notes = Vec::new();
    if !minimal {
        notes.push(String::from("realization is not minimal; NI sys1 verdict is indicative only"));
    }
    let fail = |reason, notes| LmiVerdict { holds: false, certificate: None, y: None, minimal, reason: Some(reason), notes };
    if !symmetric_feedthrough(sys) {
        return Ok(fail(FailReason::AsymmetricFeedthrough, notes));
    }
    if sys.poles()?.into_iter().any(is_axis) {
        return Ok(fail(FailReason::ImaginaryAxisPole, notes));
    }
    if sys.states() == 0 {
        return Ok(LmiVerdict { holds: true, certificate: None, y: None, minimal, reason: None, notes });
    }
    let (holds, certificate, y) = lmi_ni(sys.a(), sys.b(), sys.c(), opts)?;
    Ok(LmiVerdict {
        holds,
        certificate,
        y,
        minimal,
        reason: (!holds).then_some(FailReason::LmiInfeasible),
        notes,
    })
}

/// Result of the transmission-zero SNI test.
#[derive(Debug, Clone, PartialEq)]
pub struct ZerosVerdict {
    pub holds: bool,
    /// Finite invariant zeros of `P(s) - P^T(-s)`; empty when the pencil is degenerate.
    pub zeros: Vec<Complex64>,
    /// Zeros on the imaginary axis away from the origin.
    pub axis_zeros: Vec<Complex64>,
    pub reason: Option<FailReason>,
    /// Sweep verdict used when the pencil is degenerate.
    pub fallback: Option<FreqVerdict>,
}

/// SNI by transmission zeros of `P(s) - P^T(-s)`, given a stable system with symmetric `D`.
///
/// NI itself is confirmed by a default-grid sweep. A degenerate pencil falls
/// back to the SNI sweep.
pub fn check_sni_zeros(sys: &StateSpace) -> Result<ZerosVerdict> {
    ensure_square_system(sys)?;
    let fail = |reason| ZerosVerdict { holds: false, zeros: Vec::new(), axis_zeros: Vec::new(), reason: Some(reason), fallback: None };
    if let Some(reason) = pole_failure(sys)? {
        return Ok(fail(reason));
    }
    if !symmetric_feedthrough(sys) {
        return Ok(fail(FailReason::AsymmetricFeedthrough));
    }
    let grid = FrequencyGrid::default_for(sys)?;
    let phi = sys.sub(&sys.paraconjugate_transpose())?;
    match zeros::invariant_zeros(&phi) {
        Ok(zs) => {
            let ni = check_ni_sweep(sys, &grid, NI_TOL)?;
            let axis_zeros: Vec<Complex64> =
                zs.iter().copied().filter(|z| is_axis(*z) && z.norm() > ORIGIN_TOL).collect();
            let reason = if !ni.holds {
                Some(FailReason::NegativeMargin)
            } else if !axis_zeros.is_empty() {
                Some(FailReason::ImaginaryAxisZero)
            } else {
                None
            };
            Ok(ZerosVerdict { holds: reason.is_none(), zeros: zs, axis_zeros, reason, fallback: None })
        }
        Err(Error::DegeneratePencil) => {
            let v = check_sni_sweep(sys, &grid, NI_TOL, SNI_STRICT_TOL)?;
            Ok(ZerosVerdict {
                holds: v.holds,
                zeros: Vec::new(),
                axis_zeros: Vec::new(),
                reason: v.reason,
                fallback: Some(v),
            })
        }
        Err(e) => Err(e),
    }
}

/// Augmented realization `(A~, B~, C~)` subtracting `eps / (s + alpha) I`
/// (and `eps / (s + beta) I` when `beta` is given).
pub fn sni_augmented_realization(
    sys: &StateSpace,
    alpha: f64,
    beta: Option<f64>,
    eps: f64,
) -> Result<(Mat, Mat, Mat)> {
    ensure_square_system(sys)?;
    let m = sys.inputs();
    let mut shifts = alloc::vec![alpha];
    shifts.extend(beta);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(param_err("eps must be positive"));
    }
    for &s in &shifts {
        if !(s > 0.0 && s.is_finite()) {
            return Err(param_err("alpha and beta must be positive"));
        }
    }
    if let Some(b) = beta {
        if fm::abs(alpha - b) <= 1e-12 * alpha.max(b) {
            return Err(param_err("alpha and beta must differ"));
        }
    }
    for p in sys.poles()? {
        for &s in &shifts {
            if (p + s).norm() < AXIS_TOL * (1.0 + s) {
                return Err(param_err(format!("-{s} is an eigenvalue of A")));
            }
        }
    }
    let mut a = sys.a().clone();
    let mut b = sys.b().clone();
    let mut c = sys.c().clone();
    let eye = Mat::identity(m, m);
    for &s in &shifts {
        a = block_diag(&a, &(&eye * -s));
        b = numerics::vstack(&b, &(&eye * eps))?;
        c = numerics::hstack(&c, &(-&eye))?;
    }
    Ok((a, b, c))
}

/// Result of a sufficient SNI condition. `holds == false` is inconclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientVerdict {
    pub holds: bool,
    pub certificate: Option<LmiCertificate>,
    pub y: Option<Mat>,
    pub reason: Option<FailReason>,
}

fn sufficient(sys: &StateSpace, alpha: f64, beta: Option<f64>, eps: f64) -> Result<SufficientVerdict> {
    let (a, b, c) = sni_augmented_realization(sys, alpha, beta, eps)?;
    let fail = |reason| SufficientVerdict { holds: false, certificate: None, y: None, reason: Some(reason) };
    if let Some(reason) = pole_failure(sys)? {
        return Ok(fail(reason));
    }
    if !symmetric_feedthrough(sys) {
        return Ok(fail(FailReason::AsymmetricFeedthrough));
    }
    let (holds, certificate, y) = lmi_ni(&a, &b, &c, &SolverOptions::default())?;
    Ok(SufficientVerdict { holds, certificate, y, reason: (!holds).then_some(FailReason::LmiInfeasible) })
}

/// Sufficient SNI test with one first-order augmentation.
pub fn sni_sufficient_snil1(sys: &StateSpace, alpha: f64, eps: f64) -> Result<SufficientVerdict> {
    sufficient(sys, alpha, None, eps)
}

/// Sufficient SNI test with two first-order augmentations (`alpha != beta`).
pub fn sni_sufficient_snil2(sys: &StateSpace, alpha: f64, beta: f64, eps: f64) -> Result<SufficientVerdict> {
    sufficient(sys, alpha, Some(beta), eps)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::lti::{ModalModel, Mode, OutputKind};
    use crate::numerics::from_rows;
    use alloc::vec;

    pub(crate) fn first_order(sign: f64, pole: f64) -> StateSpace {
        StateSpace::new(
            from_rows(&[[pole]]).unwrap(),
            from_rows(&[[1.0]]).unwrap(),
            from_rows(&[[sign]]).unwrap(),
            Mat::zeros(1, 1),
        )
        .unwrap()
    }

    /// Companion realization of (2s^2+s+1)/((s^2+2s+5)(s+1)(2s+1)).
    pub(crate) fn second_order() -> StateSpace {
        StateSpace::new(
            from_rows(&[
                [-3.5, -8.5, -8.5, -2.5],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ])
            .unwrap(),
            from_rows(&[[2.5], [-3.0], [1.0], [0.0]]).unwrap(),
            from_rows(&[[0.0, 0.0, 0.0, 1.0]]).unwrap(),
            Mat::zeros(1, 1),
        )
        .unwrap()
    }

    fn velocity_mode() -> StateSpace {
        ModalModel::new(1, vec![Mode { omega: 1.0, kappa: 1.0, psi: vec![1.0] }], OutputKind::Velocity)
            .unwrap()
            .to_state_space()
    }

    fn grid(sys: &StateSpace) -> FrequencyGrid {
        FrequencyGrid::default_for(sys).unwrap()
    }

    #[test]
    fn second_order_realization_matches_rational_form() {
        let g = second_order();
        for s in [Complex64::new(0.0, 0.0), Complex64::new(0.3, 1.7), Complex64::new(-0.2, 4.0)] {
            let num = s * s * 2.0 + s + 1.0;
            let den = (s * s + s * 2.0 + 5.0) * (s + 1.0) * (s * 2.0 + 1.0);
            assert!((g.eval(s).unwrap()[(0, 0)] - num / den).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_part_examples() {
        let h = hermitian_imaginary_part(&first_order(1.0, -1.0), 1.0).unwrap();
        assert!((h[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let h0 = hermitian_imaginary_part(&second_order(), 0.0).unwrap();
        assert!(h0.norm() < 1e-15);
        let (w0, kappa, psi) = (3.0, 0.4, [1.0, -2.0]);
        let model = ModalModel::new(2, vec![Mode { omega: w0, kappa, psi: psi.to_vec() }], OutputKind::Position).unwrap();
        let w = 2.2;
        let h = hermitian_imaginary_part(&model.to_state_space(), w).unwrap();
        let k = 2.0 * kappa * w / ((w0 * w0 - w * w) * (w0 * w0 - w * w) + kappa * kappa * w * w);
        for r in 0..2 {
            for c in 0..2 {
                assert!((h[(r, c)].re - k * psi[r] * psi[c]).abs() < 1e-12);
                assert!(h[(r, c)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_classification() {
        let g = first_order(1.0, -1.0);
        assert!(check_ni_sweep(&g, &grid(&g), NI_TOL).unwrap().holds);
        assert!(check_sni_sweep(&g, &grid(&g), NI_TOL, SNI_STRICT_TOL).unwrap().holds);
        let m = second_order();
        assert!(check_ni_sweep(&m, &grid(&m), NI_TOL).unwrap().holds);
        let sni = check_sni_sweep(&m, &grid(&m), NI_TOL, SNI_STRICT_TOL).unwrap();
        assert!(!sni.holds);
        assert!((sni.worst_frequency - 1.0).abs() < 1e-3);
        let u = first_order(1.0, 1.0);
        let v = check_ni_sweep(&u, &grid(&u), NI_TOL).unwrap();
        assert!(!v.holds);
        assert_eq!(v.reason, Some(FailReason::UnstablePole));
    }

    #[test]
    fn positive_real_classification() {
        let g = first_order(1.0, -1.0);
        assert!(check_positive_real(&g, &grid(&g), NI_TOL).unwrap().holds);
        assert!(check_strictly_positive_real(&g, &grid(&g), NI_TOL, &SPR_SHIFTS).unwrap().holds);
        let v = velocity_mode();
        assert!(check_positive_real(&v, &grid(&v), NI_TOL).unwrap().holds);
        assert!(!check_strictly_positive_real(&v, &grid(&v), NI_TOL, &SPR_SHIFTS).unwrap().holds);
        let neg = first_order(-1.0, -1.0);
        assert!(!check_positive_real(&neg, &grid(&neg), NI_TOL).unwrap().holds);
    }

    #[test]
    fn ni_lemma_examples() {
        let v = check_ni_lmi(&first_order(1.0, -1.0)).unwrap();
        assert!(v.holds);
        assert!((v.y.unwrap()[(0, 0)] - 1.0).abs() < 1e-8);
        let m = check_ni_lmi(&second_order()).unwrap();
        assert!(m.holds && m.minimal);
        let d = from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        let s = check_ni_lmi(&StateSpace::static_gain(d).unwrap()).unwrap();
        assert!(!s.holds);
        assert_eq!(s.reason, Some(FailReason::AsymmetricFeedthrough));
    }

    #[test]
    fn zeros_classification() {
        let g = check_sni_zeros(&first_order(1.0, -1.0)).unwrap();
        assert!(g.holds);
        assert_eq!(g.zeros.len(), 1);
        let m = check_sni_zeros(&second_order()).unwrap();
        assert!(!m.holds);
        let near_j = m.axis_zeros.iter().filter(|z| (**z - Complex64::new(0.0, 1.0)).norm() < 1e-4).count();
        assert_eq!(near_j, 2);
        let eps = 0.7;
        let alpha = 2.5;
        let sys1 = first_order(eps, -alpha);
        assert!(check_sni_zeros(&sys1).unwrap().holds);
    }

    #[test]
    fn sufficient_conditions() {
        let sys1 = first_order(0.5, -2.0);
        assert!(sni_sufficient_snil1(&sys1, 2.0 + 1.0, 0.01).unwrap().holds);
        let m = second_order();
        for (alpha, eps) in [(0.7, 1e-2), (2.0, 1e-3), (3.0, 1e-4), (10.0, 1e-6)] {
            assert!(!sni_sufficient_snil1(&m, alpha, eps).unwrap().holds);
        }
        assert!(sni_sufficient_snil1(&m, 1.0, 1e-3).is_err());
        assert!(sni_sufficient_snil2(&sys1, 1.0, 1.0, 0.1).is_err());
    }
}
