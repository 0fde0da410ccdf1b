//! State-feedback synthesis that renders the loop seen by an SNI uncertainty
//! negative imaginary, and verification of the resulting closed loop.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::analysis::{self, FrequencyGrid, NI_TOL};
use crate::error::{dim_err, param_err, Error, Result};
use crate::lmi::{self, AffineExpr, LmiProblem, SolverOptions, Strictness, VarId, VerificationReport};
use crate::lti::StateSpace;
use crate::numerics::{self, fm, Mat};
use crate::stability;

/// Default strictness parameter.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Values tried, after the requested one, when a synthesis is infeasible.
pub const EPS_LADDER: [f64; 3] = [1e-6, 1e-8, 1e-4];
/// `C1 Y C1^T <= (1 - LMI3_MARGIN) I`.
pub const LMI3_MARGIN: f64 = 1e-8;
const Y_MARGIN: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-6;
const DC_SYM_TOL: f64 = 1e-8;

/// `x' = Ax + B1 w + B2 u`, `z = C1 x`, `w = Delta(s) z`, with `Delta` SNI,
/// `|lambda_max(Delta(0))| <= 1` and `Delta(inf) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainPlant {
    a: Mat,
    b1: Mat,
    b2: Mat,
    c1: Mat,
}

impl UncertainPlant {
    pub fn new(a: Mat, b1: Mat, b2: Mat, c1: Mat) -> Result<Self> {
        for m in [&a, &b1, &b2, &c1] {
            numerics::ensure_finite(m)?;
        }
        numerics::ensure_square(&a)?;
        let n = a.nrows();
        if b1.nrows() != n || b2.nrows() != n || c1.ncols() != n {
            return Err(dim_err("B1, B2 need n rows and C1 n columns"));
        }
        if c1.nrows() != b1.ncols() {
            return Err(dim_err("C1 rows must equal B1 columns"));
        }
        Ok(Self { a, b1, b2, c1 })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b1(&self) -> &Mat {
        &self.b1
    }
    pub fn b2(&self) -> &Mat {
        &self.b2
    }
    pub fn c1(&self) -> &Mat {
        &self.c1
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn controls(&self) -> usize {
        self.b2.ncols()
    }
    pub fn channels(&self) -> usize {
        self.b1.ncols()
    }

    /// `Gcl = (A + B2 K, B1, C1, 0)`.
    pub fn closed_loop(&self, k: &Mat) -> Result<StateSpace> {
        if k.shape() != (self.controls(), self.states()) {
            return Err(dim_err("K must be m x n"));
        }
        let q = self.channels();
        StateSpace::new(&self.a + &self.b2 * k, self.b1.clone(), self.c1.clone(), Mat::zeros(q, q))
    }
}

/// The synthesis LMIs for one value of `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisProblem {
    pub problem: LmiProblem,
    pub y: VarId,
    pub m: VarId,
    pub eps: f64,
    /// Strictness applied only off the directions where the equality
    /// constraint pins `C1 X C1^T` (see [`synthesis_problem`]).
    pub projected: bool,
}

fn lmi2_expr(plant: &UncertainPlant, y: VarId, m: VarId) -> Result<AffineExpr> {
    let n = plant.states();
    AffineExpr::term(plant.a.clone(), y, Mat::identity(n, n))?
        .plus_term(plant.b2.clone(), m, Mat::identity(n, n))?
        .plus_transpose()
}

/// Builds `Y > 0`, `AY + YA^T + B2 M + M^T B2^T + eps I <= 0`,
/// `B1 + A Y C1^T + B2 M C1^T = 0` and `C1 Y C1^T < I`.
///
/// Writing `X = AY + YA^T + B2 M + M^T B2^T`, the equality fixes
/// `C1 X C1^T = -S` with `S = C1 B1 + B1^T C1^T`, so the full `eps I` term is
/// infeasible whenever `eps C1 C1^T - S` has a positive eigenvalue. In that
/// case, with `W = C1^T N` for `N` spanning `ker S`, the problem imposes
/// `X W = 0` (implied by `X <= 0`) and `Q^T X Q + eps I <= 0` on the
/// orthogonal complement `Q` of `range W`.
pub fn synthesis_problem(plant: &UncertainPlant, eps: f64) -> Result<SynthesisProblem> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(param_err(format!("eps must be positive, got {eps}")));
    }
    let (n, mm, q) = (plant.states(), plant.controls(), plant.channels());
    let mut p = LmiProblem::new();
    let y = p.symmetric(n);
    let m = p.full(mm, n);
    p.psd("Y > 0", AffineExpr::var(y), Strictness::Margin(Y_MARGIN));

    let c1t = plant.c1.transpose();
    let s = &plant.c1 * &plant.b1 + plant.b1.transpose() * &c1t;
    let conflict = numerics::lambda_max(&numerics::symmetrize(&(&plant.c1 * &c1t * eps - &s)))?;
    let x = lmi2_expr(plant, y, m)?;
    let projected = q > 0 && conflict > 0.0;
    if projected {
        let kernel = numerics::null_space(&numerics::symmetrize(&s), 1e-10);
        let w = &c1t * kernel;
        let (range, complement) = numerics::range_and_complement(&w, 1e-10);
        p.equal_zero("X W = 0", x.clone().right_mul(&range)?);
        let k = complement.ncols();
        if k > 0 {
            p.nsd(
                "Q'XQ + eps I <= 0",
                x.congruence(&complement)?.add(&AffineExpr::constant(Mat::identity(k, k) * eps))?,
                Strictness::NonStrict,
            );
        }
    } else {
        p.nsd(
            "AY + YA' + B2M + M'B2' + eps I <= 0",
            x.add(&AffineExpr::constant(Mat::identity(n, n) * eps))?,
            Strictness::NonStrict,
        );
    }
    p.equal_zero(
        "B1 + AYC1' + B2MC1' = 0",
        AffineExpr::constant(plant.b1.clone())
            .plus_term(plant.a.clone(), y, c1t.clone())?
            .plus_term(plant.b2.clone(), m, c1t.clone())?,
    );
    p.psd(
        "I - C1YC1' > 0",
        AffineExpr::constant(Mat::identity(q, q) * (1.0 - LMI3_MARGIN)).sub(&AffineExpr::term(
            plant.c1.clone(),
            y,
            c1t,
        )?)?,
        Strictness::NonStrict,
    );
    Ok(SynthesisProblem { problem: p, y, m, eps, projected })
}

/// One solver attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub eps: f64,
    pub projected: bool,
    pub feasible: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub k: Mat,
    pub y: Mat,
    pub m: Mat,
    pub gcl: StateSpace,
    pub eps: f64,
    pub projected: bool,
    /// A lower bound on `Y` was added to make `Y` invertible.
    pub regularized: bool,
    pub certificate_report: VerificationReport,
    pub verification: ClosedLoopReport,
    pub attempts: Vec<Attempt>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisOutcome {
    Feasible(alloc::boxed::Box<SynthesisResult>),
    Infeasible { attempts: Vec<Attempt> },
}

impl SynthesisOutcome {
    pub fn result(&self) -> Option<&SynthesisResult> {
        match self {
            SynthesisOutcome::Feasible(r) => Some(r),
            SynthesisOutcome::Infeasible { .. } => None,
        }
    }
}

fn eps_sequence(eps: f64) -> Vec<f64> {
    let mut out = vec![eps];
    out.extend(EPS_LADDER.iter().copied().filter(|e| *e != eps));
    out
}

/// Tries `eps`, then the remaining [`EPS_LADDER`] values. On success
/// `K = M Y^{-1}` and the closed loop is verified.
pub fn synthesize_state_feedback(plant: &UncertainPlant, eps: f64) -> Result<SynthesisOutcome> {
    synthesize_state_feedback_with(plant, eps, &SolverOptions::default())
}

pub fn synthesize_state_feedback_with(
    plant: &UncertainPlant,
    eps: f64,
    opts: &SolverOptions,
) -> Result<SynthesisOutcome> {
    let mut attempts = Vec::new();
    for e in eps_sequence(eps) {
        let sp = synthesis_problem(plant, e)?;
        let out = lmi::solve_feasibility(&sp.problem, opts)?;
        let margin = match &out {
            lmi::LmiOutcome::Feasible(c) => c.margin,
            lmi::LmiOutcome::Infeasible(r) => r.best_margin,
        };
        attempts.push(Attempt { eps: e, projected: sp.projected, feasible: out.is_feasible(), margin });
        let Some(cert) = out.certificate() else { continue };
        let mut notes = Vec::new();
        if sp.projected {
            notes.push(String::from(
                "eps I applied on the complement of C1' ker(C1 B1 + B1' C1'); the equality fixes X there",
            ));
        }
        let (mut y, mut m) = (cert.value(sp.y).clone(), cert.value(sp.m).clone());
        let mut problem = sp.problem.clone();
        let mut regularized = false;
        if numerics::condition_number(&y) > numerics::COND_LIMIT {
            let floor = 1e-6 * numerics::lambda_max(&y)?;
            problem.psd("Y >= floor I", AffineExpr::var(sp.y), Strictness::Margin(floor));
            match lmi::solve_feasibility(&problem, opts)?.certificate() {
                Some(c2) => {
                    y = c2.value(sp.y).clone();
                    m = c2.value(sp.m).clone();
                    regularized = true;
                    notes.push(format!("Y ill-conditioned; re-solved with Y >= {floor:e} I"));
                }
                None => return Err(Error::IllConditioned(numerics::condition_number(&y))),
            }
        }
        let y_inv = numerics::inverse(&y)?;
        let k = &m * y_inv;
        let gcl = plant.closed_loop(&k)?;
        let values = vec![y.clone(), m.clone()];
        let certificate_report = lmi::verify_certificate(&problem, &values, opts.cone_tol, opts.eq_tol)?;
        let verification = verify_closed_loop(plant, &k, Some(&y))?;
        return Ok(SynthesisOutcome::Feasible(alloc::boxed::Box::new(SynthesisResult {
            k,
            y,
            m,
            gcl,
            eps: e,
            projected: sp.projected,
            regularized,
            certificate_report,
            verification,
            attempts,
            notes,
        })));
    }
    Ok(SynthesisOutcome::Infeasible { attempts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopReport {
    pub closed_loop_poles: Vec<Complex64>,
    pub hurwitz: bool,
    pub ni_lmi: bool,
    pub ni_sweep: bool,
    /// SISO loops: the phase of `Gcl(jw)` stays in `(-pi, 0)` over the sweep.
    pub phase_in_range: Option<bool>,
    pub dc_gain: Option<Mat>,
    /// `|Gcl(0) - C1 Y C1^T|` when `Y` was supplied.
    pub identity_residual: Option<f64>,
    pub identity_holds: Option<bool>,
    pub sigma_max_dc: Option<f64>,
    pub lambda_max_dc: Option<f64>,
    pub dc_contractive: bool,
    /// Hypotheses and DC condition of the robust stability test hold for
    /// every SNI `Delta` with `|lambda_max(Delta(0))| <= 1`, `Delta(inf) >= 0`.
    pub robust_for_class: bool,
    /// Direct pole test against the boundary sample `Delta = I / (s + 1)`.
    pub boundary_sample_stable: bool,
    pub notes: Vec<String>,
}

impl ClosedLoopReport {
    pub fn passed(&self) -> bool {
        self.hurwitz
            && self.ni_lmi
            && self.ni_sweep
            && self.phase_in_range.unwrap_or(true)
            && self.identity_holds.unwrap_or(true)
            && self.dc_contractive
            && self.robust_for_class
            && self.boundary_sample_stable
    }
}

fn phase_check(gcl: &StateSpace, grid: &[f64]) -> Result<bool> {
    for &w in grid.iter().filter(|w| **w > 0.0) {
        let g = gcl.freq_response(w)?[(0, 0)];
        let phase = fm::atan2(g.im, g.re);
        if !(phase < 0.0 && phase > -core::f64::consts::PI) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn boundary_sample(q: usize) -> Result<StateSpace> {
    let i = Mat::identity(q, q);
    StateSpace::new(-i.clone(), i.clone(), i, Mat::zeros(q, q))
}

/// Checks a closed loop `A + B2 K`: Hurwitz, NI (LMI and sweep), the
/// `Gcl(0) = C1 Y C1^T` identity when `y` is given, `sigma_max(Gcl(0)) < 1`,
/// and robust stability against the uncertainty class.
pub fn verify_closed_loop(plant: &UncertainPlant, k: &Mat, y: Option<&Mat>) -> Result<ClosedLoopReport> {
    let gcl = plant.closed_loop(k)?;
    let mut notes = Vec::new();
    let closed_loop_poles = gcl.poles()?;
    let hurwitz = closed_loop_poles.iter().all(|p| p.re < 0.0 && !analysis::is_axis(*p));
    let ni_lmi = analysis::check_ni_lmi(&gcl)?.holds;
    let (ni_sweep, phase_in_range) = match FrequencyGrid::default_for(&gcl) {
        Ok(grid) => {
            let v = analysis::check_ni_sweep(&gcl, &grid, NI_TOL)?;
            let phase = if gcl.inputs() == 1 && v.holds { Some(phase_check(&gcl, &v.grid)?) } else { None };
            (v.holds, phase)
        }
        Err(e) => {
            notes.push(format!("no frequency grid: {e}"));
            (false, None)
        }
    };
    let dc_gain = gcl.dc_gain().ok();
    let (mut identity_residual, mut identity_holds) = (None, None);
    if let (Some(g0), Some(y)) = (&dc_gain, y) {
        let r = (g0 - &plant.c1 * y * plant.c1.transpose()).norm();
        identity_residual = Some(r);
        identity_holds = Some(r <= IDENTITY_TOL * (1.0 + y.norm()));
    }
    let (mut sigma_max_dc, mut lambda_max_dc) = (None, None);
    let mut dc_contractive = false;
    if let Some(g0) = &dc_gain {
        let s = numerics::sigma_max(g0);
        sigma_max_dc = Some(s);
        dc_contractive = s < 1.0;
        if numerics::is_symmetric(g0, DC_SYM_TOL) {
            let l = numerics::lambda_max(&numerics::symmetrize(g0))?;
            lambda_max_dc = Some(l);
            if fm::abs(l - s) > DC_SYM_TOL * (1.0 + s) {
                notes.push(String::from("Gcl(0) is not positive semidefinite"));
            }
        } else {
            notes.push(String::from("Gcl(0) is not symmetric"));
        }
    } else {
        notes.push(String::from("Gcl has a pole at the origin"));
    }
    // Gcl(inf) = 0 and Delta(0) in [0, I] give lambda_max(Gcl(0) Delta(0)) <= lambda_max(Gcl(0)).
    let robust_for_class =
        hurwitz && ni_sweep && lambda_max_dc.is_some_and(|l| l < 1.0 - stability::MARGINAL_BAND);
    let q = plant.channels();
    let boundary_sample_stable = if q > 0 {
        stability::internal_stability(&gcl, &boundary_sample(q)?, crate::lti::LoopSign::Positive)
            .map(|s| s.stable)
            .unwrap_or(false)
    } else {
        hurwitz
    };
    Ok(ClosedLoopReport {
        closed_loop_poles,
        hurwitz,
        ni_lmi,
        ni_sweep,
        phase_in_range,
        dc_gain,
        identity_residual,
        identity_holds,
        sigma_max_dc,
        lambda_max_dc,
        dc_contractive,
        robust_for_class,
        boundary_sample_stable,
        notes,
    })
}
