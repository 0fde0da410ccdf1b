//! Controller families (positive-position feedback, resonant, integral
//! resonant) and root-locus tuning of the integral resonant gain.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{dim_err, param_err, Error, Result};
use crate::lti::{FeedbackLoop, LoopSign, StateSpace};
use crate::numerics::{self, fm, Mat};

/// One second-order section `k / (s^2 + 2 zeta omega s + omega^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpfTerm {
    pub k: f64,
    pub zeta: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PpfParams {
    /// `sum_i k_i / (s^2 + 2 zeta_i omega_i s + omega_i^2)`
    Siso(Vec<PpfTerm>),
    /// `K^T (s^2 I + D s + Omega)^{-1} K` with `K` r x m and `D`, `Omega` r x r.
    Mimo { k: Mat, d: Mat, omega: Mat },
}

fn ensure_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(param_err(format!("{name} must be positive, got {v}")))
    }
}

fn ensure_pd(name: &str, m: &Mat) -> Result<()> {
    numerics::ensure_square(m)?;
    if !numerics::is_symmetric(m, numerics::SYM_TOL) {
        return Err(param_err(format!("{name} must be symmetric")));
    }
    let lmin = numerics::lambda_min(m)?;
    if !(lmin > 0.0) {
        return Err(param_err(format!("{name} must be positive definite (lambda_min = {lmin:e})")));
    }
    Ok(())
}

fn sum_all(parts: Vec<StateSpace>) -> Result<StateSpace> {
    let mut it = parts.into_iter();
    let first = it.next().ok_or_else(|| param_err("at least one term is required"))?;
    it.try_fold(first, |acc, p| acc.add(&p))
}

/// Companion block `x1' = x2`, `x2' = -omega^2 x1 - 2 zeta omega x2 + g^T u`.
fn section(zeta: f64, omega: f64, g: &[f64], c_row: [f64; 2], d: &Mat) -> Result<StateSpace> {
    let m = g.len();
    let a = numerics::from_rows(&[[0.0, 1.0], [-omega * omega, -2.0 * zeta * omega]])?;
    let mut b = Mat::zeros(2, m);
    let mut c = Mat::zeros(m, 2);
    for (j, &gj) in g.iter().enumerate() {
        b[(1, j)] = gj;
        c[(j, 0)] = gj * c_row[0];
        c[(j, 1)] = gj * c_row[1];
    }
    StateSpace::new(a, b, c, d.clone())
}

/// Positive-position feedback controller.
pub fn ppf(params: &PpfParams) -> Result<StateSpace> {
    match params {
        PpfParams::Siso(terms) => {
            let mut parts = Vec::with_capacity(terms.len());
            for t in terms {
                ensure_positive("k", t.k)?;
                ensure_positive("zeta", t.zeta)?;
                ensure_positive("omega", t.omega)?;
                // k / den realized with unit input gain and output gain k.
                parts.push(section(t.zeta, t.omega, &[1.0], [t.k, 0.0], &Mat::zeros(1, 1))?);
            }
            sum_all(parts)
        }
        PpfParams::Mimo { k, d, omega } => {
            ensure_pd("D", d)?;
            ensure_pd("Omega", omega)?;
            numerics::ensure_finite(k)?;
            let r = d.nrows();
            if omega.nrows() != r || k.nrows() != r {
                return Err(dim_err("K, D and Omega must share the internal dimension"));
            }
            let m = k.ncols();
            let eye = Mat::identity(r, r);
            let top = numerics::hstack(&Mat::zeros(r, r), &eye)?;
            let bottom = numerics::hstack(&(-omega), &(-d))?;
            let a = numerics::vstack(&top, &bottom)?;
            let b = numerics::vstack(&Mat::zeros(r, m), k)?;
            let c = numerics::hstack(&k.transpose(), &Mat::zeros(m, r))?;
            StateSpace::new(a, b, c, Mat::zeros(m, m))
        }
    }
}

/// One resonant section with gain vector `g` (`alpha_i` or `beta_i`; `[sqrt(k)]` for SISO).
#[derive(Debug, Clone, PartialEq)]
pub struct ResonantTerm {
    pub zeta: f64,
    pub omega: f64,
    pub gain: Vec<f64>,
}

impl ResonantTerm {
    /// SISO term with scalar gain `k > 0`.
    pub fn siso(k: f64, zeta: f64, omega: f64) -> Result<Self> {
        ensure_positive("k", k)?;
        Ok(Self { zeta, omega, gain: vec![fm::sqrt(k)] })
    }
}

fn resonant(terms: &[ResonantTerm], velocity: bool) -> Result<StateSpace> {
    let mut parts = Vec::with_capacity(terms.len());
    let m = terms.first().map(|t| t.gain.len()).unwrap_or(0);
    for t in terms {
        ensure_positive("zeta", t.zeta)?;
        ensure_positive("omega", t.omega)?;
        if t.gain.len() != m || m == 0 {
            return Err(dim_err("gain vectors must be nonempty and of equal length"));
        }
        if t.gain.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let g = Mat::from_column_slice(m, 1, &t.gain);
        let d = -(&g * g.transpose());
        let w2 = t.omega * t.omega;
        let c_row = if velocity { [w2, 0.0] } else { [w2, 2.0 * t.zeta * t.omega] };
        parts.push(section(t.zeta, t.omega, &t.gain, c_row, &d)?);
    }
    sum_all(parts)
}

/// `sum_i -s^2 / (s^2 + 2 zeta_i omega_i s + omega_i^2) g_i g_i^T`.
pub fn resonant_acc(terms: &[ResonantTerm]) -> Result<StateSpace> {
    resonant(terms, false)
}

/// `sum_i -s (s + 2 zeta_i omega_i) / (s^2 + 2 zeta_i omega_i s + omega_i^2) g_i g_i^T`.
pub fn resonant_vel_type(terms: &[ResonantTerm]) -> Result<StateSpace> {
    resonant(terms, true)
}

/// Integral resonant controller `(sI + Gamma Phi)^{-1} Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrcParams {
    pub gamma: Mat,
    pub phi: Mat,
}

impl IrcParams {
    pub fn scalar(gamma: f64, phi: f64) -> Self {
        Self { gamma: Mat::from_element(1, 1, gamma), phi: Mat::from_element(1, 1, phi) }
    }
}

/// Realization `(-Gamma Phi, Gamma, I, 0)`.
pub fn irc(params: &IrcParams) -> Result<StateSpace> {
    ensure_pd("Gamma", &params.gamma)?;
    ensure_pd("Phi", &params.phi)?;
    let m = params.gamma.nrows();
    if params.phi.nrows() != m {
        return Err(dim_err("Gamma and Phi must have equal size"));
    }
    StateSpace::new(
        -(&params.gamma * &params.phi),
        params.gamma.clone(),
        Mat::identity(m, m),
        Mat::zeros(m, m),
    )
}

/// `Phi = margin * P(0)`, so that `lambda_max(P(0) Phi^{-1}) = 1 / margin`.
pub fn choose_phi(plant: &StateSpace, margin: f64) -> Result<Mat> {
    ensure_positive("margin", margin)?;
    let p0 = plant.dc_gain()?;
    numerics::ensure_square(&p0)?;
    let phi = numerics::symmetrize(&p0) * margin;
    if !numerics::is_symmetric(&p0, numerics::SYM_TOL) || !(numerics::lambda_min(&phi)? > 0.0) {
        return Err(param_err("plant DC gain must be symmetric positive definite"));
    }
    Ok(phi)
}

/// Quantity maximized along the tracked first-mode branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrcObjective {
    /// Decay rate `-Re(p)`.
    DecayRate,
    /// Damping ratio `-Re(p) / |p|`.
    DampingRatio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocusPoint {
    pub gamma: f64,
    /// Closed-loop poles in branch order (index `i` continues branch `i` of the previous point).
    pub poles: Vec<Complex64>,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrcDesign {
    pub gamma_star: f64,
    pub objective: IrcObjective,
    /// Branch index of the tracked first resonant mode.
    pub tracked_branch: usize,
    pub tracked_pole: Complex64,
    pub damping_ratio: f64,
    pub decay_rate: f64,
    pub open_loop_damping_ratio: f64,
    pub locus: Vec<LocusPoint>,
}

pub fn damping_ratio(p: Complex64) -> f64 {
    let r = p.norm();
    if r == 0.0 {
        1.0
    } else {
        -p.re / r
    }
}

fn objective_value(obj: IrcObjective, p: Complex64) -> f64 {
    match obj {
        IrcObjective::DecayRate => -p.re,
        IrcObjective::DampingRatio => damping_ratio(p),
    }
}

/// Default tuning grid: `[1e3, 1e8]`, 200 points per decade.
pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(1e3, 1e8, 200)
}

pub fn log_grid(lo: f64, hi: f64, ppd: usize) -> Vec<f64> {
    let (a, b) = (fm::log10(lo), fm::log10(hi));
    let count = (fm::ceil((b - a) * ppd as f64) as usize).max(1) + 1;
    (0..count).map(|i| fm::powf(10.0, a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

fn closed_loop_poles(plant: &StateSpace, gamma: f64, phi: f64) -> Result<Vec<Complex64>> {
    let c = irc(&IrcParams::scalar(gamma, phi))?;
    FeedbackLoop::new(plant.clone(), c, LoopSign::Positive)?.closed_loop()?.poles()
}

fn is_stable(poles: &[Complex64]) -> bool {
    poles.iter().all(|p| p.re < 0.0 && !crate::analysis::is_axis(*p))
}

/// Tunes a scalar IRC gain on a SISO plant by tracking the lowest resonant
/// pole pair along the root locus and maximizing `objective` on it.
///
/// The grid argmax is polished by golden-section search in `log Gamma` to
/// 0.1% relative width. Unstable grid points are excluded.
pub fn design_irc_gamma(
    plant: &StateSpace,
    phi: f64,
    gamma_grid: &[f64],
    objective: IrcObjective,
) -> Result<IrcDesign> {
    if plant.inputs() != 1 || plant.outputs() != 1 {
        return Err(dim_err("IRC tuning needs a SISO plant"));
    }
    ensure_positive("Phi", phi)?;
    if gamma_grid.len() < 3 || gamma_grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(param_err("Gamma grid needs at least three positive points"));
    }
    if gamma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param_err("Gamma grid must be strictly increasing"));
    }
    let open = plant.poles()?;
    let first = open
        .iter()
        .filter(|p| p.im > 0.0)
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()
        .ok_or_else(|| param_err("plant has no resonant pole pair"))?;
    // Gamma -> 0: plant poles plus the controller pole at the origin.
    let mut prev = open.clone();
    prev.push(Complex64::new(0.0, 0.0));
    let tracked_branch = prev
        .iter()
        .enumerate()
        .min_by(|a, b| (*a.1 - first).norm().total_cmp(&(*b.1 - first).norm()))
        .map(|(i, _)| i)
        .expect("nonempty");

    let mut locus = Vec::with_capacity(gamma_grid.len());
    for &g in gamma_grid {
        let poles = closed_loop_poles(plant, g, phi)?;
        if poles.len() != prev.len() {
            return Err(dim_err("closed-loop order changed along the locus"));
        }
        let ordered = match_to(&prev, &poles);
        locus.push(LocusPoint { gamma: g, stable: is_stable(&ordered), poles: ordered.clone() });
        prev = ordered;
    }

    let best = locus
        .iter()
        .enumerate()
        .filter(|(_, p)| p.stable)
        .max_by(|a, b| {
            objective_value(objective, a.1.poles[tracked_branch])
                .total_cmp(&objective_value(objective, b.1.poles[tracked_branch]))
        })
        .map(|(i, _)| i)
        .ok_or(Error::NoConvergence("no stable point on the Gamma grid"))?;

    let (mut gamma_star, mut pole_star) = (locus[best].gamma, locus[best].poles[tracked_branch]);
    if best > 0 && best + 1 < locus.len() {
        let anchor = |lg: f64| -> Result<Complex64> {
            // Nearest grid point supplies the continuity reference.
            let g = fm::exp(lg);
            let k = nearest_index(gamma_grid, g);
            let reference = locus[k].poles[tracked_branch];
            let poles = closed_loop_poles(plant, g, phi)?;
            Ok(*poles
                .iter()
                .min_by(|a, b| (**a - reference).norm().total_cmp(&(**b - reference).norm()))
                .expect("nonempty"))
        };
        let score = |p: Complex64| objective_value(objective, p);
        let r = 0.5 * (fm::sqrt(5.0) - 1.0);
        let (mut lo, mut hi) = (fm::ln(locus[best - 1].gamma), fm::ln(locus[best + 1].gamma));
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let mut p1 = anchor(x1)?;
        let mut p2 = anchor(x2)?;
        while hi - lo > 1e-3 {
            if score(p1) >= score(p2) {
                hi = x2;
                x2 = x1;
                p2 = p1;
                x1 = hi - r * (hi - lo);
                p1 = anchor(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                p1 = p2;
                x2 = lo + r * (hi - lo);
                p2 = anchor(x2)?;
            }
        }
        let (x, p) = if score(p1) >= score(p2) { (x1, p1) } else { (x2, p2) };
        if score(p) >= score(pole_star) && is_stable(&closed_loop_poles(plant, fm::exp(x), phi)?) {
            gamma_star = fm::exp(x);
            pole_star = p;
        }
    }
    Ok(IrcDesign {
        gamma_star,
        objective,
        tracked_branch,
        tracked_pole: pole_star,
        damping_ratio: damping_ratio(pole_star),
        decay_rate: -pole_star.re,
        open_loop_damping_ratio: damping_ratio(first),
        locus,
    })
}

fn nearest_index(grid: &[f64], g: f64) -> usize {
    (0..grid.len())
        .min_by(|&a, &b| fm::abs(fm::ln(grid[a] / g)).total_cmp(&fm::abs(fm::ln(grid[b] / g))))
        .expect("nonempty grid")
}

/// Reorders `next` so that `next[i]` continues `prev[i]` (minimal total distance).
fn match_to(prev: &[Complex64], next: &[Complex64]) -> Vec<Complex64> {
    let n = prev.len();
    let cost: Vec<Vec<f64>> = prev.iter().map(|p| next.iter().map(|q| (*p - *q).norm()).collect()).collect();
    let assign = min_cost_assignment(&cost);
    (0..n).map(|i| next[assign[i]]).collect()
}

/// Hungarian method for a square cost matrix; returns the column for each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}
