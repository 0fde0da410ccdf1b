//! Small dense LMI feasibility problems.
//!
//! Decision variables are real matrices (symmetric or rectangular). Constraints
//! are affine matrix expressions required to be positive/negative semidefinite
//! (optionally with an absolute margin) or equal to zero. Equalities are
//! eliminated first; the remaining cone problem maximizes the smallest
//! normalized eigenvalue margin `t` with a log-barrier Newton method
//! ([`Method::Barrier`]) or Polyak subgradient ascent ([`Method::Subgradient`]).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DVector, SVD};

use crate::error::{dim_err, param_err, Error, Result};
use crate::numerics::{self, fm, Mat};

/// Handle to a matrix decision variable of an [`LmiProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId {
    index: usize,
    rows: usize,
    cols: usize,
    symmetric: bool,
}

impl VarId {
    pub fn index(&self) -> usize {
        self.index
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// `left * V * right`, or `left * V^T * right` when `transposed`.
#[derive(Debug, Clone, PartialEq)]
struct Term {
    var: VarId,
    left: Mat,
    right: Mat,
    transposed: bool,
}

impl Term {
    fn var_shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.var.cols, self.var.rows)
        } else {
            (self.var.rows, self.var.cols)
        }
    }

    fn apply(&self, value: &Mat) -> Mat {
        if self.transposed {
            &self.left * value.transpose() * &self.right
        } else {
            &self.left * value * &self.right
        }
    }
}

/// Affine matrix expression `C0 + sum_k L_k V_k R_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    constant: Mat,
    terms: Vec<Term>,
}

impl AffineExpr {
    pub fn constant(m: Mat) -> Self {
        Self { constant: m, terms: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols))
    }

    /// The variable itself.
    pub fn var(v: VarId) -> Self {
        Self::term(Mat::identity(v.rows, v.rows), v, Mat::identity(v.cols, v.cols))
            .expect("identity factors conform")
    }

    /// `left * V * right`.
    pub fn term(left: Mat, v: VarId, right: Mat) -> Result<Self> {
        Self::zeros(left.nrows(), right.ncols()).plus_term(left, v, right)
    }

    /// `left * V^T * right`.
    pub fn term_t(left: Mat, v: VarId, right: Mat) -> Result<Self> {
        Self::zeros(left.nrows(), right.ncols()).plus_term_t(left, v, right)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn plus_term(self, left: Mat, v: VarId, right: Mat) -> Result<Self> {
        self.push(Term { var: v, left, right, transposed: false })
    }

    pub fn plus_term_t(self, left: Mat, v: VarId, right: Mat) -> Result<Self> {
        self.push(Term { var: v, left, right, transposed: true })
    }

    fn push(mut self, t: Term) -> Result<Self> {
        let (vr, vc) = t.var_shape();
        if t.left.ncols() != vr || t.right.nrows() != vc {
            return Err(dim_err("term factors do not conform with the variable"));
        }
        if t.left.nrows() != self.constant.nrows() || t.right.ncols() != self.constant.ncols() {
            return Err(dim_err(format!(
                "term is {}x{}, expression is {}x{}",
                t.left.nrows(),
                t.right.ncols(),
                self.constant.nrows(),
                self.constant.ncols()
            )));
        }
        self.terms.push(t);
        Ok(self)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(mut self, other: &AffineExpr) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(dim_err("adding expressions of different shapes"));
        }
        self.constant += &other.constant;
        self.terms.extend(other.terms.iter().cloned());
        Ok(self)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: &AffineExpr) -> Result<Self> {
        self.add(&other.clone().scale(-1.0))
    }

    pub fn scale(mut self, k: f64) -> Self {
        self.constant *= k;
        for t in &mut self.terms {
            t.left *= k;
        }
        self
    }

    pub fn transpose(&self) -> Self {
        Self {
            constant: self.constant.transpose(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    var: t.var,
                    left: t.right.transpose(),
                    right: t.left.transpose(),
                    transposed: !t.transposed,
                })
                .collect(),
        }
    }

    /// `E + E^T`.
    pub fn plus_transpose(self) -> Result<Self> {
        let t = self.transpose();
        self.add(&t)
    }

    /// `P * E`.
    pub fn left_mul(mut self, p: &Mat) -> Result<Self> {
        if p.ncols() != self.constant.nrows() {
            return Err(dim_err("left factor does not conform"));
        }
        self.constant = p * &self.constant;
        for t in &mut self.terms {
            t.left = p * &t.left;
        }
        Ok(self)
    }

    /// `E * Q`.
    pub fn right_mul(mut self, q: &Mat) -> Result<Self> {
        if q.nrows() != self.constant.ncols() {
            return Err(dim_err("right factor does not conform"));
        }
        self.constant = &self.constant * q;
        for t in &mut self.terms {
            t.right = &t.right * q;
        }
        Ok(self)
    }

    /// `Q^T * E * Q`.
    pub fn congruence(self, q: &Mat) -> Result<Self> {
        self.left_mul(&q.transpose())?.right_mul(q)
    }

    /// Value at the given variable assignment (indexed by [`VarId::index`]).
    pub fn eval(&self, values: &[Mat]) -> Result<Mat> {
        let mut out = self.constant.clone();
        for t in &self.terms {
            let v = values
                .get(t.var.index)
                .ok_or_else(|| dim_err("missing value for a decision variable"))?;
            if v.shape() != (t.var.rows, t.var.cols) {
                return Err(dim_err("decision value has the wrong shape"));
            }
            out += t.apply(v);
        }
        Ok(out)
    }

    /// Norm bound `|C0| + sum |L| |V| |R|` used to scale tolerances.
    fn magnitude(&self, values: &[Mat]) -> f64 {
        let mut s = self.constant.norm();
        for t in &self.terms {
            let v = values.get(t.var.index).map_or(0.0, |v| v.norm());
            s += t.left.norm() * v * t.right.norm();
        }
        s.max(numerics::ABS_FLOOR)
    }

    fn coefficient(&self, var: VarId, basis: &Mat) -> Mat {
        let mut out = Mat::zeros(self.constant.nrows(), self.constant.ncols());
        for t in self.terms.iter().filter(|t| t.var == var) {
            out += t.apply(basis);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr >= 0`
    Psd,
    /// `expr <= 0`
    Nsd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strictness {
    NonStrict,
    /// Smallest eigenvalue of the sign-adjusted expression must be at least this.
    Margin(f64),
}

impl Strictness {
    fn margin(&self) -> f64 {
        match self {
            Strictness::NonStrict => 0.0,
            Strictness::Margin(m) => *m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    pub label: String,
    pub expr: AffineExpr,
    pub sense: Sense,
    pub strictness: Strictness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConstraint {
    pub label: String,
    pub expr: AffineExpr,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LmiProblem {
    vars: Vec<VarId>,
    cones: Vec<ConeConstraint>,
    equalities: Vec<EqualityConstraint>,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symmetric(&mut self, n: usize) -> VarId {
        self.push_var(n, n, true)
    }

    pub fn full(&mut self, rows: usize, cols: usize) -> VarId {
        self.push_var(rows, cols, false)
    }

    pub fn scalar(&mut self) -> VarId {
        self.push_var(1, 1, false)
    }

    fn push_var(&mut self, rows: usize, cols: usize, symmetric: bool) -> VarId {
        let v = VarId { index: self.vars.len(), rows, cols, symmetric };
        self.vars.push(v);
        v
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }
    pub fn cones(&self) -> &[ConeConstraint] {
        &self.cones
    }
    pub fn equalities(&self) -> &[EqualityConstraint] {
        &self.equalities
    }

    pub fn psd(&mut self, label: &str, expr: AffineExpr, strictness: Strictness) {
        self.cones.push(ConeConstraint { label: label.into(), expr, sense: Sense::Psd, strictness });
    }

    pub fn nsd(&mut self, label: &str, expr: AffineExpr, strictness: Strictness) {
        self.cones.push(ConeConstraint { label: label.into(), expr, sense: Sense::Nsd, strictness });
    }

    pub fn equal_zero(&mut self, label: &str, expr: AffineExpr) {
        self.equalities.push(EqualityConstraint { label: label.into(), expr });
    }

    fn validate(&self) -> Result<()> {
        for c in &self.cones {
            let (r, k) = c.expr.shape();
            if r != k {
                return Err(dim_err(format!("cone constraint '{}' is not square", c.label)));
            }
            if !c.strictness.margin().is_finite() {
                return Err(param_err(format!("cone constraint '{}' has a non-finite margin", c.label)));
            }
        }
        for e in self.cones.iter().map(|c| &c.expr).chain(self.equalities.iter().map(|e| &e.expr)) {
            numerics::ensure_finite(&e.constant)?;
            for t in &e.terms {
                if self.vars.get(t.var.index) != Some(&t.var) {
                    return Err(dim_err("expression refers to a variable of another problem"));
                }
                numerics::ensure_finite(&t.left)?;
                numerics::ensure_finite(&t.right)?;
            }
        }
        Ok(())
    }

    /// Scalar coordinates of every variable, as (variable, basis matrix).
    fn coordinates(&self) -> Vec<(VarId, Mat)> {
        let mut out = Vec::new();
        for &v in &self.vars {
            if v.symmetric {
                for i in 0..v.rows {
                    for j in i..v.rows {
                        let mut e = Mat::zeros(v.rows, v.rows);
                        e[(i, j)] = 1.0;
                        e[(j, i)] = 1.0;
                        out.push((v, e));
                    }
                }
            } else {
                for j in 0..v.cols {
                    for i in 0..v.rows {
                        let mut e = Mat::zeros(v.rows, v.cols);
                        e[(i, j)] = 1.0;
                        out.push((v, e));
                    }
                }
            }
        }
        out
    }

    fn values_from(&self, x: &DVector<f64>) -> Vec<Mat> {
        let mut values = Vec::with_capacity(self.vars.len());
        let mut k = 0;
        for &v in &self.vars {
            let mut m = Mat::zeros(v.rows, v.cols);
            if v.symmetric {
                for i in 0..v.rows {
                    for j in i..v.rows {
                        m[(i, j)] = x[k];
                        m[(j, i)] = x[k];
                        k += 1;
                    }
                }
            } else {
                for j in 0..v.cols {
                    for i in 0..v.rows {
                        m[(i, j)] = x[k];
                        k += 1;
                    }
                }
            }
            values.push(m);
        }
        values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Log-barrier Newton method on the margin-maximization problem.
    Barrier,
    /// Polyak-step subgradient ascent on the minimum-eigenvalue margin.
    Subgradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub method: Method,
    /// Accepted cone violation, relative to the constraint magnitude.
    pub cone_tol: f64,
    /// Accepted equality residual, relative to `1 + magnitude`.
    pub eq_tol: f64,
    /// Normalized margin at which the search stops early.
    pub stop_margin: f64,
    /// Radius bound on the reduced coordinates; `None` picks a data-scaled default.
    pub radius: Option<f64>,
    pub max_outer: usize,
    pub max_newton: usize,
    pub max_subgradient: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Barrier,
            cone_tol: 1e-9,
            eq_tol: 1e-9,
            stop_margin: 1e-6,
            radius: None,
            max_outer: 60,
            max_newton: 100,
            max_subgradient: 200_000,
        }
    }
}

/// Solution witness of a feasible [`LmiProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct LmiCertificate {
    /// Variable values indexed by [`VarId::index`].
    pub values: Vec<Mat>,
    /// Smallest `lambda_min(sign * expr) - margin` over the cone constraints.
    pub margin: f64,
    /// Largest Frobenius norm among the equality residuals.
    pub equality_residual: f64,
}

impl LmiCertificate {
    pub fn value(&self, v: VarId) -> &Mat {
        &self.values[v.index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// The best margin found stays below zero.
    MarginNegative,
    /// The equality constraints have no common solution.
    EqualitiesInconsistent,
    /// Iteration limits reached before a decision.
    BudgetExhausted,
    /// The search point fails the independent verifier.
    VerificationFailed,
}

/// Best point found when no certificate was produced. Not a proof of infeasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibleReport {
    pub best_margin: f64,
    pub values: Vec<Mat>,
    pub equality_residual: f64,
    pub reason: InfeasibleReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LmiOutcome {
    Feasible(LmiCertificate),
    Infeasible(InfeasibleReport),
}

impl LmiOutcome {
    pub fn certificate(&self) -> Option<&LmiCertificate> {
        match self {
            LmiOutcome::Feasible(c) => Some(c),
            LmiOutcome::Infeasible(_) => None,
        }
    }
    pub fn is_feasible(&self) -> bool {
        self.certificate().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    pub label: String,
    /// `lambda_min(sign * expr) - margin`.
    pub slack: f64,
    /// Smallest accepted slack.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityReport {
    pub label: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub cones: Vec<ConeReport>,
    pub equalities: Vec<EqualityReport>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.cones.iter().all(|c| c.pass) && self.equalities.iter().all(|e| e.pass)
    }

    pub fn min_slack(&self) -> f64 {
        self.cones.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.equalities.iter().map(|e| e.residual).fold(0.0, f64::max)
    }
}

/// Re-evaluates every constraint at `values` directly from the expressions.
///
/// A cone passes when its slack is at least `-cone_tol * magnitude`, an
/// equality when its residual is at most `eq_tol * (1 + magnitude)`, with the
/// magnitude `|C0| + sum |L||V||R|` taken at `values`.
pub fn verify_certificate(
    problem: &LmiProblem,
    values: &[Mat],
    cone_tol: f64,
    eq_tol: f64,
) -> Result<VerificationReport> {
    problem.validate()?;
    if values.len() != problem.vars.len() {
        return Err(dim_err("number of values differs from number of variables"));
    }
    for (v, x) in problem.vars.iter().zip(values) {
        if x.shape() != (v.rows, v.cols) {
            return Err(dim_err("decision value has the wrong shape"));
        }
        numerics::ensure_finite(x)?;
    }
    let mut cones = Vec::with_capacity(problem.cones.len());
    for c in &problem.cones {
        let raw = c.expr.eval(values)?;
        let signed = match c.sense {
            Sense::Psd => raw,
            Sense::Nsd => -raw,
        };
        let scale = c.expr.magnitude(values);
        let slack = symmetric_lambda_min(&signed) - c.strictness.margin();
        let threshold = -cone_tol * scale;
        cones.push(ConeReport { label: c.label.clone(), slack, threshold, pass: slack >= threshold });
    }
    let mut equalities = Vec::with_capacity(problem.equalities.len());
    for e in &problem.equalities {
        let residual = e.expr.eval(values)?.norm();
        let threshold = eq_tol * (1.0 + e.expr.magnitude(values));
        equalities.push(EqualityReport {
            label: e.label.clone(),
            residual,
            threshold,
            pass: residual <= threshold,
        });
    }
    Ok(VerificationReport { cones, equalities })
}

/// `lambda_min` of the symmetric part; `-inf` on a decomposition failure so the check fails.
fn symmetric_lambda_min(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    numerics::lambda_min(&numerics::symmetrize(m)).unwrap_or(f64::NEG_INFINITY)
}

/// Cone constraint restricted to the reduced coordinates and normalized:
/// `G(z) = G0 + sum_j z_j G_j`.
struct ReducedCone {
    g0: Mat,
    gj: Vec<Mat>,
}

impl ReducedCone {
    fn at(&self, z: &DVector<f64>) -> Mat {
        let mut m = self.g0.clone();
        for (j, g) in self.gj.iter().enumerate() {
            m += g * z[j];
        }
        m
    }
}

struct Reduced {
    x0: DVector<f64>,
    basis: Mat,
    cones: Vec<ReducedCone>,
}

/// Searches for a point satisfying every constraint of `problem`.
pub fn solve_feasibility(problem: &LmiProblem, opts: &SolverOptions) -> Result<LmiOutcome> {
    problem.validate()?;
    let coords = problem.coordinates();
    let nx = coords.len();

    let (x0, basis) = match eliminate_equalities(problem, &coords)? {
        Some(r) => r,
        None => {
            let values = problem.values_from(&DVector::zeros(nx));
            let residual = max_equality_residual(problem, &values)?;
            return Ok(LmiOutcome::Infeasible(InfeasibleReport {
                best_margin: f64::NEG_INFINITY,
                values,
                equality_residual: residual,
                reason: InfeasibleReason::EqualitiesInconsistent,
            }));
        }
    };

    let mut cones = Vec::with_capacity(problem.cones.len());
    for c in &problem.cones {
        let sign = match c.sense {
            Sense::Psd => 1.0,
            Sense::Nsd => -1.0,
        };
        let k = c.expr.shape().0;
        let fi: Vec<Mat> =
            coords.iter().map(|(v, e)| numerics::symmetrize(&c.expr.coefficient(*v, e)) * sign).collect();
        let mut g0 = numerics::symmetrize(&c.expr.constant) * sign;
        for (i, f) in fi.iter().enumerate() {
            g0 += f * x0[i];
        }
        g0 -= Mat::identity(k, k) * c.strictness.margin();
        let gj: Vec<Mat> = (0..basis.ncols())
            .map(|j| {
                let mut m = Mat::zeros(k, k);
                for (i, f) in fi.iter().enumerate() {
                    let w = basis[(i, j)];
                    if w != 0.0 {
                        m += f * w;
                    }
                }
                m
            })
            .collect();
        let scale = gj.iter().map(|g| g.norm()).fold(g0.norm(), f64::max).max(numerics::ABS_FLOOR);
        cones.push(ReducedCone { g0: g0 / scale, gj: gj.into_iter().map(|g| g / scale).collect() });
    }
    let reduced = Reduced { x0, basis, cones };

    let radius = opts.radius.unwrap_or(1e6 * reduced.x0.norm().max(1.0));
    let search = match opts.method {
        Method::Barrier => barrier(&reduced, radius, opts),
        Method::Subgradient => subgradient(&reduced, radius, opts),
    };
    let x = &reduced.x0 + &reduced.basis * &search.z;
    let values = problem.values_from(&x);
    let report = verify_certificate(problem, &values, opts.cone_tol, opts.eq_tol)?;
    let margin = report.min_slack();
    let equality_residual = report.max_residual();
    if search.t >= -opts.cone_tol && report.passed() {
        return Ok(LmiOutcome::Feasible(LmiCertificate { values, margin, equality_residual }));
    }
    let reason = if search.exhausted {
        InfeasibleReason::BudgetExhausted
    } else if search.t < -opts.cone_tol {
        InfeasibleReason::MarginNegative
    } else {
        InfeasibleReason::VerificationFailed
    };
    Ok(LmiOutcome::Infeasible(InfeasibleReport { best_margin: margin, values, equality_residual, reason }))
}

fn max_equality_residual(problem: &LmiProblem, values: &[Mat]) -> Result<f64> {
    let mut r: f64 = 0.0;
    for e in &problem.equalities {
        r = r.max(e.expr.eval(values)?.norm());
    }
    Ok(r)
}

/// Particular solution and orthonormal null-space basis of the stacked equalities.
/// `None` when they are inconsistent.
fn eliminate_equalities(
    problem: &LmiProblem,
    coords: &[(VarId, Mat)],
) -> Result<Option<(DVector<f64>, Mat)>> {
    let nx = coords.len();
    let rows: usize = problem.equalities.iter().map(|e| e.expr.shape().0 * e.expr.shape().1).sum();
    if rows == 0 {
        return Ok(Some((DVector::zeros(nx), Mat::identity(nx, nx))));
    }
    let mut a = Mat::zeros(rows, nx);
    let mut b = DVector::zeros(rows);
    let mut r0 = 0;
    for e in &problem.equalities {
        let (er, ec) = e.expr.shape();
        for (i, (v, basis)) in coords.iter().enumerate() {
            let f = e.expr.coefficient(*v, basis);
            for (k, val) in f.iter().enumerate() {
                a[(r0 + k, i)] = *val;
            }
        }
        for (k, val) in e.expr.constant.iter().enumerate() {
            b[r0 + k] = -*val;
        }
        r0 += er * ec;
    }
    if nx == 0 {
        let res = b.norm();
        let ok = res <= 1e-9 * (1.0 + res);
        return Ok(ok.then(|| (DVector::zeros(0), Mat::zeros(0, 0))));
    }
    let top = numerics::sigma_max(&a);
    let tol = 1e-10 * top.max(numerics::ABS_FLOOR);
    let svd = SVD::new(a.clone(), true, true);
    let x0 = svd.solve(&b, tol).map_err(|_| Error::NoConvergence("least squares"))?;
    let res = (&a * &x0 - &b).norm();
    if res > 1e-9 * (1.0 + b.norm() + top * x0.norm()) {
        return Ok(None);
    }
    let basis = numerics::null_space(&a, 1e-10);
    Ok(Some((x0, basis)))
}

struct Search {
    z: DVector<f64>,
    t: f64,
    exhausted: bool,
}

fn min_margin(cones: &[ReducedCone], z: &DVector<f64>) -> f64 {
    cones.iter().map(|c| symmetric_lambda_min(&c.at(z))).fold(f64::INFINITY, f64::min)
}

fn barrier(r: &Reduced, radius: f64, opts: &SolverOptions) -> Search {
    let nz = r.basis.ncols();
    let mut z = DVector::zeros(nz);
    let t0 = min_margin(&r.cones, &z);
    if r.cones.is_empty() || t0 >= opts.stop_margin {
        return Search { z, t: t0.min(1.0), exhausted: false };
    }
    let mut t = t0 - 1.0;
    let m_total = r.cones.iter().map(|c| c.g0.nrows()).sum::<usize>() as f64 + 1.0;
    let r2 = radius * radius;
    let mut tau = 1.0;
    let mut best = (z.clone(), t0);

    for _outer in 0..opts.max_outer {
        for _ in 0..opts.max_newton {
            let Some((grad, hess)) = barrier_derivatives(r, &z, t, tau, r2) else { break };
            let step = newton_step(&hess, &grad);
            let decrement = -grad.dot(&step);
            if !(decrement / 2.0 > 1e-10) {
                break;
            }
            let f0 = barrier_value(r, &z, t, tau, r2);
            let mut s = 1.0;
            loop {
                let zn = &z + step.rows(0, nz) * s;
                let tn = t + step[nz] * s;
                if barrier_value(r, &zn, tn, tau, r2) <= f0 - 0.25 * s * decrement {
                    z = zn;
                    t = tn;
                    break;
                }
                s *= 0.5;
                if s < 1e-20 {
                    break;
                }
            }
            if s < 1e-20 {
                break;
            }
            if t > best.1 {
                best = (z.clone(), t);
            }
            if t >= opts.stop_margin {
                return Search { z, t, exhausted: false };
            }
        }
        let actual = min_margin(&r.cones, &z);
        if actual > best.1 {
            best = (z.clone(), actual);
        }
        // The central point bounds the optimum by t + m / tau.
        if t + m_total / tau < -opts.cone_tol || m_total / tau < 1e-13 {
            return Search { z: best.0, t: best.1, exhausted: false };
        }
        tau *= 8.0;
    }
    Search { z: best.0, t: best.1, exhausted: best.1 < -opts.cone_tol }
}

fn barrier_value(r: &Reduced, z: &DVector<f64>, t: f64, tau: f64, r2: f64) -> f64 {
    let slack = r2 - z.norm_squared();
    if !(slack > 0.0) {
        return f64::INFINITY;
    }
    let mut val = -tau * t - fm::ln(slack);
    for c in &r.cones {
        let k = c.g0.nrows();
        let s = c.at(z) - Mat::identity(k, k) * t;
        match Cholesky::new(s) {
            Some(ch) => {
                let l = ch.l();
                for i in 0..k {
                    val -= 2.0 * fm::ln(l[(i, i)]);
                }
            }
            None => return f64::INFINITY,
        }
    }
    val
}

fn barrier_derivatives(
    r: &Reduced,
    z: &DVector<f64>,
    t: f64,
    tau: f64,
    r2: f64,
) -> Option<(DVector<f64>, Mat)> {
    let nz = z.len();
    let mut grad = DVector::zeros(nz + 1);
    let mut hess = Mat::zeros(nz + 1, nz + 1);
    grad[nz] = -tau;
    for c in &r.cones {
        let k = c.g0.nrows();
        let s = c.at(z) - Mat::identity(k, k) * t;
        let ch = Cholesky::new(s)?;
        let l_inv = ch.l().solve_lower_triangular(&Mat::identity(k, k))?;
        // W_a = L^{-1} G_a L^{-T}; gradient -tr(W_a), Hessian <W_a, W_b>.
        let mut w: Vec<Mat> = c.gj.iter().map(|g| &l_inv * g * l_inv.transpose()).collect();
        w.push(-(&l_inv * l_inv.transpose()));
        for a in 0..=nz {
            grad[a] -= w[a].trace();
            for b in a..=nz {
                let h = w[a].dot(&w[b]);
                hess[(a, b)] += h;
                if a != b {
                    hess[(b, a)] += h;
                }
            }
        }
    }
    let slack = r2 - z.norm_squared();
    if !(slack > 0.0) {
        return None;
    }
    for i in 0..nz {
        grad[i] += 2.0 * z[i] / slack;
        hess[(i, i)] += 2.0 / slack;
        for j in 0..nz {
            hess[(i, j)] += 4.0 * z[i] * z[j] / (slack * slack);
        }
    }
    Some((grad, hess))
}

fn newton_step(hess: &Mat, grad: &DVector<f64>) -> DVector<f64> {
    let mut h = hess.clone();
    let mut reg = 0.0;
    let base = (h.trace() / h.nrows().max(1) as f64).max(numerics::ABS_FLOOR);
    loop {
        if let Some(ch) = Cholesky::new(h.clone()) {
            return -ch.solve(grad);
        }
        reg = if reg == 0.0 { 1e-14 * base } else { reg * 100.0 };
        h = hess + Mat::identity(hess.nrows(), hess.nrows()) * reg;
        if reg > base {
            return -grad.clone() / base;
        }
    }
}

/// Normalized margin and a supergradient of `min_k lambda_min(G_k(z))`.
fn margin_supergradient(cones: &[ReducedCone], z: &DVector<f64>) -> (f64, DVector<f64>) {
    let mut best = f64::INFINITY;
    let mut grad = DVector::zeros(z.len());
    for c in cones {
        let m = numerics::symmetrize(&c.at(z));
        let Ok((vals, vecs)) = numerics::eig_symmetric_vectors(&m) else { continue };
        if vals[0] < best {
            best = vals[0];
            let v = vecs.column(0);
            for (j, g) in c.gj.iter().enumerate() {
                grad[j] = v.dot(&(g * v));
            }
        }
    }
    (best, grad)
}

fn subgradient(r: &Reduced, radius: f64, opts: &SolverOptions) -> Search {
    let nz = r.basis.ncols();
    let mut z = DVector::zeros(nz);
    let (mut f, mut g) = margin_supergradient(&r.cones, &z);
    if r.cones.is_empty() {
        return Search { z, t: 1.0, exhausted: false };
    }
    let mut best = (z.clone(), f);
    let mut delta = 1.0_f64.max(fm::abs(f));
    let mut last_progress = best.1;
    let mut since_progress = 0usize;
    for _ in 0..opts.max_subgradient {
        if best.1 >= opts.stop_margin {
            return Search { z: best.0, t: best.1, exhausted: false };
        }
        let gn = g.norm_squared();
        if !(gn > 0.0) {
            break;
        }
        let target = best.1 + delta;
        z += &g * ((target - f) / gn);
        let norm = z.norm();
        if norm > radius {
            z *= radius / norm;
        }
        (f, g) = margin_supergradient(&r.cones, &z);
        if f > best.1 {
            best = (z.clone(), f);
        }
        since_progress += 1;
        if since_progress.is_multiple_of(50) && best.1 <= last_progress + 1e-12 {
            delta *= 0.5;
        }
        if since_progress >= 500 {
            if best.1 - last_progress < 1e-10 {
                break;
            }
            last_progress = best.1;
            since_progress = 0;
        }
    }
    let exhausted = best.1 < -opts.cone_tol && since_progress < 500;
    Search { z: best.0, t: best.1, exhausted }
}

/// Smallest `tau >= 0` with `N + tau M >= 0`, found by doubling and bisection.
///
/// Requires `M >= 0`. Fails with [`Error::FinslerHypothesis`] when `N` is
/// not positive semidefinite on `ker M` or no finite `tau` is found.
pub fn finsler_tau(m: &Mat, n: &Mat) -> Result<f64> {
    numerics::ensure_square(m)?;
    numerics::ensure_square(n)?;
    if m.shape() != n.shape() {
        return Err(dim_err("finsler_tau: M and N differ in size"));
    }
    let (mv, vecs) = numerics::eig_symmetric_vectors(m)?;
    let n_sym = {
        numerics::eig_symmetric(n)?;
        numerics::symmetrize(n)
    };
    let m_scale = mv.last().map_or(0.0, |v| fm::abs(*v)).max(numerics::ABS_FLOOR);
    let n_scale = n_sym.norm().max(numerics::ABS_FLOOR);
    if mv.first().is_some_and(|&v| v < -1e-10 * m_scale) {
        return Err(param_err("finsler_tau: M is not positive semidefinite"));
    }
    let kernel: Vec<usize> = (0..mv.len()).filter(|&i| mv[i] <= 1e-10 * m_scale).collect();
    if !kernel.is_empty() {
        let v = Mat::from_fn(m.nrows(), kernel.len(), |r, c| vecs[(r, kernel[c])]);
        let projected = numerics::symmetrize(&(v.transpose() * &n_sym * &v));
        let (pv, pvecs) = numerics::eig_symmetric_vectors(&projected)?;
        if pv[0] < -1e-10 * n_scale {
            return Err(Error::FinslerHypothesis);
        }
        // Directions where N vanishes on ker M must also be decoupled from range M.
        let flat: Vec<usize> = (0..pv.len()).filter(|&i| pv[i] <= 1e-10 * n_scale).collect();
        if !flat.is_empty() {
            let w = &v * Mat::from_fn(kernel.len(), flat.len(), |r, c| pvecs[(r, flat[c])]);
            if (&n_sym * w).norm() > 1e-8 * n_scale {
                return Err(Error::FinslerHypothesis);
            }
        }
    }
    let ok = |tau: f64| -> Result<bool> { Ok(numerics::lambda_min(&(&n_sym + m * tau))? >= 0.0) };
    if ok(0.0)? {
        return Ok(0.0);
    }
    let mut hi = n_scale / m_scale;
    let limit = 1e12 * hi;
    while !ok(hi)? {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::FinslerHypothesis);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::from_rows;

    fn ni_lemma(a: &Mat, b: &Mat, c: &Mat) -> (LmiProblem, VarId) {
        let n = a.nrows();
        let mut p = LmiProblem::new();
        let y = p.symmetric(n);
        p.psd("Y", AffineExpr::var(y), Strictness::Margin(1e-10));
        p.nsd(
            "AY+YA'",
            AffineExpr::term(a.clone(), y, Mat::identity(n, n)).unwrap().plus_transpose().unwrap(),
            Strictness::NonStrict,
        );
        p.equal_zero(
            "B+AYC'",
            AffineExpr::constant(b.clone()).plus_term(a.clone(), y, c.transpose()).unwrap(),
        );
        (p, y)
    }

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn first_order_ni_lemma_feasible() {
        let (p, y) = ni_lemma(&scalar(-1.0), &scalar(1.0), &scalar(1.0));
        for method in [Method::Barrier, Method::Subgradient] {
            let opts = SolverOptions { method, ..Default::default() };
            let out = solve_feasibility(&p, &opts).unwrap();
            let cert = out.certificate().expect("feasible");
            assert!((cert.value(y)[(0, 0)] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn first_order_verifier() {
        let (p, _) = ni_lemma(&scalar(-1.0), &scalar(1.0), &scalar(1.0));
        assert!(verify_certificate(&p, &[scalar(1.0)], 1e-9, 1e-9).unwrap().passed());
        let bad = verify_certificate(&p, &[scalar(-1.0)], 1e-9, 1e-9).unwrap();
        assert!(!bad.passed());
        assert!(!bad.cones[0].pass);
    }

    #[test]
    fn unstable_first_order_infeasible() {
        let mut p = LmiProblem::new();
        let y = p.symmetric(1);
        p.psd("Y", AffineExpr::var(y), Strictness::Margin(1e-8));
        p.nsd("AY+YA'", AffineExpr::var(y).scale(2.0), Strictness::NonStrict);
        let out = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert!(!out.is_feasible());
    }

    #[test]
    fn inconsistent_equalities_reported() {
        let mut p = LmiProblem::new();
        let x = p.scalar();
        p.equal_zero("x-1", AffineExpr::constant(scalar(-1.0)).plus_term(scalar(1.0), x, scalar(1.0)).unwrap());
        p.equal_zero("x-2", AffineExpr::constant(scalar(-2.0)).plus_term(scalar(1.0), x, scalar(1.0)).unwrap());
        match solve_feasibility(&p, &SolverOptions::default()).unwrap() {
            LmiOutcome::Infeasible(r) => assert_eq!(r.reason, InfeasibleReason::EqualitiesInconsistent),
            LmiOutcome::Feasible(_) => panic!("expected infeasible"),
        }
    }

    #[test]
    fn transpose_and_congruence() {
        let mut p = LmiProblem::new();
        let m = p.full(1, 2);
        let e = AffineExpr::term(scalar(1.0), m, Mat::identity(2, 2)).unwrap();
        let et = e.transpose();
        let val = from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(et.eval(core::slice::from_ref(&val)).unwrap(), val.transpose());
        let q = from_rows(&[[2.0]]).unwrap();
        let c = AffineExpr::term(Mat::identity(2, 1), m, Mat::identity(2, 2))
            .unwrap()
            .plus_transpose()
            .unwrap();
        assert_eq!(c.shape(), (2, 2));
        let sq = AffineExpr::var(p.scalar()).congruence(&q).unwrap();
        assert_eq!(sq.eval(&[val, scalar(3.0)]).unwrap()[(0, 0)], 12.0);
    }

    #[test]
    fn finsler_examples() {
        let m = from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let n = from_rows(&[[-1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((finsler_tau(&m, &n).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(finsler_tau(&m, &Mat::identity(2, 2)).unwrap(), 0.0);
        let off = from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(finsler_tau(&m, &off), Err(Error::FinslerHypothesis));
        let indefinite_on_kernel = from_rows(&[[0.0, 0.0], [0.0, -1.0]]).unwrap();
        assert_eq!(finsler_tau(&m, &indefinite_on_kernel), Err(Error::FinslerHypothesis));
    }
}
