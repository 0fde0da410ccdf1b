//! State-space and modal system representations and interconnections.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{dim_err, param_err, Error, Result};
use crate::numerics::{self, block_diag, CMat, Mat};

/// Frobenius condition estimate of the balanced `sI - A` above which `eval` reports a pole.
pub const RESOLVENT_COND_LIMIT: f64 = 1e12;

/// Relative singular-value threshold for the controllability/observability rank tests.
pub const MINIMALITY_TOL: f64 = 1e-8;

/// Dense real realization `x' = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        numerics::ensure_square(&a)?;
        let n = a.nrows();
        if b.nrows() != n {
            return Err(dim_err(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(dim_err(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(dim_err(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for m in [&a, &b, &c, &d] {
            numerics::ensure_finite(m)?;
        }
        Ok(Self { a, b, c, d })
    }

    /// A memoryless gain (zero states).
    pub fn static_gain(d: Mat) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(Mat::zeros(0, 0), Mat::zeros(0, m), Mat::zeros(p, 0), d)
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn is_square(&self) -> bool {
        self.inputs() == self.outputs()
    }

    /// Transfer matrix `C (sI - A)^{-1} B + D` at a complex point.
    pub fn eval(&self, s: Complex64) -> Result<CMat> {
        let n = self.states();
        let d = numerics::to_complex(&self.d);
        if n == 0 {
            return Ok(d);
        }
        // The pole test runs on the balanced resolvent so that badly scaled
        // realizations are not mistaken for a pole.
        let t = numerics::balance(&self.a);
        let mut resolvent = CMat::from_fn(n, n, |i, j| Complex64::new(-self.a[(i, j)] * t[j] / t[i], 0.0));
        for i in 0..n {
            resolvent[(i, i)] += s;
        }
        let norm = resolvent.norm();
        let inv = resolvent.lu().try_inverse().ok_or(Error::NearPole)?;
        let cond = norm * inv.norm();
        if !(cond <= RESOLVENT_COND_LIMIT) {
            return Err(Error::NearPole);
        }
        let c = CMat::from_fn(self.outputs(), n, |i, j| Complex64::new(self.c[(i, j)] * t[j], 0.0));
        let b = CMat::from_fn(n, self.inputs(), |i, j| Complex64::new(self.b[(i, j)] / t[i], 0.0));
        Ok(c * inv * b + d)
    }

    /// Frequency response `P(jw)`.
    pub fn freq_response(&self, omega: f64) -> Result<CMat> {
        self.eval(Complex64::new(0.0, omega))
    }

    /// Parallel sum `P1(s) + P2(s)`.
    pub fn add(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(dim_err("add: input/output dimensions differ"));
        }
        StateSpace::new(
            block_diag(&self.a, &other.a),
            numerics::vstack(&self.b, &other.b)?,
            numerics::hstack(&self.c, &other.c)?,
            &self.d + &other.d,
        )
    }

    pub fn sub(&self, other: &StateSpace) -> Result<StateSpace> {
        self.add(&other.scaled(-1.0))
    }

    /// Output scaling `k P(s)`.
    pub fn scaled(&self, k: f64) -> StateSpace {
        StateSpace { a: self.a.clone(), b: self.b.clone(), c: &self.c * k, d: &self.d * k }
    }

    /// Realization of `P^T(-s)`: `(-A^T, C^T, -B^T, D^T)`.
    pub fn paraconjugate_transpose(&self) -> StateSpace {
        StateSpace {
            a: -self.a.transpose(),
            b: self.c.transpose(),
            c: -self.b.transpose(),
            d: self.d.transpose(),
        }
    }

    /// Dual realization `(A^T, C^T, B^T, D^T)` of `P^T(s)`.
    pub fn dual(&self) -> StateSpace {
        StateSpace {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
            d: self.d.transpose(),
        }
    }

    /// Realization of `P(s - eps)`, i.e. `A` replaced by `A + eps I`.
    pub fn shifted(&self, eps: f64) -> StateSpace {
        let n = self.states();
        StateSpace { a: &self.a + Mat::identity(n, n) * eps, ..self.clone() }
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        numerics::eig_general(&self.a)
    }

    /// `P(0) = D - C A^{-1} B`; an error when `A` is singular (pole at the origin).
    pub fn dc_gain(&self) -> Result<Mat> {
        if self.states() == 0 {
            return Ok(self.d.clone());
        }
        let x = numerics::solve(&self.a, &self.b)?;
        Ok(&self.d - &self.c * x)
    }

    /// `P(inf) = D`.
    pub fn inf_gain(&self) -> &Mat {
        &self.d
    }

    /// Dimension of the controllable subspace (orthogonal block-Krylov staircase).
    pub fn controllable_dim(&self) -> usize {
        krylov_dim(&self.a, &self.b)
    }

    pub fn observable_dim(&self) -> usize {
        krylov_dim(&self.a.transpose(), &self.c.transpose())
    }

    pub fn is_controllable(&self) -> bool {
        self.controllable_dim() == self.states()
    }

    pub fn is_observable(&self) -> bool {
        self.observable_dim() == self.states()
    }

    pub fn is_minimal(&self) -> bool {
        self.is_controllable() && self.is_observable()
    }

    /// Realization of `P(s) I_m` for a SISO `P`.
    pub fn diagonal_replicate(&self, m: usize) -> Result<StateSpace> {
        if self.inputs() != 1 || self.outputs() != 1 {
            return Err(dim_err("diagonal_replicate requires a SISO system"));
        }
        if m == 0 {
            return Err(param_err("replication order must be positive"));
        }
        let mut out = self.clone();
        for _ in 1..m {
            out = StateSpace::new(
                block_diag(&out.a, &self.a),
                block_diag(&out.b, &self.b),
                block_diag(&out.c, &self.c),
                block_diag(&out.d, &self.d),
            )?;
        }
        Ok(out)
    }
}

fn krylov_dim(a: &Mat, b: &Mat) -> usize {
    let n = a.nrows();
    if n == 0 {
        return 0;
    }
    let scale = a.norm().max(b.norm()).max(numerics::ABS_FLOOR);
    let tol = MINIMALITY_TOL * scale;
    let mut basis = Mat::zeros(n, 0);
    let mut frontier = b.clone();
    loop {
        // Remove the span already captured, then keep the significant directions.
        let projected = &frontier - &basis * (basis.transpose() * &frontier);
        if projected.ncols() == 0 {
            break;
        }
        let svd = nalgebra::SVD::new(projected.clone(), true, false);
        let u = svd.u.expect("requested U");
        let fresh: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol).collect();
        if fresh.is_empty() {
            break;
        }
        let new_cols = Mat::from_fn(n, fresh.len(), |r, c| u[(r, fresh[c])]);
        // Re-orthogonalize once against the accumulated basis.
        let new_cols = &new_cols - &basis * (basis.transpose() * &new_cols);
        let (q, _) = numerics::range_and_complement(&new_cols, 1e-10);
        basis = numerics::hstack(&basis, &q).expect("row counts match");
        if basis.ncols() >= n {
            return n;
        }
        frontier = a * q;
    }
    basis.ncols()
}

/// Sensor type of a modal model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// `psi psi^T / (s^2 + kappa s + omega^2)`
    Position,
    /// `s psi psi^T / (s^2 + kappa s + omega^2)`
    Velocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// Natural frequency in rad/s.
    pub omega: f64,
    /// Viscous damping coefficient in 1/s.
    pub kappa: f64,
    /// Mode shape at the colocated actuator/sensor pairs.
    pub psi: Vec<f64>,
}

/// Truncated modal expansion of a flexible structure with colocated pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalModel {
    channels: usize,
    modes: Vec<Mode>,
    output: OutputKind,
}

impl ModalModel {
    pub fn new(channels: usize, modes: Vec<Mode>, output: OutputKind) -> Result<Self> {
        if channels == 0 {
            return Err(param_err("modal model needs at least one channel"));
        }
        for (i, mode) in modes.iter().enumerate() {
            if !(mode.omega > 0.0 && mode.omega.is_finite()) {
                return Err(param_err(format!("mode {i}: omega must be positive")));
            }
            if !(mode.kappa > 0.0 && mode.kappa.is_finite()) {
                return Err(param_err(format!("mode {i}: kappa must be positive")));
            }
            if mode.psi.len() != channels {
                return Err(dim_err(format!(
                    "mode {i}: psi has {} entries, expected {channels}",
                    mode.psi.len()
                )));
            }
            if mode.psi.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { channels, modes, output })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }
    pub fn output(&self) -> OutputKind {
        self.output
    }

    /// Block-diagonal companion realization, one 2x2 block per mode.
    pub fn to_state_space(&self) -> StateSpace {
        let m = self.channels;
        let n = 2 * self.modes.len();
        let mut a = Mat::zeros(n, n);
        let mut b = Mat::zeros(n, m);
        let mut c = Mat::zeros(m, n);
        for (i, mode) in self.modes.iter().enumerate() {
            let k = 2 * i;
            a[(k, k + 1)] = 1.0;
            a[(k + 1, k)] = -mode.omega * mode.omega;
            a[(k + 1, k + 1)] = -mode.kappa;
            let col = match self.output {
                OutputKind::Position => k,
                OutputKind::Velocity => k + 1,
            };
            for (j, &p) in mode.psi.iter().enumerate() {
                b[(k + 1, j)] = p;
                c[(j, col)] = p;
            }
        }
        StateSpace { a, b, c, d: Mat::zeros(m, m) }
    }
}

/// Sign convention of a two-block feedback loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopSign {
    /// `u1 = w1 + y2`, `u2 = w2 + y1`
    Positive,
    /// `u1 = w1 - y2`, `u2 = w2 + y1`
    Negative,
}

/// Two-block feedback loop of `M` (p x m) and `N` (m x p).
#[derive(Debug, Clone)]
pub struct FeedbackLoop {
    pub m: StateSpace,
    pub n: StateSpace,
    pub sign: LoopSign,
}

impl FeedbackLoop {
    pub fn new(m: StateSpace, n: StateSpace, sign: LoopSign) -> Result<Self> {
        if m.outputs() != n.inputs() || m.inputs() != n.outputs() {
            return Err(dim_err("feedback loop: M must be p x m and N must be m x p"));
        }
        Ok(Self { m, n, sign })
    }

    /// Closed loop from `(w1, w2)` to `(y1, y2)`.
    pub fn closed_loop(&self) -> Result<StateSpace> {
        let (p, m) = (self.m.outputs(), self.m.inputs());
        let g = stack_diag(&self.m, &self.n);
        let sigma = match self.sign {
            LoopSign::Positive => 1.0,
            LoopSign::Negative => -1.0,
        };
        // Inputs (u1: m, u2: p), outputs (y1: p, y2: m).
        let mut f = Mat::zeros(m + p, p + m);
        for i in 0..m {
            f[(i, p + i)] = sigma;
        }
        for i in 0..p {
            f[(m + i, i)] = 1.0;
        }
        interconnect(&g, &Mat::identity(m + p, m + p), &f, &Mat::identity(p + m, p + m))
    }
}

fn stack_diag(x: &StateSpace, y: &StateSpace) -> StateSpace {
    StateSpace {
        a: block_diag(&x.a, &y.a),
        b: block_diag(&x.b, &y.b),
        c: block_diag(&x.c, &y.c),
        d: block_diag(&x.d, &y.d),
    }
}

/// Closes internal connections of `g`: inputs `u = E w + F y`, external outputs `z = H y`.
fn interconnect(g: &StateSpace, e: &Mat, f: &Mat, h: &Mat) -> Result<StateSpace> {
    let ny = g.outputs();
    let w = Mat::identity(ny, ny) - &g.d * f;
    let cond = numerics::condition_number(&w);
    if !(cond <= numerics::COND_LIMIT) {
        return Err(Error::IllPosed);
    }
    let w_inv = numerics::inverse(&w).map_err(|_| Error::IllPosed)?;
    let c_loop = &w_inv * &g.c;
    let d_loop = &w_inv * &g.d * e;
    StateSpace::new(
        &g.a + &g.b * f * &c_loop,
        &g.b * e + &g.b * f * &d_loop,
        h * c_loop,
        h * d_loop,
    )
}

/// Positive-feedback closed loop `T(s)` of `M` and `N`, from `(w1, w2)` to `(y1, y2)`.
pub fn positive_feedback(m: &StateSpace, n: &StateSpace) -> Result<StateSpace> {
    FeedbackLoop::new(m.clone(), n.clone(), LoopSign::Positive)?.closed_loop()
}

/// Redheffer star product of two partitioned `2k x 2k` systems.
///
/// `M` maps `(w1, v1)` to `(y1, e1)`, `N` maps `(e1, w2)` to `(v1, y2)`; the result
/// maps `(w1, w2)` to `(y1, y2)`.
pub fn star_product(m: &StateSpace, n: &StateSpace) -> Result<StateSpace> {
    let dim = m.inputs();
    if !m.is_square() || !n.is_square() || n.inputs() != dim || !dim.is_multiple_of(2) {
        return Err(dim_err("star product needs two square systems of equal even size"));
    }
    let k = dim / 2;
    let g = stack_diag(m, n);
    // Stacked inputs: w1 | v1 | e1 | w2 ; stacked outputs: y1 | e1 | v1 | y2.
    let mut e = Mat::zeros(4 * k, 2 * k);
    let mut f = Mat::zeros(4 * k, 4 * k);
    let mut h = Mat::zeros(2 * k, 4 * k);
    for i in 0..k {
        e[(i, i)] = 1.0;
        e[(3 * k + i, k + i)] = 1.0;
        f[(k + i, 2 * k + i)] = 1.0;
        f[(2 * k + i, k + i)] = 1.0;
        h[(i, i)] = 1.0;
        h[(k + i, 3 * k + i)] = 1.0;
    }
    interconnect(&g, &e, &f, &h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::from_rows;
    use alloc::vec;

    pub(crate) fn first_order() -> StateSpace {
        StateSpace::new(
            from_rows(&[[-1.0]]).unwrap(),
            from_rows(&[[1.0]]).unwrap(),
            from_rows(&[[1.0]]).unwrap(),
            from_rows(&[[0.0]]).unwrap(),
        )
        .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_first_order_at_origin() {
        let g = first_order().eval(c(0.0, 0.0)).unwrap();
        assert!((g[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_survives_skewed_realization() {
        // 1 / (s^2 + 0.1 s + 1) with the coupling split as 1e7 * 1e-7.
        let sys = StateSpace::new(
            from_rows(&[[0.0, 1e7], [-1e-7, -0.1]]).unwrap(),
            from_rows(&[[0.0], [1e-7]]).unwrap(),
            from_rows(&[[1.0, 0.0]]).unwrap(),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let g = sys.freq_response(0.99).unwrap()[(0, 0)];
        let expected = Complex64::new(1.0, 0.0) / Complex64::new(1.0 - 0.99 * 0.99, 0.099);
        assert!((g - expected).norm() < 1e-9 * expected.norm());
    }

    #[test]
    fn eval_at_pole_fails() {
        assert_eq!(first_order().eval(c(-1.0, 0.0)), Err(Error::NearPole));
    }

    #[test]
    fn single_mode_position_and_velocity() {
        let mode = Mode { omega: 1.0, kappa: 1.0, psi: vec![1.0] };
        let pos = ModalModel::new(1, vec![mode.clone()], OutputKind::Position).unwrap().to_state_space();
        let at_j = pos.eval(c(0.0, 1.0)).unwrap()[(0, 0)];
        assert!((at_j - c(0.0, -1.0)).norm() < 1e-14);
        let vel = ModalModel::new(1, vec![mode], OutputKind::Velocity).unwrap().to_state_space();
        assert!(vel.dc_gain().unwrap()[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn modal_invariants_enforced() {
        let bad = Mode { omega: 0.0, kappa: 1.0, psi: vec![1.0] };
        assert!(ModalModel::new(1, vec![bad], OutputKind::Position).is_err());
        let short = Mode { omega: 1.0, kappa: 1.0, psi: vec![1.0] };
        assert!(ModalModel::new(2, vec![short], OutputKind::Position).is_err());
    }

    #[test]
    fn add_examples() {
        let zero = StateSpace::static_gain(Mat::zeros(1, 1)).unwrap();
        let g = first_order();
        let s = c(0.3, 0.7);
        assert!((g.add(&zero).unwrap().eval(s).unwrap() - g.eval(s).unwrap()).norm() < 1e-15);
        let half = StateSpace::new(
            from_rows(&[[-2.0]]).unwrap(),
            from_rows(&[[1.0]]).unwrap(),
            from_rows(&[[1.0]]).unwrap(),
            from_rows(&[[0.0]]).unwrap(),
        )
        .unwrap();
        let dc = g.add(&half).unwrap().eval(c(0.0, 0.0)).unwrap()[(0, 0)];
        assert!((dc - c(1.5, 0.0)).norm() < 1e-15);
        let wide = StateSpace::static_gain(Mat::zeros(1, 2)).unwrap();
        assert!(g.add(&wide).is_err());
    }

    #[test]
    fn paraconjugate_of_first_order() {
        let g = first_order();
        let phi = g.sub(&g.paraconjugate_transpose()).unwrap();
        // 2s/(s^2-1) at s = j is -j.
        let v = phi.eval(c(0.0, 1.0)).unwrap()[(0, 0)];
        assert!((v - c(0.0, -1.0)).norm() < 1e-14);
        let d = from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let st = StateSpace::static_gain(d.clone()).unwrap().paraconjugate_transpose();
        assert_eq!(st.d(), &d.transpose());
    }

    #[test]
    fn positive_feedback_with_static_gain() {
        let g = first_order();
        let two = StateSpace::static_gain(from_rows(&[[2.0]]).unwrap()).unwrap();
        let t = positive_feedback(&g, &two).unwrap();
        let poles = t.poles().unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn positive_feedback_with_zero_gain() {
        let g = first_order();
        let zero = StateSpace::static_gain(Mat::zeros(1, 1)).unwrap();
        let t = positive_feedback(&g, &zero).unwrap();
        let s = c(0.2, 1.3);
        let tv = t.eval(s).unwrap();
        assert!((tv[(0, 0)] - g.eval(s).unwrap()[(0, 0)]).norm() < 1e-15);
        assert!(tv[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn algebraic_loop_rejected() {
        let one = StateSpace::static_gain(from_rows(&[[1.0]]).unwrap()).unwrap();
        assert_eq!(positive_feedback(&one, &one).unwrap_err(), Error::IllPosed);
    }

    #[test]
    fn dc_and_inf_gain() {
        let g = first_order();
        assert_eq!(g.poles().unwrap(), vec![c(-1.0, 0.0)]);
        assert!((g.dc_gain().unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(g.inf_gain()[(0, 0)], 0.0);
        let integ = StateSpace::new(
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::zeros(1, 1),
        )
        .unwrap();
        assert!(integ.dc_gain().is_err());
    }

    #[test]
    fn minimality() {
        let mode = Mode { omega: 2.0, kappa: 0.3, psi: vec![1.0] };
        let single = ModalModel::new(1, vec![mode.clone()], OutputKind::Position).unwrap();
        assert!(single.to_state_space().is_minimal());
        let twice = ModalModel::new(1, vec![mode.clone(), mode], OutputKind::Position).unwrap();
        let ss = twice.to_state_space();
        assert!(!ss.is_minimal());
        assert_eq!(ss.controllable_dim(), 2);
    }

    #[test]
    fn replicate_first_order() {
        let r = first_order().diagonal_replicate(2).unwrap();
        let dc = r.eval(c(0.0, 0.0)).unwrap();
        assert!((dc - CMat::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn dimension_checks() {
        let bad = StateSpace::new(Mat::zeros(2, 2), Mat::zeros(1, 1), Mat::zeros(1, 2), Mat::zeros(1, 1));
        assert!(matches!(bad, Err(Error::Dimension(_))));
        let nan = StateSpace::new(
            from_rows(&[[f64::NAN]]).unwrap_or(Mat::from_element(1, 1, f64::NAN)),
            Mat::zeros(1, 1),
            Mat::zeros(1, 1),
            Mat::zeros(1, 1),
        );
        assert_eq!(nan, Err(Error::NonFinite));
    }
}
