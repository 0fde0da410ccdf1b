//! Generators, reference systems and property cases shared by the
//! property suites and the acceptance target.
#![allow(dead_code)]

use nicontrol::analysis::{self, FrequencyGrid, NI_TOL, SNI_STRICT_TOL};
use nicontrol::controllers::{self, IrcParams};
use nicontrol::lmi;
use nicontrol::numerics::{self, from_rows, CMat, Mat};
use nicontrol::stability::{self, DcConclusion};
use nicontrol::{lti, LoopSign, ModalModel, Mode, OutputKind, StateSpace};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence, RngAlgorithm, RngSeed, TestCaseError, TestRunner};

pub type CaseResult = Result<(), TestCaseError>;

pub const CASES: u32 = 64;

pub fn config(seed: u64) -> Config {
    Config {
        cases: CASES,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        max_global_rejects: 4096,
        ..Config::default()
    }
}

pub fn runner(seed: u64) -> TestRunner {
    TestRunner::new(config(seed))
}

// ---------------------------------------------------------------------------
// Reference systems

pub fn gain(k: f64) -> StateSpace {
    StateSpace::static_gain(from_rows(&[[k]]).unwrap()).unwrap()
}

/// `k / (s - pole)`
pub fn first_order(k: f64, pole: f64) -> StateSpace {
    StateSpace::new(
        from_rows(&[[pole]]).unwrap(),
        from_rows(&[[1.0]]).unwrap(),
        from_rows(&[[k]]).unwrap(),
        Mat::zeros(1, 1),
    )
    .unwrap()
}

/// `(2s^2 + s + 1) / ((s^2 + 2s + 5)(s + 1)(2s + 1))`
pub fn second_order() -> StateSpace {
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

/// `s / (s^2 + s + 1)`
pub fn velocity_mode() -> StateSpace {
    ModalModel::new(1, vec![Mode { omega: 1.0, kappa: 1.0, psi: vec![1.0] }], OutputKind::Velocity)
        .unwrap()
        .to_state_space()
}

/// Ten position modes at `100 k` rad/s, damping coefficient 2.
pub fn ten_mode_plant() -> StateSpace {
    let modes = (1..=10).map(|k| Mode { omega: 100.0 * k as f64, kappa: 2.0, psi: vec![1.0] }).collect();
    ModalModel::new(1, modes, OutputKind::Position).unwrap().to_state_space()
}

pub fn modal_sum(m: &ModalModel, s: Complex64) -> CMat {
    let k = m.channels();
    let mut out = CMat::zeros(k, k);
    for mode in m.modes() {
        let den = s * s + s * mode.kappa + mode.omega * mode.omega;
        let num = match m.output() {
            OutputKind::Position => Complex64::new(1.0, 0.0),
            OutputKind::Velocity => s,
        };
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] += num * mode.psi[i] * mode.psi[j] / den;
            }
        }
    }
    out
}

pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

// ---------------------------------------------------------------------------
// Generators

fn mode_strategy(channels: usize) -> impl Strategy<Value = Mode> {
    (0.5f64..20.0, 0.05f64..2.0, prop::collection::vec(-1.0f64..1.0, channels))
        .prop_map(|(omega, kappa, psi)| Mode { omega, kappa, psi })
}

/// Random modal model with `channels` channels and `modes` modes.
pub fn modal(
    channels: std::ops::RangeInclusive<usize>,
    modes: std::ops::RangeInclusive<usize>,
    output: OutputKind,
) -> impl Strategy<Value = ModalModel> {
    (channels, modes).prop_flat_map(move |(c, n)| {
        prop::collection::vec(mode_strategy(c), n)
            .prop_map(move |modes| ModalModel::new(c, modes, output).unwrap())
    })
}

/// Position modal model whose first `channels` mode shapes are near the unit
/// vectors, so the shapes span and the model is SNI.
pub fn spanning_modal(
    channels: std::ops::RangeInclusive<usize>,
    extra: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = ModalModel> {
    (channels, extra).prop_flat_map(|(c, e)| {
        (prop::collection::vec(mode_strategy(c), c + e), 0.5f64..1.5).prop_map(move |(mut modes, scale)| {
            for (i, m) in modes.iter_mut().take(c).enumerate() {
                for v in m.psi.iter_mut() {
                    *v *= 0.2;
                }
                m.psi[i] += scale;
            }
            ModalModel::new(c, modes, OutputKind::Position).unwrap()
        })
    })
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn spd(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Mat> {
    (prop::collection::vec(-1.0f64..1.0, n * n), prop::collection::vec(lo..hi, n)).prop_map(move |(raw, eig)| {
        let q = Mat::from_row_slice(n, n, &raw).qr().q();
        let mut d = Mat::zeros(n, n);
        for (i, e) in eig.into_iter().enumerate() {
            d[(i, i)] = e;
        }
        numerics::symmetrize(&(&q * d * q.transpose()))
    })
}

pub fn symmetric(n: usize, scale: f64) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-scale..scale, n * n)
        .prop_map(move |raw| numerics::symmetrize(&Mat::from_row_slice(n, n, &raw)))
}

// ---------------------------------------------------------------------------
// Property cases

fn sweep_ni(sys: &StateSpace) -> bool {
    analysis::check_ni_sweep(sys, &FrequencyGrid::default_for(sys).unwrap(), NI_TOL).unwrap().holds
}

fn sweep_sni(sys: &StateSpace) -> bool {
    analysis::check_sni_sweep(sys, &FrequencyGrid::default_for(sys).unwrap(), NI_TOL, SNI_STRICT_TOL)
        .unwrap()
        .holds
}

/// NI + NI is NI; SNI + NI is SNI.
pub fn additivity_case((ni, sni, other): (ModalModel, ModalModel, ModalModel)) -> CaseResult {
    let a = ni.to_state_space();
    let b = other.to_state_space();
    prop_assert!(sweep_ni(&a) && sweep_ni(&b));
    prop_assert!(sweep_ni(&a.add(&b).unwrap()));
    let s = sni.to_state_space();
    prop_assert!(sweep_sni(&s));
    prop_assert!(sweep_sni(&s.add(&b).unwrap()));
    Ok(())
}

pub fn additivity_strategy() -> impl Strategy<Value = (ModalModel, ModalModel, ModalModel)> {
    (1usize..=3).prop_flat_map(|c| {
        (
            modal(c..=c, 1..=4, OutputKind::Position),
            spanning_modal(c..=c, 0..=2),
            modal(c..=c, 1..=4, OutputKind::Position),
        )
    })
}

/// `N` scaled so that `lambda_max(M(0) N(0)) = target`.
fn scale_to(m0: &Mat, n: &StateSpace, target: f64) -> Option<StateSpace> {
    let l = numerics::eig_general(&(m0 * n.dc_gain().ok()?)).ok()?.iter().map(|z| z.re).fold(0.0, f64::max);
    (l > 1e-9).then(|| n.scaled(target / l))
}

/// Positive feedback of internally stable NI pairs is NI.
pub fn positive_feedback_case((m, n, target): (ModalModel, ModalModel, f64)) -> CaseResult {
    let m = m.to_state_space();
    let n0 = n.to_state_space();
    let Some(n) = scale_to(&m.dc_gain().unwrap(), &n0, target) else {
        return Err(TestCaseError::reject("degenerate DC gain"));
    };
    let st = stability::internal_stability(&m, &n, LoopSign::Positive).unwrap();
    prop_assume!(st.stable);
    let t = lti::positive_feedback(&m, &n).unwrap();
    prop_assert!(sweep_ni(&t), "closed loop not NI");
    Ok(())
}

pub fn pair_strategy(channels: usize) -> impl Strategy<Value = (ModalModel, ModalModel, f64)> {
    (
        modal(channels..=channels, 1..=3, OutputKind::Position),
        spanning_modal(channels..=channels, 0..=1),
        0.1f64..0.9,
    )
}

/// Star product of internally stable NI two-ports is NI.
pub fn star_product_case((m, n, target): (ModalModel, ModalModel, f64)) -> CaseResult {
    let m = m.to_state_space();
    let n0 = n.to_state_space();
    let m22 = m.dc_gain().unwrap()[(1, 1)];
    let n11 = n0.dc_gain().unwrap()[(0, 0)];
    prop_assume!(m22 * n11 > 1e-9);
    let n = n0.scaled(target / (m22 * n11));
    let t = match lti::star_product(&m, &n) {
        Ok(t) => t,
        Err(nicontrol::Error::IllPosed) => return Err(TestCaseError::reject("ill-posed")),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    let poles = t.poles().unwrap();
    prop_assume!(poles.iter().all(|p| p.re < -1e-6));
    prop_assert!(sweep_ni(&t), "star product not NI");
    Ok(())
}

#[derive(Debug, Clone)]
pub enum Construction {
    First { eps: f64, alpha: f64, m: usize },
    Second { eps: f64, alpha: f64, beta: f64, m: usize },
    Replicated { model: ModalModel, m: usize },
}

pub fn construction_strategy() -> impl Strategy<Value = Construction> {
    prop_oneof![
        (0.01f64..10.0, 0.1f64..10.0, 1usize..=3)
            .prop_map(|(eps, alpha, m)| Construction::First { eps, alpha, m }),
        (0.01f64..10.0, 0.1f64..10.0, 0.1f64..10.0, 1usize..=3)
            .prop_filter("alpha != beta", |(_, a, b, _)| (a - b).abs() > 1e-3)
            .prop_map(|(eps, alpha, beta, m)| Construction::Second { eps, alpha, beta, m }),
        (spanning_modal(1..=1, 0..=2), 1usize..=3).prop_map(|(model, m)| Construction::Replicated { model, m }),
    ]
}

/// `eps / (s + alpha) I`, `eps / ((s + alpha)(s + beta)) I` and replicated SISO SNI systems are SNI.
pub fn construction_case(inst: Construction) -> CaseResult {
    let sys = match &inst {
        Construction::First { eps, alpha, m } => first_order(*eps, -alpha).diagonal_replicate(*m).unwrap(),
        Construction::Second { eps, alpha, beta, m } => {
            let a = from_rows(&[[-alpha, 0.0], [1.0, -beta]]).unwrap();
            let siso = StateSpace::new(
                a,
                from_rows(&[[*eps], [0.0]]).unwrap(),
                from_rows(&[[0.0, 1.0]]).unwrap(),
                Mat::zeros(1, 1),
            )
            .unwrap();
            siso.diagonal_replicate(*m).unwrap()
        }
        Construction::Replicated { model, m } => model.to_state_space().diagonal_replicate(*m).unwrap(),
    };
    let v = analysis::check_sni_zeros(&sys).unwrap();
    prop_assert!(v.holds, "{inst:?} not SNI: {:?}", v.reason);
    Ok(())
}

pub fn irc_strategy() -> impl Strategy<Value = (Mat, Mat, f64)> {
    (1usize..=3).prop_flat_map(|m| (spd(m, 0.1, 10.0), spd(m, 0.1, 10.0), 0.1f64..10.0))
}

/// `irc(Gamma, Phi)` is SNI, and the explicit certificate of the augmented
/// realization passes the NI-lemma constraints.
pub fn irc_certificate_case((gamma, phi, alpha): (Mat, Mat, f64)) -> CaseResult {
    let sys = controllers::irc(&IrcParams { gamma: gamma.clone(), phi: phi.clone() }).unwrap();
    let v = analysis::check_sni_zeros(&sys).unwrap();
    prop_assert!(v.holds, "irc not SNI: {:?}", v.reason);

    let m = gamma.nrows();
    // A~Y~ + Y~A~' = -[[2G, 0], [0, 0]] - eps Q for the candidate below.
    let k = 1.0 / alpha + 1.0;
    let gp = &gamma * &phi;
    let eye = Mat::identity(m, m);
    let q11 = (&gp + gp.transpose()) * k;
    let q12 = (&gp + &eye * alpha) * k;
    let q = numerics::vstack(
        &numerics::hstack(&q11, &q12).unwrap(),
        &numerics::hstack(&q12.transpose(), &(&eye * (2.0 * alpha))).unwrap(),
    )
    .unwrap();
    let g2 = numerics::block_diag(&(&gamma * 2.0), &Mat::zeros(m, m));
    let tau = lmi::finsler_tau(&g2, &q).unwrap();
    let phi_inv = numerics::inverse(&phi).unwrap();
    let bound = alpha * numerics::lambda_min(&phi_inv).unwrap() / k;
    let eps = 0.5 * (1.0 / tau.max(1e-300)).min(bound);
    let Ok((a, b, c)) = analysis::sni_augmented_realization(&sys, alpha, None, eps) else {
        return Err(TestCaseError::reject("alpha is a pole"));
    };
    let y = numerics::vstack(
        &numerics::hstack(&(&phi_inv + &eye * (eps * k)), &(&eye * (eps * k))).unwrap(),
        &numerics::hstack(&(&eye * (eps * k)), &(&eye * eps)).unwrap(),
    )
    .unwrap();
    let (problem, _) = analysis::ni_lemma_problem(&a, &b, &c).unwrap();
    let report = lmi::verify_certificate(&problem, &[y], 1e-9, 1e-9).unwrap();
    prop_assert!(report.passed(), "{report:?}");
    Ok(())
}

/// `M(0) - M(inf) >= 0` for NI, `N(0) - N(inf) > 0` for SNI, and
/// `eig(M(0) N(0))` real when `N(inf) >= 0`.
pub fn ordering_case((m, dm, n, dn): (ModalModel, Mat, ModalModel, Mat)) -> CaseResult {
    let mm = m.to_state_space().add(&StateSpace::static_gain(dm.clone()).unwrap()).unwrap();
    let nn = n.to_state_space().add(&StateSpace::static_gain(dn.clone()).unwrap()).unwrap();
    prop_assert!(sweep_ni(&mm));
    prop_assert!(sweep_sni(&nn));
    let m0 = mm.dc_gain().unwrap();
    let n0 = nn.dc_gain().unwrap();
    let tol = 1e-10 * (1.0 + m0.norm());
    prop_assert!(numerics::lambda_min(&numerics::symmetrize(&(&m0 - &dm))).unwrap() >= -tol);
    prop_assert!(numerics::lambda_min(&numerics::symmetrize(&(&n0 - &dn))).unwrap() > 0.0);
    let eig = numerics::eig_general(&(&m0 * &n0)).unwrap();
    let scale = 1.0 + (&m0 * &n0).norm();
    let imag = eig.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    prop_assert!(imag <= 1e-8 * scale, "imaginary residual {imag:e}");
    Ok(())
}

pub fn ordering_strategy() -> impl Strategy<Value = (ModalModel, Mat, ModalModel, Mat)> {
    (1usize..=3).prop_flat_map(|c| {
        (
            modal(c..=c, 1..=4, OutputKind::Position),
            symmetric(c, 2.0),
            spanning_modal(c..=c, 0..=2),
            spd(c, 0.0, 2.0),
        )
    })
}

/// `lambda_min(j(P - P*)) * w = lambda_min(Q + Q*)` with `Q(s) = s (P(s) - P(inf))`,
/// and the NI sweep of `P` agrees with the PR sweep of `Q`.
pub fn rotation_case((model, flip): (ModalModel, bool)) -> CaseResult {
    let p = if flip { model.to_state_space().scaled(-1.0) } else { model.to_state_space() };
    let q = StateSpace::new(p.a().clone(), p.b().clone(), p.c() * p.a(), p.c() * p.b()).unwrap();
    let grid = FrequencyGrid::default_for(&p).unwrap();
    for &w in grid.points().iter().step_by(37) {
        let h = analysis::hermitian_imaginary_part(&p, w).unwrap();
        let qw = q.freq_response(w).unwrap();
        let pr = &qw + qw.adjoint();
        let lh = numerics::eig_hermitian(&h).unwrap()[0] * w;
        let lq = numerics::eig_hermitian(&pr).unwrap()[0];
        prop_assert!((lh - lq).abs() <= 1e-9 * (1.0 + qw.norm()), "w = {w}: {lh} vs {lq}");
    }
    let ni = analysis::check_ni_sweep(&p, &grid, NI_TOL).unwrap().holds;
    let pr = analysis::check_positive_real(&q, &grid, NI_TOL).unwrap().holds;
    prop_assert_eq!(ni, !flip);
    prop_assert_eq!(ni, pr);
    Ok(())
}

pub fn rotation_strategy() -> impl Strategy<Value = (ModalModel, bool)> {
    (modal(1..=3, 1..=4, OutputKind::Position), any::<bool>())
}

/// The DC-gain verdict matches the direct pole test across `lambda_max = 1`.
pub fn dc_verdict_case((model, sign, exponent): (ModalModel, bool, f64)) -> CaseResult {
    let c = model.channels();
    let n = first_order(1.0, -1.0).diagonal_replicate(c).unwrap();
    let m0 = model.to_state_space();
    let target = if sign { 1.0 + 10f64.powf(exponent) } else { 1.0 - 10f64.powf(exponent) };
    prop_assume!((target - 1.0).abs() > stability::MARGINAL_BAND);
    let l = numerics::eig_general(&(m0.dc_gain().unwrap() * n.dc_gain().unwrap()))
        .unwrap()
        .iter()
        .map(|z| z.re)
        .fold(0.0, f64::max);
    prop_assume!(l > 1e-9);
    let m = m0.scaled(target / l);
    let r = stability::theorem5_verdict(&m, &n).unwrap();
    prop_assert!(r.theorem_applies, "{:?}", r.notes);
    let expected = if target < 1.0 { DcConclusion::Stable } else { DcConclusion::Unstable };
    prop_assert_eq!(r.conclusion, Some(expected));
    prop_assert_eq!(r.internally_stable, target < 1.0, "lambda_max = {:?}", r.lambda_max_dc);
    Ok(())
}

pub fn dc_verdict_strategy() -> impl Strategy<Value = (ModalModel, bool, f64)> {
    (modal(1..=2, 1..=3, OutputKind::Position), any::<bool>(), -3.0f64..-0.3)
}

/// `eval` of the modal realization equals the explicit modal sum.
pub fn modal_oracle_case((model, re, im): (ModalModel, f64, f64)) -> CaseResult {
    let s = Complex64::new(re, im);
    let sys = model.to_state_space();
    let got = sys.eval(s).unwrap();
    let want = modal_sum(&model, s);
    prop_assert!(rel_err(&got, &want) <= 1e-10, "relative error {:e}", rel_err(&got, &want));
    Ok(())
}

pub fn modal_oracle_strategy() -> impl Strategy<Value = (ModalModel, f64, f64)> {
    let output = prop_oneof![Just(OutputKind::Position), Just(OutputKind::Velocity)];
    output.prop_flat_map(|o| (modal(1..=3, 1..=6, o), 0.05f64..3.0, -30.0f64..30.0))
}
