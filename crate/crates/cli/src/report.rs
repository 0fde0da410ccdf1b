//! Serializable views of library results.

use nicontrol::analysis::{FailReason, FreqVerdict, LmiVerdict, ZerosVerdict};
use nicontrol::controllers::{IrcDesign, IrcObjective};
use nicontrol::lmi::VerificationReport;
use nicontrol::stability::{DcConclusion, StabilityReport};
use nicontrol::synthesis::{Attempt, ClosedLoopReport, SynthesisOutcome};
use num_complex::Complex64;
use serde::Serialize;

use crate::csv::Table;
use crate::model::from_mat;

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct C64 {
    pub re: f64,
    pub im: f64,
}

pub fn complex_list(z: &[Complex64]) -> Vec<C64> {
    z.iter().map(|z| C64 { re: z.re, im: z.im }).collect()
}

fn reason(r: Option<FailReason>) -> Option<String> {
    r.map(|r| format!("{r:?}"))
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub holds: bool,
    pub worst_frequency: f64,
    pub worst_margin: f64,
    pub points: usize,
    pub reason: Option<String>,
    pub shift: Option<f64>,
    pub notes: Vec<String>,
}

pub fn sweep(v: &FreqVerdict) -> Sweep {
    Sweep {
        holds: v.holds,
        worst_frequency: v.worst_frequency,
        worst_margin: v.worst_margin,
        points: v.grid.len(),
        reason: reason(v.reason),
        shift: v.shift,
        notes: v.notes.clone(),
    }
}

#[derive(Debug, Serialize)]
pub struct Lmi {
    pub holds: bool,
    pub minimal: bool,
    #[serde(rename = "Y")]
    pub y: Option<Vec<Vec<f64>>>,
    pub margin: Option<f64>,
    pub reason: Option<String>,
    pub notes: Vec<String>,
}

pub fn lmi_verdict(v: &LmiVerdict) -> Lmi {
    Lmi {
        holds: v.holds,
        minimal: v.minimal,
        y: v.y.as_ref().map(from_mat),
        margin: v.certificate.as_ref().map(|c| c.margin),
        reason: reason(v.reason),
        notes: v.notes.clone(),
    }
}

#[derive(Debug, Serialize)]
pub struct Zeros {
    pub holds: bool,
    pub zeros: Vec<C64>,
    pub axis_zeros: Vec<C64>,
    pub reason: Option<String>,
    pub used_sweep_fallback: bool,
}

pub fn zeros(v: &ZerosVerdict) -> Zeros {
    Zeros {
        holds: v.holds,
        zeros: complex_list(&v.zeros),
        axis_zeros: complex_list(&v.axis_zeros),
        reason: reason(v.reason),
        used_sweep_fallback: v.fallback.is_some(),
    }
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub states: usize,
    pub channels: usize,
    pub poles: Vec<C64>,
    pub ni: Sweep,
    pub ni_lmi: Lmi,
    pub sni: Sweep,
    pub sni_zeros: Zeros,
    pub pr: Sweep,
    pub spr: Sweep,
}

#[derive(Debug, Serialize)]
pub struct Stability {
    pub stable: bool,
    pub m_is_ni: bool,
    pub n_is_sni: bool,
    pub boundary_product_zero: bool,
    pub n_inf_psd: bool,
    pub lambda_max_dc: Option<f64>,
    pub dc_imag_residual: Option<f64>,
    pub theorem_applies: bool,
    pub conclusion: Option<String>,
    pub internally_stable: bool,
    pub closed_loop_poles: Vec<C64>,
    pub notes: Vec<String>,
}

pub fn stability(r: &StabilityReport) -> Stability {
    Stability {
        stable: r.stable(),
        m_is_ni: r.m_is_ni,
        n_is_sni: r.n_is_sni,
        boundary_product_zero: r.boundary_product_zero,
        n_inf_psd: r.n_inf_psd,
        lambda_max_dc: r.lambda_max_dc,
        dc_imag_residual: r.dc_imag_residual,
        theorem_applies: r.theorem_applies,
        conclusion: r.conclusion.map(|c| {
            String::from(match c {
                DcConclusion::Stable => "stable",
                DcConclusion::Unstable => "unstable",
                DcConclusion::Marginal => "marginal",
            })
        }),
        internally_stable: r.internally_stable,
        closed_loop_poles: complex_list(&r.closed_loop_poles),
        notes: r.notes.clone(),
    }
}

#[derive(Debug, Serialize)]
pub struct Irc {
    pub gamma_star: f64,
    pub phi: f64,
    pub margin: f64,
    pub objective: &'static str,
    pub tracked_pole: C64,
    pub damping_ratio: f64,
    pub decay_rate: f64,
    pub open_loop_damping_ratio: f64,
    pub locus_points: usize,
    pub stability: Stability,
}

pub fn irc_design(d: &IrcDesign, phi: f64, margin: f64, verdict: &StabilityReport) -> Irc {
    Irc {
        gamma_star: d.gamma_star,
        phi,
        margin,
        objective: match d.objective {
            IrcObjective::DecayRate => "decay",
            IrcObjective::DampingRatio => "damping",
        },
        tracked_pole: C64 { re: d.tracked_pole.re, im: d.tracked_pole.im },
        damping_ratio: d.damping_ratio,
        decay_rate: d.decay_rate,
        open_loop_damping_ratio: d.open_loop_damping_ratio,
        locus_points: d.locus.len(),
        stability: stability(verdict),
    }
}

/// Columns: gamma, pole_index, re, im, zeta. The tracked branch keeps its index across rows.
pub fn locus_csv(d: &IrcDesign) -> String {
    let mut t = Table::new(&["gamma".into(), "pole_index".into(), "re".into(), "im".into(), "zeta".into()]);
    for p in &d.locus {
        for (i, z) in p.poles.iter().enumerate() {
            t.row(&[p.gamma, i as f64, z.re, z.im, nicontrol::controllers::damping_ratio(*z)]);
        }
    }
    t.finish()
}

#[derive(Debug, Serialize)]
pub struct Cone {
    pub label: String,
    pub slack: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct Certificate {
    pub passed: bool,
    pub cones: Vec<Cone>,
    pub equalities: Vec<Cone>,
}

pub fn certificate(r: &VerificationReport) -> Certificate {
    Certificate {
        passed: r.passed(),
        cones: r
            .cones
            .iter()
            .map(|c| Cone { label: c.label.clone(), slack: c.slack, threshold: c.threshold, pass: c.pass })
            .collect(),
        equalities: r
            .equalities
            .iter()
            .map(|e| Cone { label: e.label.clone(), slack: e.residual, threshold: e.threshold, pass: e.pass })
            .collect(),
    }
}

#[derive(Debug, Serialize)]
pub struct ClosedLoop {
    pub passed: bool,
    pub closed_loop_poles: Vec<C64>,
    pub hurwitz: bool,
    pub ni_lmi: bool,
    pub ni_sweep: bool,
    pub phase_in_range: Option<bool>,
    pub dc_gain: Option<Vec<Vec<f64>>>,
    pub identity_residual: Option<f64>,
    pub sigma_max_dc: Option<f64>,
    pub dc_contractive: bool,
    pub robust_for_class: bool,
    pub boundary_sample_stable: bool,
    pub notes: Vec<String>,
}

pub fn closed_loop(r: &ClosedLoopReport) -> ClosedLoop {
    ClosedLoop {
        passed: r.passed(),
        closed_loop_poles: complex_list(&r.closed_loop_poles),
        hurwitz: r.hurwitz,
        ni_lmi: r.ni_lmi,
        ni_sweep: r.ni_sweep,
        phase_in_range: r.phase_in_range,
        dc_gain: r.dc_gain.as_ref().map(from_mat),
        identity_residual: r.identity_residual,
        sigma_max_dc: r.sigma_max_dc,
        dc_contractive: r.dc_contractive,
        robust_for_class: r.robust_for_class,
        boundary_sample_stable: r.boundary_sample_stable,
        notes: r.notes.clone(),
    }
}

#[derive(Debug, Serialize)]
pub struct AttemptView {
    pub eps: f64,
    pub projected: bool,
    pub feasible: bool,
    pub margin: f64,
}

#[derive(Debug, Serialize)]
pub struct Synthesis {
    pub feasible: bool,
    pub eps: Option<f64>,
    pub projected: Option<bool>,
    pub regularized: Option<bool>,
    #[serde(rename = "K")]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Y")]
    pub y: Option<Vec<Vec<f64>>>,
    #[serde(rename = "M")]
    pub m: Option<Vec<Vec<f64>>>,
    pub certificate: Option<Certificate>,
    pub verification: Option<ClosedLoop>,
    pub attempts: Vec<AttemptView>,
    pub notes: Vec<String>,
}

fn attempts(a: &[Attempt]) -> Vec<AttemptView> {
    a.iter()
        .map(|a| AttemptView { eps: a.eps, projected: a.projected, feasible: a.feasible, margin: a.margin })
        .collect()
}

pub fn synthesis(out: &SynthesisOutcome) -> Synthesis {
    match out {
        SynthesisOutcome::Feasible(r) => Synthesis {
            feasible: true,
            eps: Some(r.eps),
            projected: Some(r.projected),
            regularized: Some(r.regularized),
            k: Some(from_mat(&r.k)),
            y: Some(from_mat(&r.y)),
            m: Some(from_mat(&r.m)),
            certificate: Some(certificate(&r.certificate_report)),
            verification: Some(closed_loop(&r.verification)),
            attempts: attempts(&r.attempts),
            notes: r.notes.clone(),
        },
        SynthesisOutcome::Infeasible { attempts: a } => Synthesis {
            feasible: false,
            eps: None,
            projected: None,
            regularized: None,
            k: None,
            y: None,
            m: None,
            certificate: None,
            verification: None,
            attempts: attempts(a),
            notes: Vec::new(),
        },
    }
}
