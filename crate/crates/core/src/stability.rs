//! Internal stability of two-block feedback loops and the DC-gain robust
//! stability test for NI/SNI positive-feedback interconnections.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::analysis::{self, FrequencyGrid, NI_TOL, SNI_STRICT_TOL};
use crate::error::{dim_err, Error, Result};
use crate::lti::{FeedbackLoop, LoopSign, StateSpace};
use crate::numerics::{self, fm, Mat};

/// `|lambda_max - 1|` below this is reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-6;
/// Accepted imaginary residual of `eig(M(0) N(0))`, relative to `1 + |M(0) N(0)|`.
pub const DC_IMAG_TOL: f64 = 1e-8;
const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct InternalStability {
    pub stable: bool,
    pub poles: Vec<Complex64>,
}

/// Stable iff every closed-loop pole lies strictly left of the imaginary-axis band.
pub fn internal_stability(m: &StateSpace, n: &StateSpace, sign: LoopSign) -> Result<InternalStability> {
    let closed = FeedbackLoop::new(m.clone(), n.clone(), sign)?.closed_loop()?;
    let poles = closed.poles()?;
    let stable = poles.iter().all(|p| p.re < 0.0 && !analysis::is_axis(*p));
    Ok(InternalStability { stable, poles })
}

/// Outcome of the DC-gain test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcConclusion {
    Stable,
    Unstable,
    /// `lambda_max` within [`MARGINAL_BAND`] of one.
    Marginal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub m_is_ni: bool,
    pub n_is_sni: bool,
    /// `M(inf) N(inf) = 0`.
    pub boundary_product_zero: bool,
    /// `N(inf) >= 0`.
    pub n_inf_psd: bool,
    /// Largest real part of `eig(M(0) N(0))`, when both DC gains exist.
    pub lambda_max_dc: Option<f64>,
    /// Largest imaginary part of `eig(M(0) N(0))`.
    pub dc_imag_residual: Option<f64>,
    /// Every hypothesis holds and the DC eigenvalues are real.
    pub theorem_applies: bool,
    /// DC-gain conclusion; `None` when the theorem does not apply.
    pub conclusion: Option<DcConclusion>,
    /// Direct pole test of the positive-feedback loop.
    pub internally_stable: bool,
    pub closed_loop_poles: Vec<Complex64>,
    pub notes: Vec<String>,
}

impl StabilityReport {
    /// The DC-gain conclusion when it applies and is not marginal, else the direct pole test.
    pub fn stable(&self) -> bool {
        match self.conclusion {
            Some(DcConclusion::Stable) => true,
            Some(DcConclusion::Unstable) => false,
            _ => self.internally_stable,
        }
    }
}

/// Checks the hypotheses (M NI, N SNI, `M(inf)N(inf) = 0`, `N(inf) >= 0`),
/// evaluates `lambda_max(M(0) N(0))` and cross-checks with the closed-loop poles.
pub fn theorem5_verdict(m: &StateSpace, n: &StateSpace) -> Result<StabilityReport> {
    if !m.is_square() || !n.is_square() || m.inputs() != n.inputs() {
        return Err(dim_err("M and N must be square with equal dimensions"));
    }
    let mut notes = Vec::new();
    let m_is_ni = analysis::check_ni_sweep(m, &FrequencyGrid::default_for(m)?, NI_TOL)?.holds;
    let n_is_sni =
        analysis::check_sni_sweep(n, &FrequencyGrid::default_for(n)?, NI_TOL, SNI_STRICT_TOL)?.holds;
    let (dm, dn) = (m.d(), n.d());
    let boundary_product_zero = (dm * dn).norm() <= BOUNDARY_TOL * (1.0 + dm.norm() * dn.norm());
    let n_inf_psd = numerics::lambda_min(&numerics::symmetrize(dn))? >= -BOUNDARY_TOL * (1.0 + dn.norm());

    let (mut lambda_max_dc, mut dc_imag_residual) = (None, None);
    match (m.dc_gain(), n.dc_gain()) {
        (Ok(m0), Ok(n0)) => {
            let prod: Mat = m0 * n0;
            let eig = numerics::eig_general(&prod)?;
            let imag = eig.iter().map(|z| fm::abs(z.im)).fold(0.0, f64::max);
            let lmax = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            lambda_max_dc = Some(lmax);
            dc_imag_residual = Some(imag);
        }
        _ => notes.push(String::from("DC gain undefined (pole at the origin)")),
    }
    let scale_ok = match (lambda_max_dc, dc_imag_residual) {
        (Some(l), Some(im)) => im <= DC_IMAG_TOL * (1.0 + fm::abs(l)),
        _ => false,
    };
    if lambda_max_dc.is_some() && !scale_ok {
        notes.push(String::from("eigenvalues of M(0)N(0) are not real within tolerance"));
    }
    let theorem_applies = m_is_ni && n_is_sni && boundary_product_zero && n_inf_psd && scale_ok;
    let conclusion = if theorem_applies {
        let l = lambda_max_dc.expect("checked above");
        Some(if fm::abs(l - 1.0) < MARGINAL_BAND {
            DcConclusion::Marginal
        } else if l < 1.0 {
            DcConclusion::Stable
        } else {
            DcConclusion::Unstable
        })
    } else {
        notes.push(String::from("hypotheses fail; verdict from the direct pole test"));
        None
    };
    let (internally_stable, closed_loop_poles) = match internal_stability(m, n, LoopSign::Positive) {
        Ok(s) => (s.stable, s.poles),
        Err(Error::IllPosed) => {
            notes.push(String::from("loop is ill-posed"));
            (false, Vec::new())
        }
        Err(e) => return Err(e),
    };
    if let Some(c) = conclusion {
        let agrees = match c {
            DcConclusion::Stable => internally_stable,
            DcConclusion::Unstable => !internally_stable,
            DcConclusion::Marginal => true,
        };
        if !agrees {
            notes.push(String::from("DC-gain verdict disagrees with the pole test"));
        }
    }
    Ok(StabilityReport {
        m_is_ni,
        n_is_sni,
        boundary_product_zero,
        n_inf_psd,
        lambda_max_dc,
        dc_imag_residual,
        theorem_applies,
        conclusion,
        internally_stable,
        closed_loop_poles,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tests::{first_order, second_order};
    use crate::numerics::from_rows;

    fn gain(k: f64) -> StateSpace {
        StateSpace::static_gain(from_rows(&[[k]]).unwrap()).unwrap()
    }

    #[test]
    fn static_feedback_examples() {
        let g = first_order(1.0, -1.0);
        let half = internal_stability(&g, &gain(0.5), LoopSign::Positive).unwrap();
        assert!(half.stable);
        assert!((half.poles[0] - Complex64::new(-0.5, 0.0)).norm() < 1e-14);
        let two = internal_stability(&g, &gain(2.0), LoopSign::Positive).unwrap();
        assert!(!two.stable);
        assert!((two.poles[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(internal_stability(&g, &second_order(), LoopSign::Positive).unwrap().stable);
    }

    #[test]
    fn negative_sign_flips_loop() {
        let g = first_order(1.0, -1.0);
        let two = internal_stability(&g, &gain(2.0), LoopSign::Negative).unwrap();
        assert!(two.stable);
        assert!((two.poles[0] - Complex64::new(-3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dc_gain_examples() {
        let r = theorem5_verdict(&second_order(), &first_order(1.0, -1.0)).unwrap();
        assert!(r.theorem_applies);
        assert!((r.lambda_max_dc.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(r.conclusion, Some(DcConclusion::Stable));
        assert!(r.internally_stable && r.stable());

        let n = first_order(2.0, -2.0);
        let marginal = theorem5_verdict(&first_order(1.0, -1.0), &n).unwrap();
        assert!((marginal.lambda_max_dc.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(marginal.conclusion, Some(DcConclusion::Marginal));
        assert!(!marginal.internally_stable);
        assert!(marginal.closed_loop_poles.iter().any(|p| p.norm() < 1e-10));
    }

    #[test]
    fn failed_hypothesis_falls_back() {
        let r = theorem5_verdict(&first_order(1.0, -1.0), &gain(0.5)).unwrap();
        assert!(!r.n_is_sni);
        assert!(!r.theorem_applies);
        assert_eq!(r.conclusion, None);
        assert!(r.stable());
    }
}
