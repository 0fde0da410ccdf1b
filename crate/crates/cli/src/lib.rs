//! `nictl`: load systems from JSON, run NI analyses and designs, emit JSON
//! reports or CSV data.
//!
//! Exit codes: 0 when the run succeeded and the checked property holds, 2 when
//! it ran but the property is false, 1 on any error.

pub mod csv;
pub mod model;
pub mod report;

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nicontrol::analysis::{self, FrequencyGrid, DEFAULT_PPD, NI_TOL, SNI_STRICT_TOL, SPR_SHIFTS};
use nicontrol::controllers::{self, IrcObjective, IrcParams};
use nicontrol::numerics;
use nicontrol::synthesis::{self, SynthesisOutcome};
use nicontrol::{stability, Error, StateSpace};

use crate::csv::Table;

#[derive(Debug, Parser)]
#[command(name = "nictl", version, about = "Negative-imaginary systems analysis and design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Lowest grid frequency (rad/s).
    #[arg(long)]
    pub grid_min: Option<f64>,
    /// Highest grid frequency (rad/s).
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Grid points per decade.
    #[arg(long)]
    pub ppd: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// NI, SNI, PR and SPR verdicts. CSV columns: omega, lambda_min_H, lambda_min_PR.
    /// Exit 2 when the system is not NI.
    Analyze {
        system: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// NI sweep tolerance, relative to 1 + |P(jw)|.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Positive-frequency Nyquist data. CSV columns: omega, then re_i_j, im_i_j per channel.
    Nyquist {
        system: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Bode data. CSV columns: omega, then mag_db_i_j, phase_deg_i_j per channel.
    Bode {
        system: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Robust stability of the positive-feedback loop of M and N. Exit 2 when unstable.
    Stability { m: PathBuf, n: PathBuf },
    /// Tune a scalar integral resonant controller. CSV (locus) columns:
    /// gamma, pole_index, re, im, zeta.
    DesignIrc {
        plant: PathBuf,
        /// Phi = margin * P(0).
        #[arg(long, default_value_t = 1.2)]
        margin: f64,
        #[arg(long, default_value_t = 1e3)]
        gamma_min: f64,
        #[arg(long, default_value_t = 1e8)]
        gamma_max: f64,
        /// Gamma grid points per decade.
        #[arg(long, default_value_t = 200)]
        ppd: usize,
        #[arg(long, value_enum, default_value_t = Objective::Decay)]
        objective: Objective,
        /// Also write the locus CSV here.
        #[arg(long)]
        locus: Option<PathBuf>,
    },
    /// State-feedback synthesis for an uncertain plant. Exit 2 when infeasible
    /// or when the closed loop fails verification.
    SynthSf {
        plant: PathBuf,
        #[arg(long, default_value_t = synthesis::DEFAULT_EPS)]
        eps: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    /// Maximize the decay rate of the first resonant pole.
    Decay,
    /// Maximize its damping ratio.
    Damping,
}

/// Result of one command: the primary output, warnings for stderr and the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: String,
    pub warnings: Vec<String>,
    pub code: i32,
}

impl Outcome {
    fn new(output: String, holds: bool) -> Self {
        Outcome { output, warnings: Vec::new(), code: if holds { 0 } else { 2 } }
    }
}

/// Frequency grid for `sys` with any user overrides applied to the default.
pub fn build_grid(sys: &StateSpace, args: &GridArgs) -> Result<FrequencyGrid> {
    let default = FrequencyGrid::default_for(sys)?;
    if args.grid_min.is_none() && args.grid_max.is_none() && args.ppd.is_none() {
        return Ok(default);
    }
    let pts = default.points();
    let lo = args.grid_min.unwrap_or(pts[0]);
    let hi = args.grid_max.unwrap_or(pts[pts.len() - 1]);
    Ok(FrequencyGrid::logspace(lo, hi, args.ppd.unwrap_or(DEFAULT_PPD), true)?)
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn channel_header(sys: &StateSpace, a: &str, b: &str) -> Vec<String> {
    let mut h = vec![String::from("omega")];
    for i in 0..sys.outputs() {
        for j in 0..sys.inputs() {
            h.push(format!("{a}_{}_{}", i + 1, j + 1));
            h.push(format!("{b}_{}_{}", i + 1, j + 1));
        }
    }
    h
}

/// Rows of `f(P(jw))` per channel; a pole on the grid yields a blank row and a warning.
fn response_table(
    sys: &StateSpace,
    grid: &FrequencyGrid,
    header: Vec<String>,
    f: impl Fn(num_complex::Complex64) -> (f64, f64),
) -> Result<(String, Vec<String>)> {
    let mut table = Table::new(&header);
    let mut warnings = Vec::new();
    for w in grid.all() {
        match sys.freq_response(w) {
            Ok(p) => {
                let mut row = vec![w];
                for i in 0..sys.outputs() {
                    for j in 0..sys.inputs() {
                        let (x, y) = f(p[(i, j)]);
                        row.push(x);
                        row.push(y);
                    }
                }
                table.row(&row);
            }
            Err(Error::NearPole) => {
                warnings.push(format!("pole on the grid at omega = {}", csv::num(w)));
                table.blank(w);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((table.finish(), warnings))
}

fn analyze_csv(sys: &StateSpace, grid: &FrequencyGrid) -> Result<(String, Vec<String>)> {
    let mut table = Table::new(&["omega".into(), "lambda_min_H".into(), "lambda_min_PR".into()]);
    let mut warnings = Vec::new();
    for w in grid.all() {
        match sys.freq_response(w) {
            Ok(p) => {
                let h = analysis::hermitian_imaginary_part(sys, w)?;
                let pr = &p + p.adjoint();
                let lh = numerics::eig_hermitian(&h)?[0];
                let lp = numerics::eig_hermitian(&pr)?[0];
                table.row(&[w, lh, lp]);
            }
            Err(Error::NearPole) => {
                warnings.push(format!("pole on the grid at omega = {}", csv::num(w)));
                table.blank(w);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((table.finish(), warnings))
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let format = cli.format.unwrap_or(match cli.command {
        Command::Nyquist { .. } | Command::Bode { .. } => Format::Csv,
        _ => Format::Json,
    });
    match &cli.command {
        Command::Analyze { system, grid, tol } => {
            let sys = model::read(system)?.state_space()?;
            if !sys.is_square() {
                bail!("analyze needs a square system, got {}x{}", sys.outputs(), sys.inputs());
            }
            let grid = build_grid(&sys, grid)?;
            let tol = tol.unwrap_or(NI_TOL);
            let ni = analysis::check_ni_sweep(&sys, &grid, tol)?;
            if format == Format::Csv {
                let (out, warnings) = analyze_csv(&sys, &grid)?;
                return Ok(Outcome { warnings, ..Outcome::new(out, ni.holds) });
            }
            let r = report::Analysis {
                states: sys.states(),
                channels: sys.inputs(),
                poles: report::complex_list(&sys.poles()?),
                ni: report::sweep(&ni),
                ni_lmi: report::lmi_verdict(&analysis::check_ni_lmi(&sys)?),
                sni: report::sweep(&analysis::check_sni_sweep(&sys, &grid, tol, SNI_STRICT_TOL)?),
                sni_zeros: report::zeros(&analysis::check_sni_zeros(&sys)?),
                pr: report::sweep(&analysis::check_positive_real(&sys, &grid, tol)?),
                spr: report::sweep(&analysis::check_strictly_positive_real(&sys, &grid, tol, &SPR_SHIFTS)?),
            };
            Ok(Outcome::new(json(&r)?, ni.holds))
        }
        Command::Nyquist { system, grid } | Command::Bode { system, grid } => {
            if format != Format::Csv {
                bail!("nyquist and bode emit CSV only");
            }
            let sys = model::read(system)?.state_space()?;
            let g = build_grid(&sys, grid)?;
            let (out, warnings) = if matches!(cli.command, Command::Nyquist { .. }) {
                response_table(&sys, &g, channel_header(&sys, "re", "im"), |z| (z.re, z.im))?
            } else {
                response_table(&sys, &g, channel_header(&sys, "mag_db", "phase_deg"), |z| {
                    (20.0 * z.norm().log10(), z.im.atan2(z.re) * 180.0 / PI)
                })?
            };
            Ok(Outcome { warnings, ..Outcome::new(out, true) })
        }
        Command::Stability { m, n } => {
            if format != Format::Json {
                bail!("stability emits JSON only");
            }
            let m = model::read(m)?.state_space()?;
            let n = model::read(n)?.state_space()?;
            let r = stability::theorem5_verdict(&m, &n)?;
            Ok(Outcome::new(json(&report::stability(&r))?, r.stable()))
        }
        Command::DesignIrc { plant, margin, gamma_min, gamma_max, ppd, objective, locus } => {
            let p = model::read(plant)?.state_space()?;
            let phi = controllers::choose_phi(&p, *margin)?;
            if phi.nrows() != 1 {
                bail!("design-irc needs a SISO plant");
            }
            if !(*gamma_min > 0.0 && gamma_max > gamma_min) || *ppd == 0 {
                bail!("need 0 < gamma-min < gamma-max and ppd > 0");
            }
            let grid = controllers::log_grid(*gamma_min, *gamma_max, *ppd);
            let obj = match objective {
                Objective::Decay => IrcObjective::DecayRate,
                Objective::Damping => IrcObjective::DampingRatio,
            };
            let d = controllers::design_irc_gamma(&p, phi[(0, 0)], &grid, obj)?;
            let controller = controllers::irc(&IrcParams::scalar(d.gamma_star, phi[(0, 0)]))?;
            let verdict = stability::theorem5_verdict(&p, &controller)?;
            let locus_csv = report::locus_csv(&d);
            if let Some(path) = locus {
                std::fs::write(path, &locus_csv)?;
            }
            let out = match format {
                Format::Csv => locus_csv,
                Format::Json => json(&report::irc_design(&d, phi[(0, 0)], *margin, &verdict))?,
            };
            Ok(Outcome::new(out, verdict.stable()))
        }
        Command::SynthSf { plant, eps } => {
            if format != Format::Json {
                bail!("synth-sf emits JSON only");
            }
            let plant = model::read(plant)?.uncertain_plant()?;
            let outcome = synthesis::synthesize_state_feedback(&plant, *eps)?;
            let holds = matches!(&outcome, SynthesisOutcome::Feasible(r) if r.verification.passed());
            Ok(Outcome::new(json(&report::synthesis(&outcome))?, holds))
        }
    }
}
