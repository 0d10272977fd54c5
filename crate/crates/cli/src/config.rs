use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "cplab", version, about = "Numerical checks for the integrable chiral Potts model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one verification suite.
    Verify(VerifyArgs),
    /// Repeat a suite along one parameter axis.
    Sweep(SweepArgs),
    /// Evaluate the currents and relations on a lattice described in TOML.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    StarTriangle,
    Crossing,
    Rmatrix,
    Sufficiency,
    Dh,
    Contour,
    Transfer,
    Hamiltonian,
    Kw,
    Ising,
    NearFz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Phi,
    Kprime,
    Theta,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of spin states.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Curve modulus k'. Random per sample when no point is pinned.
    #[arg(long, allow_negative_numbers = true)]
    pub kprime: Option<f64>,
    /// Chart angle phi of the second point.
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Chart angle phibar of the second point; with --phi it fixes k'.
    #[arg(long, allow_negative_numbers = true)]
    pub phibar: Option<f64>,
    /// Chart parameter of the first point (beta' for the Ising suite).
    #[arg(long, allow_negative_numbers = true)]
    pub u: Option<f64>,
    /// Spectral difference u_s - u_r, also the rhombus angle.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Elliptic nome of the Ising suite.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub rows: usize,
    /// Lattice columns, also the chain length for transfer, hamiltonian and kw.
    #[arg(long, default_value_t = 3)]
    pub cols: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Override the tolerance of the suite's main identities.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the machine-readable report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Leave timings out of the report so repeated runs are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    /// Space the points geometrically.
    #[arg(long)]
    pub log: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Lattice specification (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Everything a suite reads, echoed in the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub target: Target,
    pub n: usize,
    pub kprime: Option<f64>,
    pub phi: Option<f64>,
    pub phibar: Option<f64>,
    pub u: Option<f64>,
    pub theta: Option<f64>,
    pub p: Option<f64>,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub samples: usize,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn new(target: Target, m: &ModelArgs) -> Self {
        RunConfig {
            target,
            n: m.n,
            kprime: m.kprime,
            phi: m.phi,
            phibar: m.phibar,
            u: m.u,
            theta: m.theta,
            p: m.p,
            rows: m.rows,
            cols: m.cols,
            seed: m.seed,
            samples: m.samples,
            tol: m.tol,
        }
    }

    /// Points are pinned by the flags rather than drawn at random.
    pub fn pinned(&self) -> bool {
        self.phi.is_some() || self.u.is_some() || self.theta.is_some()
    }

    pub fn theta_or_default(&self) -> f64 {
        self.theta.unwrap_or(match self.target {
            Target::Ising | Target::NearFz => PI / 2.0,
            _ => 1.0,
        })
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn set_axis(&mut self, axis: Axis, v: f64) {
        match axis {
            Axis::Phi => self.phi = Some(v),
            Axis::Kprime => self.kprime = Some(v),
            Axis::Theta => self.theta = Some(v),
            Axis::P => self.p = Some(v),
        }
    }

    /// Preconditions checked before any suite runs.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |name: &str, v: Option<f64>| match v {
            Some(x) if !x.is_finite() => Err(format!("--{name} must be finite")),
            _ => Ok(()),
        };
        finite("kprime", self.kprime)?;
        finite("phi", self.phi)?;
        finite("phibar", self.phibar)?;
        finite("u", self.u)?;
        finite("theta", self.theta)?;
        finite("p", self.p)?;
        finite("tol", self.tol)?;
        if !(2..=8).contains(&self.n) {
            return Err(format!("--n must be between 2 and 8, got {}", self.n));
        }
        if let Some(k) = self.kprime {
            if k <= 0.0 {
                return Err(format!("--kprime must be positive, got {k}"));
            }
        }
        if self.phibar.is_some() && self.phi.is_none() {
            return Err("--phibar needs --phi".into());
        }
        if self.samples == 0 {
            return Err("--samples must be at least 1".into());
        }
        if self.rows == 0 || self.cols == 0 {
            return Err("--rows and --cols must be at least 1".into());
        }
        if let Some(t) = self.tol {
            if t <= 0.0 {
                return Err(format!("--tol must be positive, got {t}"));
            }
        }
        let theta = self.theta_or_default();
        let needs_angle = matches!(self.target, Target::Dh | Target::Contour | Target::NearFz | Target::Ising);
        if needs_angle && !(theta > 0.0 && theta < PI) {
            return Err(format!("--theta must lie in (0, pi) for this target, got {theta}"));
        }
        match self.target {
            Target::Ising => {
                if self.n != 2 {
                    return Err("the Ising suite needs --n 2".into());
                }
                if let Some(p) = self.p {
                    if !(p > 0.0 && p < 0.1) {
                        return Err(format!("--p must lie in (0, 0.1), got {p}"));
                    }
                }
            }
            Target::Transfer | Target::Hamiltonian | Target::Kw => {
                let dim = (self.n as u128).checked_pow(self.cols as u32);
                if self.cols < 2 || !matches!(dim, Some(d) if d <= cplab::lattice::DENSE_CAP as u128) {
                    return Err(format!(
                        "chain length --cols {} with N = {} is outside 2 <= L, N^L <= {}",
                        self.cols,
                        self.n,
                        cplab::lattice::DENSE_CAP
                    ));
                }
            }
            Target::Dh | Target::Contour if self.rows * self.cols > 25 => {
                return Err("lattices are limited to 25 spins".into());
            }
            _ => {}
        }
        if self.p.is_some() && self.target != Target::Ising {
            return Err("--p only applies to the Ising suite".into());
        }
        Ok(())
    }
}

impl SweepArgs {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let (a, b) = (self.from, self.to);
        if !a.is_finite() || !b.is_finite() {
            return Err("sweep bounds must be finite".into());
        }
        if a > b {
            return Err(format!("empty sweep range [{a}, {b}]"));
        }
        if self.steps == 0 {
            return Err("--steps must be at least 1".into());
        }
        if self.log && a <= 0.0 {
            return Err("--log needs a positive range".into());
        }
        if a == b || self.steps == 1 {
            return Ok(vec![a]);
        }
        let m = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| {
                let t = i as f64 / m;
                if self.log {
                    (a.ln() + t * (b.ln() - a.ln())).exp()
                } else {
                    a + t * (b - a)
                }
            })
            .collect())
    }
}
