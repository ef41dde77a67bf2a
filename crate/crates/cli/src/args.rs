use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use solitons::analysis::Regime;
use solitons::integrator::DEFAULT_DELTA;
use solitons::{
    resolve_preset, IntegrationControls, Locus, Preset, PresetName, ShootSpec, TwoSummandsParams,
};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "solitons", version, about = "Cohomogeneity-one soliton and Einstein metric lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of the Hopf-fibration presets.
    Presets(CommonArgs),
    /// Cone solutions, their stability and the trapping roots.
    Cone(CommonArgs),
    /// Integrate one trajectory and export it.
    Integrate(CommonArgs),
    /// Search for symmetric Einstein metrics on the doubled manifold.
    SearchSymmetric(CommonArgs),
    /// Match two smooth-collapse curves at the maximal volume orbit.
    MatchSphere(CommonArgs),
    /// Count critical points of the warping quotient before the maximal
    /// volume orbit.
    CountCritical(CommonArgs),
    /// Compare trailing means with the limits of an asymptotic regime.
    VerifyAsymptotics(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemArg {
    Rescaled,
    Polynomial,
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocusArg {
    Einstein,
    Soliton,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeArg {
    Steady,
    RicciFlat,
    Expanding,
    NegEinstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Jsonl,
}

/// Flags shared by every subcommand. A `--config` file supplies the same
/// keys; values from the file win over flags.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommonArgs {
    /// JSON file with any of the keys below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2: Option<u32>,
    #[arg(long = "A1")]
    #[serde(rename = "A1", skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[arg(long = "A2")]
    #[serde(rename = "A2", skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[arg(long = "A3")]
    #[serde(rename = "A3", skip_serializing_if = "Option::is_none")]
    pub a3: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long = "C", allow_negative_numbers = true)]
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemArg>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locus: Option<LocusArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Comma-separated unstable-direction coefficients, e.g. `1,1`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,

    #[arg(long = "s-max")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[arg(long = "rel-tol")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[arg(long = "abs-tol")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[arg(long = "max-step")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    /// Stop once the trailing window has converged.
    #[arg(long = "stop-on-convergence")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_on_convergence: Option<bool>,

    /// Initial size of the second factor for profile runs and critical
    /// point counts.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fbar: Option<f64>,
    #[arg(long = "fbar-min")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fbar_min: Option<f64>,
    #[arg(long = "fbar-max")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fbar_max: Option<f64>,
    #[arg(long = "Fbar-min")]
    #[serde(rename = "Fbar_min", skip_serializing_if = "Option::is_none")]
    pub big_fbar_min: Option<f64>,
    #[arg(long = "Fbar-max")]
    #[serde(rename = "Fbar_max", skip_serializing_if = "Option::is_none")]
    pub big_fbar_max: Option<f64>,
    /// Number of grid points per search axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeArg>,
    /// Tolerance for asymptotic claims.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl CommonArgs {
    /// Overlays the `--config` file, warning on every key that overrides a
    /// flag with a different value.
    pub fn resolve(self) -> Result<CommonArgs, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let file: Map<String, Value> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Validate the file's keys and types on their own first.
        serde_json::from_value::<CommonArgs>(Value::Object(file.clone()))
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

        let Value::Object(mut merged) = serde_json::to_value(&self).expect("flags serialize") else {
            unreachable!("CommonArgs serializes to an object")
        };
        for (key, value) in file {
            if let Some(old) = merged.get(&key) {
                if *old != value {
                    eprintln!("warning: config file sets {key} = {value}, overriding flag value {old}");
                }
            }
            merged.insert(key, value);
        }
        let mut out: CommonArgs =
            serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))?;
        out.config = Some(path);
        Ok(out)
    }

    pub fn params(&self) -> Result<TwoSummandsParams, CliError> {
        let explicit = self.d1.is_some() || self.d2.is_some() || self.a1.is_some() || self.a2.is_some() || self.a3.is_some();
        let base = match (&self.preset, explicit) {
            (Some(_), true) => {
                return Err(CliError::Config("give either --preset or explicit --d1 --d2 --A1 --A2 --A3, not both".into()))
            }
            (Some(name), false) => {
                let name: PresetName = name.parse().map_err(|e: solitons::ConfigError| CliError::Config(e.to_string()))?;
                let m = self.m.unwrap_or(1);
                resolve_preset(Preset { name, m }).map_err(|e| CliError::Config(e.to_string()))?
            }
            (None, true) => {
                let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Config(format!("missing --{name}")));
                let d1 = self.d1.ok_or_else(|| CliError::Config("missing --d1".into()))?;
                let d2 = self.d2.ok_or_else(|| CliError::Config("missing --d2".into()))?;
                TwoSummandsParams::new(d1, d2, need(self.a1, "A1")?, need(self.a2, "A2")?, self.a3.unwrap_or(0.0))
            }
            (None, false) => return Err(CliError::Config("no parameters: use --preset or --d1 --d2 --A1 --A2".into())),
        };
        let p = base.with_epsilon(self.eps.unwrap_or(0.0)).with_c(self.c.unwrap_or(0.0));
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }

    /// Dimensions for the sphere constructions, which fix their own
    /// normalisation.
    pub fn sphere_dims(&self) -> Result<(u32, u32), CliError> {
        if self.preset.is_some() || self.a1.is_some() || self.a2.is_some() || self.a3.is_some() || self.eps.is_some() || self.c.is_some() {
            eprintln!("warning: sphere constructions use A_i = d_i(d_i - 1), A3 = 0, eps = -2n; other parameters are ignored");
        }
        let d1 = self.d1.unwrap_or(2);
        let d2 = self.d2.unwrap_or(2);
        if d1 < 2 || d2 < 2 {
            return Err(CliError::Config("sphere constructions need d1, d2 >= 2".into()));
        }
        Ok((d1, d2))
    }

    pub fn locus(&self, p: &TwoSummandsParams) -> Result<Locus, CliError> {
        let locus = match self.locus {
            Some(LocusArg::Einstein) => Locus::Einstein,
            Some(LocusArg::Soliton) => Locus::Soliton,
            Some(LocusArg::Unconstrained) => Locus::Unconstrained,
            None if p.c == 0.0 => Locus::Einstein,
            None => Locus::Soliton,
        };
        if locus == Locus::Einstein && p.c != 0.0 {
            return Err(CliError::Config(format!("Einstein trajectories require C = 0, got C = {}", p.c)));
        }
        Ok(locus)
    }

    pub fn shoot_spec(&self, locus: Locus) -> ShootSpec {
        ShootSpec {
            coefficients: self.coeffs.clone().unwrap_or_else(|| vec![1.0, 1.0]),
            delta: self.delta.unwrap_or(DEFAULT_DELTA),
            locus,
        }
    }

    pub fn controls(&self) -> Result<IntegrationControls, CliError> {
        self.controls_over(IntegrationControls::default())
    }

    /// Horizons long enough for the trailing means of each regime to settle;
    /// explicit flags still win.
    pub fn asymptotic_controls(&self, regime: Regime) -> Result<IntegrationControls, CliError> {
        let d = IntegrationControls::default();
        let base = match regime {
            Regime::Steady => IntegrationControls { s_max: 3000.0, max_step: 50.0, ..d },
            Regime::RicciFlat => IntegrationControls { stop_on_convergence: true, ..d },
            Regime::Expanding => IntegrationControls { s_max: 2e6, max_step: 1e4, ..d },
            Regime::NegEinstein => IntegrationControls { s_max: 200.0, ..d },
        };
        self.controls_over(base)
    }

    fn controls_over(&self, d: IntegrationControls) -> Result<IntegrationControls, CliError> {
        let c = IntegrationControls {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            max_step: self.max_step.unwrap_or(d.max_step),
            s_max: self.s_max.unwrap_or(d.s_max),
            stop_on_convergence: self.stop_on_convergence.unwrap_or(d.stop_on_convergence),
            ..d
        };
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(c.s_max > 0.0 && c.s_max.is_finite()) {
            return Err(CliError::Config("--s-max must be positive and finite".into()));
        }
        Ok(c)
    }

    pub fn regime(&self, p: &TwoSummandsParams) -> Result<Regime, CliError> {
        Ok(match self.regime {
            Some(RegimeArg::Steady) => Regime::Steady,
            Some(RegimeArg::RicciFlat) => Regime::RicciFlat,
            Some(RegimeArg::Expanding) => Regime::Expanding,
            Some(RegimeArg::NegEinstein) => Regime::NegEinstein,
            None => match (p.epsilon == 0.0, p.c == 0.0) {
                (true, false) => Regime::Steady,
                (true, true) => Regime::RicciFlat,
                (false, false) => Regime::Expanding,
                (false, true) => Regime::NegEinstein,
            },
        })
    }

    /// A `(lo, hi)` search range. `lo == hi` is an empty range.
    pub fn range(lo: Option<f64>, hi: Option<f64>, default: (f64, f64), name: &str) -> Result<(f64, f64), CliError> {
        let (lo, hi) = (lo.unwrap_or(default.0), hi.unwrap_or(default.1));
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(CliError::Config(format!("{name} range must satisfy 0 < min <= max, got [{lo}, {hi}]")));
        }
        Ok((lo, hi))
    }
}
