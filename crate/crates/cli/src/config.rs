//! Declarative experiment configuration: one experiment per JSON file.
//!
//! The file is a single flat object. `kind` selects the experiment and must
//! match the kind given on the command line; the remaining fields are
//! grouped by purpose below, and each kind checks that the blocks it needs
//! are present and valid before any computation starts. Unknown fields are
//! rejected so typos fail loudly instead of silently running defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use aggrolab::ar1sim::AggregationScheme;
use aggrolab::disaggregation::TruncationRule;
use aggrolab::fields::FieldVariant;
use aggrolab::innovations::InnovationSpec;
use aggrolab::mixing::MixingSpec;
use aggrolab::{Error, Result};

/// Experiment kind, shared between the CLI positional argument and the
/// config file's `kind` field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Simulate AR(1) panels and store them as binary column stores.
    Simulate,
    /// Simulate panels and export their contemporaneous aggregates as CSV.
    Aggregate,
    /// Classify memory, limit region, and panel growth for given parameters.
    Diagnose,
    /// Recover the coefficient density from a simulated panel.
    Disaggregate,
    /// Simulate a nearest-neighbor field aggregate; optionally export a
    /// Green table and a spectral slice.
    Field,
    /// Regenerate the summary of a finished run from its manifest.
    Report,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Aggregate => "aggregate",
            Kind::Diagnose => "diagnose",
            Kind::Disaggregate => "disaggregate",
            Kind::Field => "field",
            Kind::Report => "report",
        }
    }
}

/// Density estimator selection for `disaggregate` runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    /// Cross-sectional moment estimator up to order `k_max`.
    Robinson { k_max: usize },
    /// Parametric likelihood fit fed by truncated per-path autocorrelations.
    Beran { h: f64 },
    /// Orthogonal-series estimate computed from the aggregate series and
    /// evaluated on `grid_points` abscissae over `[-grid_limit, grid_limit]`.
    Gegenbauer {
        alpha_weight: f64,
        rule: TruncationRule,
        grid_points: usize,
        grid_limit: f64,
    },
}

/// Green-table export attached to a `field` run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenExport {
    /// Autoregression coefficient of the tabulated Green function.
    pub a: f64,
    /// Series truncation tolerance.
    pub tol: f64,
}

/// Spectral-density slice export attached to a `field` run: the density is
/// sampled along the diagonal ray `x = y` at `points` frequencies up to
/// `max_freq`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralExport {
    pub points: usize,
    pub max_freq: f64,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,

    /// Master seed; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Worker threads, 0 = one per CPU; `--workers` and `AGGROLAB_WORKERS`
    /// override it.
    #[serde(default)]
    pub workers: usize,
    /// Output directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    // Spec blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation: Option<InnovationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<AggregationScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<FieldVariant>,

    // Sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_units: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    // Diagnose parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,

    // Disaggregation method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,

    // Field exports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenExport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralExport>,

    // Report input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates a config file against the requested kind.
    pub fn load(path: &Path, cli_kind: Kind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        config.validate(cli_kind)?;
        Ok(config)
    }

    /// Checks that the blocks this kind needs are present and valid. All
    /// spec blocks are validated here, before any computation starts.
    pub fn validate(&self, cli_kind: Kind) -> Result<()> {
        if self.kind != cli_kind {
            return Err(Error::invalid(format!(
                "config declares kind {:?} but the command line asked for {:?}",
                self.kind.as_str(),
                cli_kind.as_str()
            )));
        }
        if let Some(mixing) = &self.mixing {
            mixing.validate()?;
        }
        if let Some(innovation) = &self.innovation {
            innovation.validate()?;
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }

        match self.kind {
            Kind::Simulate => {
                self.panel_inputs()?;
            }
            Kind::Aggregate => {
                self.panel_inputs()?;
                self.require(self.scheme.is_some(), "an aggregation `scheme`")?;
            }
            Kind::Diagnose => {
                let memory = self.alpha.is_some() && self.beta.is_some();
                let region = self.beta.is_some() && self.sigma.is_some() && self.alpha0.is_some();
                let growth = self.beta.is_some() && self.n_units.is_some() && self.n.is_some();
                if !(memory || region || growth) {
                    return Err(Error::invalid(
                        "diagnose needs `beta` plus at least one of: `alpha` (memory), \
                         `sigma` and `alpha0` (limit region), `n_units` and `n` (growth)",
                    ));
                }
            }
            Kind::Disaggregate => {
                self.panel_inputs()?;
                let method = self
                    .method
                    .as_ref()
                    .ok_or_else(|| self.missing("an `estimator` block under `method`"))?;
                if let Method::Gegenbauer {
                    grid_points,
                    grid_limit,
                    ..
                } = method
                {
                    if *grid_points < 2 || !(0.0 < *grid_limit && *grid_limit < 1.0) {
                        return Err(Error::invalid(
                            "gegenbauer grid needs at least 2 points and a limit in (0, 1)",
                        ));
                    }
                }
            }
            Kind::Field => {
                self.require(self.variant.is_some(), "a stencil `variant`")?;
                self.require(self.mixing.is_some(), "a `mixing` block")?;
                self.require(self.innovation.is_some(), "an `innovation` block")?;
                self.require(
                    self.rows.is_some_and(|r| r >= 1) && self.cols.is_some_and(|c| c >= 1),
                    "positive `rows` and `cols`",
                )?;
                self.require(self.n_units.is_some_and(|u| u >= 1), "positive `n_units`")?;
                self.require(
                    self.tol.is_some_and(|t| t > 0.0 && t.is_finite()),
                    "a positive truncation `tol`",
                )?;
                if let Some(g) = &self.green {
                    if !(0.0..1.0).contains(&g.a) || !(g.tol > 0.0 && g.tol.is_finite()) {
                        return Err(Error::invalid(
                            "green export needs a in [0, 1) and a positive tol",
                        ));
                    }
                }
                if let Some(s) = &self.spectral {
                    if s.points == 0 || !(s.max_freq > 0.0 && s.max_freq.is_finite()) {
                        return Err(Error::invalid(
                            "spectral export needs positive points and max_freq",
                        ));
                    }
                }
            }
            Kind::Report => {
                self.require(self.run.is_some(), "a `run` directory")?;
            }
        }
        Ok(())
    }

    fn panel_inputs(&self) -> Result<()> {
        self.require(self.mixing.is_some(), "a `mixing` block")?;
        self.require(self.innovation.is_some(), "an `innovation` block")?;
        self.require(
            self.n_units.is_some_and(|u| u >= 1) && self.n.is_some_and(|n| n >= 1),
            "positive `n_units` and `n`",
        )
    }

    fn require(&self, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.missing(what))
        }
    }

    fn missing(&self, what: &str) -> Error {
        Error::invalid(format!("{} runs need {what}", self.kind.as_str()))
    }
}
