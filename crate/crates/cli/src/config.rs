//! Command-line flags and the JSON run configuration they override.

use crate::error::CliError;
use crate::ingest::{CsvSpec, DEFAULT_NA_TOKEN};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mnar_core::estimation::{BetaSign, FitOptions, FitTemplate, FreeFlags};
use mnar_core::mechanism::{LinkFamily, MechanismSpec};
use mnar_core::model::{FeatureMap, ModelSpec, OutcomeFamily, OutcomeSpec};
use mnar_core::quadrature::QuadSettings;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Fit,
    Diagnose,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LinkChoice {
    Probit,
    Logistic,
    Robit,
}

/// A run as a single JSON document. Every field is optional; flags given on
/// the command line take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandName>,
    pub data: Option<PathBuf>,
    pub y_column: Option<String>,
    pub covariate_columns: Option<Vec<String>>,
    pub na_token: Option<String>,
    /// Full model template. When absent a normal outcome with a mechanism
    /// linear in all covariates is built from `link`.
    pub template: Option<FitTemplate>,
    pub link: Option<LinkChoice>,
    /// Degrees of freedom of the Robit link (the starting value when
    /// `free_df` is set).
    pub robit_df: Option<f64>,
    pub free_df: Option<bool>,
    pub beta_sign: Option<BetaSign>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_starts: Option<usize>,
    pub quad: Option<QuadSettings>,
    pub scenario: Option<String>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub examples: Option<Vec<String>>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `top` replace those of `self`.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay!(self, top; command, data, y_column, covariate_columns, na_token, template, link, robit_df,
            free_df, beta_sign, out, seed, n_starts, quad, scenario, reps, n, examples);
        self
    }

    pub fn csv_spec(&self) -> Result<CsvSpec, CliError> {
        let y_column =
            self.y_column.clone().ok_or_else(|| CliError::Usage("no outcome column given (--y-column)".into()))?;
        Ok(CsvSpec {
            y_column,
            covariate_columns: self.covariate_columns.clone().unwrap_or_default(),
            na_token: self.na_token.clone().unwrap_or_else(|| DEFAULT_NA_TOKEN.to_string()),
        })
    }

    pub fn fit_options(&self) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            n_starts: self.n_starts.unwrap_or(d.n_starts),
            seed: self.seed.unwrap_or(d.seed),
            quad: self.quad.unwrap_or(d.quad),
            ..d
        }
    }

    /// The template to fit on data with `width` covariates, with the sign
    /// assertion applied.
    pub fn fit_template(&self, width: usize) -> Result<FitTemplate, CliError> {
        let mut template = match &self.template {
            Some(t) => {
                if self.link.is_some() || self.robit_df.is_some() || self.free_df.is_some() {
                    return Err(CliError::Usage("link options conflict with an explicit template".into()));
                }
                t.clone()
            }
            None => default_template(
                self.link.unwrap_or(LinkChoice::Probit),
                self.robit_df,
                self.free_df.unwrap_or(false),
                width,
            )?,
        };
        if let Some(sign) = self.beta_sign {
            template.free.beta_sign = Some(sign);
            let b = template.model.mechanism.beta();
            template.model.mechanism.set_beta(sign.factor() * if b == 0.0 { 1.0 } else { b.abs() });
        }
        template.model.validate(width).map_err(|e| CliError::Usage(format!("template does not fit the data: {e}")))?;
        Ok(template)
    }
}

/// Normal outcome, mechanism linear in every covariate.
pub fn default_template(
    link: LinkChoice,
    robit_df: Option<f64>,
    free_df: bool,
    width: usize,
) -> Result<FitTemplate, CliError> {
    let link = match link {
        LinkChoice::Probit => LinkFamily::Probit,
        LinkChoice::Logistic => LinkFamily::Logistic,
        LinkChoice::Robit => LinkFamily::Robit { df: robit_df.unwrap_or(4.0) },
    };
    if !matches!(link, LinkFamily::Robit { .. }) && (free_df || robit_df.is_some()) {
        return Err(CliError::Usage("degrees of freedom options need --link robit".into()));
    }
    let features = FeatureMap::linear(width);
    let n_coef = features.n_coef();
    let outcome = OutcomeSpec {
        features: features.clone(),
        family: OutcomeFamily::Normal { mean: vec![0.0; n_coef], sigma2: 1.0 },
    };
    let mechanism = if width == 0 {
        MechanismSpec::scalar(0.0, 0.0, link)
    } else {
        MechanismSpec::additive(features, vec![0.0; n_coef], 0.0, link)
    };
    let free = FreeFlags { robit_df: free_df, ..FreeFlags::default() };
    Ok(FitTemplate::new(ModelSpec { outcome, mechanism }).with_free(free))
}

fn parse_beta_sign(s: &str) -> Result<BetaSign, String> {
    match s {
        "+" | "positive" | "pos" => Ok(BetaSign::Positive),
        "-" | "negative" | "neg" => Ok(BetaSign::Negative),
        _ => Err(format!("expected positive or negative (or + / -), got `{s}`")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "mnar", version, about = "Selection models for outcomes missing not at random")]
pub struct Cli {
    /// Seed for starting points and simulated data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the result artifact.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a selection model by maximum likelihood.
    Fit(ModelArgs),
    /// Report whether the model template is identifiable.
    Diagnose(ModelArgs),
    /// Run a simulation scenario and write summary statistics.
    Simulate(SimulateArgs),
    /// Check the registered non-identified model pairs.
    Verify(VerifyArgs),
}

#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    /// CSV dataset with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub y_column: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Cell value marking a missing outcome.
    #[arg(long)]
    pub na_token: Option<String>,
    #[arg(long, value_enum)]
    pub link: Option<LinkChoice>,
    #[arg(long)]
    pub robit_df: Option<f64>,
    /// Estimate the Robit degrees of freedom.
    #[arg(long)]
    pub free_df: bool,
    /// Declared sign of beta.
    #[arg(long, value_parser = parse_beta_sign, allow_hyphen_values = true)]
    pub beta_sign: Option<BetaSign>,
    #[arg(long)]
    pub n_starts: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct SimulateArgs {
    /// Scenario id from the catalog.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Sample size per replicate.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_starts: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct VerifyArgs {
    /// Registered pair to check; repeat for several. All pairs by default.
    #[arg(long = "example")]
    pub examples: Vec<String>,
}

impl Cli {
    /// The configuration file, if any, overlaid with the flags.
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut flags = RunConfig { seed: self.seed, out: self.out, ..RunConfig::default() };
        match self.command {
            Some(Command::Fit(a)) => model_flags(&mut flags, CommandName::Fit, a),
            Some(Command::Diagnose(a)) => model_flags(&mut flags, CommandName::Diagnose, a),
            Some(Command::Simulate(a)) => {
                flags.command = Some(CommandName::Simulate);
                flags.scenario = a.scenario;
                flags.reps = a.reps;
                flags.n = a.n;
                flags.n_starts = a.n_starts;
            }
            Some(Command::Verify(a)) => {
                flags.command = Some(CommandName::Verify);
                flags.examples = (!a.examples.is_empty()).then_some(a.examples);
            }
            None => {}
        }
        Ok(base.overlay(flags))
    }
}

fn model_flags(flags: &mut RunConfig, command: CommandName, a: ModelArgs) {
    flags.command = Some(command);
    flags.data = a.data;
    flags.y_column = a.y_column;
    flags.covariate_columns = a.covariates;
    flags.na_token = a.na_token;
    flags.link = a.link;
    flags.robit_df = a.robit_df;
    flags.free_df = a.free_df.then_some(true);
    flags.beta_sign = a.beta_sign;
    flags.n_starts = a.n_starts;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let base = RunConfig { seed: Some(1), reps: Some(5), ..RunConfig::default() };
        let top = RunConfig { seed: Some(9), ..RunConfig::default() };
        let merged = base.overlay(top);
        assert_eq!((merged.seed, merged.reps), (Some(9), Some(5)));
    }

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let c: RunConfig =
            serde_json::from_str(r#"{"command": "fit", "link": "logistic", "beta_sign": "negative"}"#).unwrap();
        assert_eq!(c.command, Some(CommandName::Fit));
        assert_eq!(c.beta_sign, Some(BetaSign::Negative));
        assert!(serde_json::from_str::<RunConfig>(r#"{"lnk": "probit"}"#).is_err());
    }

    #[test]
    fn default_template_shapes() {
        let t = default_template(LinkChoice::Robit, None, true, 2).unwrap();
        assert_eq!(t.model.mechanism.alpha().len(), 3);
        assert!(t.free.robit_df);
        assert!(default_template(LinkChoice::Probit, Some(3.0), false, 0).is_err());
        let c = RunConfig { beta_sign: Some(BetaSign::Negative), ..RunConfig::default() };
        let t = c.fit_template(0).unwrap();
        assert_eq!(t.model.mechanism.beta(), -1.0);
    }

    #[test]
    fn sign_parser() {
        assert_eq!(parse_beta_sign("+"), Ok(BetaSign::Positive));
        assert_eq!(parse_beta_sign("negative"), Ok(BetaSign::Negative));
        assert!(parse_beta_sign("up").is_err());
    }
}
