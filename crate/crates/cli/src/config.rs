//! JSON experiment configuration. Every field is optional; command-line flags
//! override the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

/// The paper's examples, one per variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Experiment {
    ContourQuadrants,
    ContourPdfs,
    NonLebesgueRatio,
    AnsatzGridAndValidation,
    MaxEntFit,
    MaxEntBayes,
    BetaFamilyFit,
    BetaFamilyBayes,
    DataConsistent,
    FieldFirstAttempt,
    FieldSecondAttempt,
    TruncationStudy,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::ContourQuadrants,
        Experiment::ContourPdfs,
        Experiment::NonLebesgueRatio,
        Experiment::AnsatzGridAndValidation,
        Experiment::MaxEntFit,
        Experiment::MaxEntBayes,
        Experiment::BetaFamilyFit,
        Experiment::BetaFamilyBayes,
        Experiment::DataConsistent,
        Experiment::FieldFirstAttempt,
        Experiment::FieldSecondAttempt,
        Experiment::TruncationStudy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ContourQuadrants => "contour-quadrants",
            Experiment::ContourPdfs => "contour-pdfs",
            Experiment::NonLebesgueRatio => "non-lebesgue-ratio",
            Experiment::AnsatzGridAndValidation => "ansatz-grid-and-validation",
            Experiment::MaxEntFit => "maxent-fit",
            Experiment::MaxEntBayes => "maxent-bayes",
            Experiment::BetaFamilyFit => "beta-family-fit",
            Experiment::BetaFamilyBayes => "beta-family-bayes",
            Experiment::DataConsistent => "data-consistent",
            Experiment::FieldFirstAttempt => "field-first-attempt",
            Experiment::FieldSecondAttempt => "field-second-attempt",
            Experiment::TruncationStudy => "truncation-study",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::ContourQuadrants => "ansatz probabilities of the four quadrants of the unit square",
            Experiment::ContourPdfs => "band estimates of the uniform law's conditional along three contours, with Monte Carlo oracle",
            Experiment::NonLebesgueRatio => "coefficient of variation of Beta/uniform conditional ratios along contours",
            Experiment::AnsatzGridAndValidation => "gridded ansatz pdf, its Q pushforward, and sum / square-sum predictives of three methods",
            Experiment::MaxEntFit => "L1 pushforward fit of maximum-entropy means over a parameter grid",
            Experiment::MaxEntBayes => "grid posterior of maximum-entropy means from product observations",
            Experiment::BetaFamilyFit => "L1 pushforward fit of symmetric Beta marginals, and the flat scale direction",
            Experiment::BetaFamilyBayes => "grid posterior of Beta(1, nu) marginals and its transport to the means",
            Experiment::DataConsistent => "data-consistent update of a uniform and a Beta(2,2) prior",
            Experiment::FieldFirstAttempt => "random-field inversion through the reciprocal 1/A on the KL scores of U",
            Experiment::FieldSecondAttempt => "random-field inversion regressing A directly on the KL scores of U",
            Experiment::TruncationStudy => "KL truncation levels of a spectral Gaussian process and its integral",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment {s:?}; expected one of {}", names.join(", "))
        })
    }
}

impl TryFrom<String> for Experiment {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Experiment> for String {
    fn from(e: Experiment) -> String {
        e.name().to_string()
    }
}

/// Resolution and range overrides shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Squares per axis of the gridded ansatz pdf.
    pub ansatz_cells: usize,
    /// Cells of the `[q_min, 1]` grid holding `f_Q = -log q`.
    pub product_bins: usize,
    /// Histogram bins on `[0, 1]` for sampled pushforwards.
    pub histogram_bins: usize,
    /// Rejection samples drawn from the ansatz pdf.
    pub rejection_samples: usize,
    pub contour_segments: usize,
    pub band_eps: f64,
    /// Points of the Monte Carlo band oracle.
    pub oracle_samples: usize,
    /// Cells per axis of L1 fit surfaces.
    pub fit_cells: usize,
    /// `[mu1_lo, mu1_hi, mu2_lo, mu2_hi]`.
    pub maxent_fit_box: [f64; 4],
    /// `[nu1_lo, nu1_hi, nu2_lo, nu2_hi]`.
    pub beta_fit_box: [f64; 4],
    /// `[lambda_lo, lambda_hi]` of the scaled symmetric family at `nu = 1`.
    pub scale_range: [f64; 2],
    /// Cells per axis of posterior grids.
    pub param_cells: usize,
    /// Uniform prior box of the maxent means.
    pub maxent_prior_box: [f64; 4],
    /// Uniform prior box of `(nu1, nu2)` for the known-family predictive.
    pub predictive_prior_box: [f64; 4],
    /// Observed product samples for the Bayesian experiments.
    pub n_obs: usize,
    /// Cells of the `[0, 2]` grid for sum predictives.
    pub predictive_cells: usize,
    /// Cells per axis of the data-consistent prior grid.
    pub dc_cells: usize,
    pub dc_validation_samples: usize,
    pub dc_validation_bins: usize,
    pub field_samples: usize,
    pub mesh_points: usize,
    /// Matern smoothness is fixed at 5/2; this is the length scale.
    pub matern_length: f64,
    pub truncation_meshes: Vec<usize>,
    pub alpha: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            ansatz_cells: 100,
            product_bins: 500,
            histogram_bins: 50,
            rejection_samples: 50_000,
            contour_segments: 100,
            band_eps: 1e-3,
            oracle_samples: 10_000_000,
            fit_cells: 25,
            maxent_fit_box: [0.0, 0.75, 0.4, 1.0],
            beta_fit_box: [0.0, 10.0, 0.0, 10.0],
            scale_range: [0.5, 2.0],
            param_cells: 51,
            maxent_prior_box: [0.25, 0.75, 0.25, 0.75],
            predictive_prior_box: [0.75, 1.25, 0.75, 1.25],
            n_obs: 100,
            predictive_cells: 200,
            dc_cells: 100,
            dc_validation_samples: 100_000,
            dc_validation_bins: 100,
            field_samples: 10_000,
            mesh_points: 201,
            matern_length: 0.03,
            truncation_meshes: vec![101, 201, 401],
            alpha: 0.95,
        }
    }
}

/// One config document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub params: Params,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// A config with every choice made.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub params: Params,
}

/// Merge command-line overrides into an optional config file.
pub fn resolve(
    file: Option<Config>,
    experiment: Option<Experiment>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> anyhow::Result<Resolved> {
    let c = file.unwrap_or_default();
    let Some(experiment) = experiment.or(c.experiment) else {
        bail!("no experiment given (use --experiment or the config's \"experiment\" field)");
    };
    let threads = threads.or(c.threads);
    if threads == Some(0) {
        bail!("--threads must be positive");
    }
    Ok(Resolved {
        experiment,
        seed: seed.or(c.seed).unwrap_or(0),
        output_dir: out.or(c.output_dir).unwrap_or_else(|| PathBuf::from("out").join(experiment.name())),
        threads,
        params: c.params,
    })
}
