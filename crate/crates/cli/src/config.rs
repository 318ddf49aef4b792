//! Run configuration: one TOML file describing the inputs, the model, the
//! grids, the analyses to run, and where the artifacts go.
//!
//! See `configs/demo.toml` for a complete annotated example.

use mapsens::model::{Basis, Link};
use mapsens::sampling::{DesignGenerator, DistributionSpec};
use mapsens::{FamilyKind, InputKernel, InputSpace, LawQ};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<InputConfig>,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub analyses: Vec<AnalysisConfig>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub name: String,
    pub dist: DistributionSpec,
}

/// `deny_unknown_fields` is unavailable on internally tagged enums, so
/// stray keys inside `[model]` and `[[analyses]]` are ignored rather than
/// rejected; `validate` still catches every semantic problem.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    /// Rotating anisotropic Gaussian plume; the three roles name inputs.
    Plume {
        angle: String,
        spread: String,
        amplitude: String,
    },
    /// Additively separable `m(x) + sum_i a_i(x) g_i(u_i)`, one term per input.
    Separable {
        #[serde(default = "zero_basis")]
        mean: Basis,
        terms: Vec<TermConfig>,
    },
    /// Replay of stored evaluations (header `n1 n2`, then input/field records).
    Table { path: PathBuf },
}

impl ModelConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelConfig::Plume { .. } => "plume",
            ModelConfig::Separable { .. } => "separable",
            ModelConfig::Table { .. } => "table",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub basis: Basis,
    pub link: Link,
}

fn zero_basis() -> Basis {
    Basis::Zero
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "d64")]
    pub n1: usize,
    #[serde(default = "d64")]
    pub n2: usize,
    #[serde(default = "d32")]
    pub nc: usize,
    /// Level range `[lo, hi]`, or `"auto"` to pick it from a pilot sample.
    #[serde(default)]
    pub c_bounds: CBounds,
    #[serde(default = "unit")]
    pub x1_bounds: (f64, f64),
    #[serde(default = "unit")]
    pub x2_bounds: (f64, f64),
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n1: 64,
            n2: 64,
            nc: 32,
            c_bounds: CBounds::default(),
            x1_bounds: (0.0, 1.0),
            x2_bounds: (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CBounds {
    Named(String),
    Bounds((f64, f64)),
}

impl Default for CBounds {
    fn default() -> Self {
        CBounds::Named("auto".into())
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum AnalysisConfig {
    /// Pointwise index and variance maps, written under `maps/`.
    SobolMaps {
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "d_design")]
        design: DesignGenerator,
    },
    /// Variance-weighted generalized indices (rows in `indices.csv`).
    GeneralizedSobol {
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "d_design")]
        design: DesignGenerator,
    },
    Vorobev {
        #[serde(default = "d32")]
        n_outer: usize,
        #[serde(default = "d32")]
        n_inner: usize,
        #[serde(default)]
        seed: u64,
        /// Subset of input names; all inputs when omitted.
        #[serde(default)]
        inputs: Option<Vec<String>>,
    },
    Universal {
        #[serde(default = "d_family")]
        family: String,
        /// Slide axis (1..3); only meaningful for `family = "slides"`.
        #[serde(default)]
        axis: Option<usize>,
        #[serde(default)]
        law: Option<LawConfig>,
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default = "d_na")]
        n_a: usize,
        #[serde(default)]
        seed: u64,
    },
    Hsic {
        #[serde(default = "d_kernel")]
        kernel: InputKernel,
        /// How inputs are mapped to the kernel domain [0, 1]. The affine
        /// map is the default; `cdf` makes skewed inputs exactly uniform,
        /// which keeps their null indices centered at zero.
        #[serde(default)]
        rescale: RescaleConfig,
        #[serde(default)]
        pvalues: PvalueConfig,
        #[serde(default = "d_bperm")]
        b_perm: usize,
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl AnalysisConfig {
    pub fn method_name(&self) -> &'static str {
        match self {
            AnalysisConfig::SobolMaps { .. } => "sobol-maps",
            AnalysisConfig::GeneralizedSobol { .. } => "generalized-sobol",
            AnalysisConfig::Vorobev { .. } => "vorobev",
            AnalysisConfig::Universal { .. } => "universal",
            AnalysisConfig::Hsic { .. } => "hsic",
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            AnalysisConfig::SobolMaps { seed, .. }
            | AnalysisConfig::GeneralizedSobol { seed, .. }
            | AnalysisConfig::Vorobev { seed, .. }
            | AnalysisConfig::Universal { seed, .. }
            | AnalysisConfig::Hsic { seed, .. } => seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PvalueConfig {
    #[default]
    Permutation,
    Gamma,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RescaleConfig {
    #[default]
    Affine,
    Cdf,
}

impl RescaleConfig {
    pub fn to_rescale(self) -> mapsens::InputRescale {
        match self {
            RescaleConfig::Affine => mapsens::InputRescale::Bounds,
            RescaleConfig::Cdf => mapsens::InputRescale::Cdf,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RescaleConfig::Affine => "affine",
            RescaleConfig::Cdf => "cdf",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LawConfig {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl LawConfig {
    pub fn to_law(self) -> LawQ {
        match self {
            LawConfig::Uniform { lo, hi } => LawQ::Uniform { lo, hi },
            LawConfig::Normal { mean, sd } => LawQ::Normal { mean, sd },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "d_true")]
    pub enabled: bool,
    #[serde(default = "d_b")]
    pub b: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_level")]
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            enabled: true,
            b: 100,
            seed: 0,
            level: 0.95,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: d_dir() }
    }
}

fn d64() -> usize {
    64
}
fn unit() -> (f64, f64) {
    (0.0, 1.0)
}
fn d32() -> usize {
    32
}
fn d_n() -> usize {
    1000
}
fn d_na() -> usize {
    100
}
fn d_bperm() -> usize {
    200
}
fn d_b() -> usize {
    100
}
fn d_level() -> f64 {
    0.95
}
fn d_true() -> bool {
    true
}
fn d_design() -> DesignGenerator {
    DesignGenerator::Halton
}
fn d_family() -> String {
    "centered-balls".into()
}
fn d_kernel() -> InputKernel {
    InputKernel::Sobolev1
}
fn d_dir() -> PathBuf {
    PathBuf::from("out")
}

pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Problems block a run; notes are informational (memory estimates and
/// defaults that were filled in).
#[derive(Debug, Default)]
pub struct ValidationReport {
    pub problems: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

impl RunConfig {
    pub fn input_space(&self) -> mapsens::Result<InputSpace> {
        InputSpace::from_specs(
            self.inputs
                .iter()
                .map(|i| (i.name.clone(), i.dist.clone()))
                .collect(),
        )
    }

    pub fn level_bounds(&self) -> Option<(f64, f64)> {
        match &self.grid.c_bounds {
            CBounds::Bounds(b) => Some(*b),
            CBounds::Named(_) => None,
        }
    }

    /// Dry-run checks; never evaluates the model.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let problem = |r: &mut ValidationReport, m: String| r.problems.push(m);

        if self.inputs.is_empty() {
            problem(&mut report, "no inputs declared".into());
        }
        match self.input_space() {
            Ok(_) => {}
            Err(e) => problem(&mut report, format!("inputs: {e}")),
        }
        let names: Vec<&str> = self.inputs.iter().map(|i| i.name.as_str()).collect();

        match &self.model {
            ModelConfig::Plume {
                angle,
                spread,
                amplitude,
            } => {
                for (role, name) in [("angle", angle), ("spread", spread), ("amplitude", amplitude)]
                {
                    if !names.contains(&name.as_str()) {
                        problem(
                            &mut report,
                            format!("model.{role}: no input named `{name}`"),
                        );
                    }
                }
                if angle == spread || angle == amplitude || spread == amplitude {
                    problem(&mut report, "model: plume roles must be distinct".into());
                }
            }
            ModelConfig::Separable { terms, .. } => {
                if terms.len() != self.inputs.len() {
                    problem(
                        &mut report,
                        format!(
                            "model: {} terms for {} inputs (one term per input)",
                            terms.len(),
                            self.inputs.len()
                        ),
                    );
                }
            }
            ModelConfig::Table { path } => {
                if !path.exists() {
                    problem(
                        &mut report,
                        format!("model.path: `{}` does not exist", path.display()),
                    );
                } else {
                    report
                        .notes
                        .push("table model: grid n1, n2 come from the file header".into());
                }
            }
        }

        let g = &self.grid;
        if g.n1 == 0 || g.n2 == 0 || g.nc == 0 {
            problem(
                &mut report,
                format!("grid: n1, n2, nc must be >= 1 (got {}x{}x{})", g.n1, g.n2, g.nc),
            );
        }
        for (label, (lo, hi)) in [("x1_bounds", g.x1_bounds), ("x2_bounds", g.x2_bounds)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                problem(&mut report, format!("grid.{label}: bad range ({lo}, {hi})"));
            }
        }
        match &g.c_bounds {
            CBounds::Named(s) if s != "auto" => {
                problem(
                    &mut report,
                    format!("grid.c_bounds: expected a [lo, hi] pair or \"auto\", got `{s}`"),
                );
            }
            CBounds::Bounds((lo, hi)) if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                problem(&mut report, format!("grid.c_bounds: bad range ({lo}, {hi})"));
            }
            _ => {}
        }

        if self.analyses.is_empty() {
            problem(&mut report, "no analyses configured".into());
        }
        let mut peak_sets = 0usize;
        for (k, a) in self.analyses.iter().enumerate() {
            let tag = format!("analyses[{k}] ({})", a.method_name());
            match a {
                AnalysisConfig::SobolMaps { n, .. } | AnalysisConfig::GeneralizedSobol { n, .. } => {
                    if *n < 2 {
                        problem(&mut report, format!("{tag}: n must be >= 2"));
                    }
                }
                AnalysisConfig::Vorobev {
                    n_outer,
                    n_inner,
                    inputs,
                    ..
                } => {
                    if *n_outer < 2 || *n_inner < 2 {
                        problem(&mut report, format!("{tag}: n_outer, n_inner must be >= 2"));
                    }
                    if let Some(subset) = inputs {
                        for name in subset {
                            if !names.contains(&name.as_str()) {
                                problem(&mut report, format!("{tag}: no input named `{name}`"));
                            }
                        }
                    }
                    peak_sets = peak_sets.max(n_outer.max(n_inner) + 1);
                }
                AnalysisConfig::Universal {
                    family,
                    axis,
                    law,
                    n,
                    n_a,
                    ..
                } => {
                    if *n < 3 {
                        problem(&mut report, format!("{tag}: n must be >= 3"));
                    }
                    if *n_a == 0 {
                        problem(&mut report, format!("{tag}: n_a must be >= 1"));
                    }
                    match parse_family(family, *axis) {
                        Ok(_) => {}
                        Err(e) => problem(&mut report, format!("{tag}: {e}")),
                    }
                    if axis.is_some() && family != "slides" {
                        problem(
                            &mut report,
                            format!("{tag}: axis only applies to the slides family"),
                        );
                    }
                    if let Some(l) = law {
                        if let Err(e) = check_law(*l) {
                            problem(&mut report, format!("{tag}: {e}"));
                        }
                    }
                    peak_sets = peak_sets.max(n + n_a);
                }
                AnalysisConfig::Hsic {
                    kernel,
                    pvalues,
                    b_perm,
                    n,
                    ..
                } => {
                    if *n < 2 {
                        problem(&mut report, format!("{tag}: n must be >= 2"));
                    }
                    if let Err(e) = kernel.validate() {
                        problem(&mut report, format!("{tag}: {e}"));
                    }
                    match pvalues {
                        PvalueConfig::None => {}
                        method => {
                            if *n < 10 {
                                problem(
                                    &mut report,
                                    format!("{tag}: independence tests need n >= 10"),
                                );
                            }
                            if *b_perm == 0 {
                                problem(&mut report, format!("{tag}: b_perm must be >= 1"));
                            }
                            if *method == PvalueConfig::Gamma && *b_perm < 20 {
                                problem(
                                    &mut report,
                                    format!("{tag}: the gamma approximation needs b_perm >= 20"),
                                );
                            }
                        }
                    }
                    peak_sets = peak_sets.max(*n);
                }
            }
        }

        if self.bootstrap.enabled {
            if self.bootstrap.b < 2 {
                problem(&mut report, "bootstrap: b must be >= 2".into());
            }
            if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
                problem(
                    &mut report,
                    format!("bootstrap: level {} outside (0, 1)", self.bootstrap.level),
                );
            }
        }

        if report.ok() && peak_sets > 0 {
            let words_per_set = (g.n1 * g.n2 * g.nc).div_ceil(64);
            let bytes = peak_sets * words_per_set * 8;
            report.notes.push(format!(
                "peak set storage ~ {:.1} MiB ({peak_sets} sets of {}x{}x{} cells)",
                bytes as f64 / (1024.0 * 1024.0),
                g.n1,
                g.n2,
                g.nc
            ));
        }
        report
    }
}

pub fn parse_family(name: &str, axis: Option<usize>) -> Result<FamilyKind, String> {
    match name {
        "centered-balls" => Ok(FamilyKind::CenteredBalls),
        "centered-squares" => Ok(FamilyKind::CenteredSquares),
        "slides" => {
            let axis = axis.unwrap_or(3);
            if (1..=3).contains(&axis) {
                Ok(FamilyKind::Slides { axis })
            } else {
                Err(format!("slide axis must be 1..3, got {axis}"))
            }
        }
        "vorobev-quantiles" => Ok(FamilyKind::VorobevQuantiles),
        other => Err(format!(
            "unknown family `{other}` (expected centered-balls, centered-squares, slides or vorobev-quantiles)"
        )),
    }
}

fn check_law(law: LawConfig) -> Result<(), String> {
    match law {
        LawConfig::Uniform { lo, hi } => {
            if 0.0 <= lo && lo < hi && hi <= 1.0 {
                Ok(())
            } else {
                Err(format!("law: U[{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"))
            }
        }
        LawConfig::Normal { mean, sd } => {
            if mean.is_finite() && sd > 0.0 {
                Ok(())
            } else {
                Err(format!("law: N({mean}, {sd}^2) needs finite mean and sd > 0"))
            }
        }
    }
}
