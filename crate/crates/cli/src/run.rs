//! Drives the configured analyses against the model and writes the
//! artifacts: `indices.csv`, `pvalues.csv` (when p-values are requested),
//! `summary.json` and the Sobol' map grids under `maps/`.
//!
//! Everything downstream of the config is seeded, so re-running the same
//! config reproduces every output file byte for byte.

use crate::config::{
    parse_family, AnalysisConfig, BootstrapConfig, ModelConfig, PvalueConfig, RunConfig,
};
use mapsens::model::{CountingModel, DomainGrid, LevelGrid, MapField, MapModel, SetModel};
use mapsens::rng::derived_rng;
use mapsens::sampling::{pick_freeze, DesignGenerator};
use mapsens::setgrid::{coverage, SetSample};
use mapsens::universal::{make_family, universal_indices, FamilyKind, LawQ};
use mapsens::vorobev::vorobev_index;
use mapsens::{
    BootstrapSpec, ExternalTable, HsicAnalysis, InputSpace, PvalueMethod, ResampleMode, Result,
    SyntheticPlume, SyntheticSeparable,
};
use ndarray::Array2;
use rand::Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::Ordering;

const UNIVERSAL_INPUT_TAG: u64 = 0x7569;
const HSIC_INPUT_TAG: u64 = 0x6869;
/// Subsample fraction of the universal index bootstrap (the rank pairing
/// needs distinct observations, so replicates draw without replacement).
const UNIVERSAL_SUBSAMPLE: f64 = 0.8;

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub model: String,
    pub inputs: Vec<String>,
    pub grid: GridSummary,
    pub pilot_evaluations: usize,
    pub analyses: Vec<AnalysisSummary>,
    pub total_evaluations: usize,
    pub index_rows: usize,
    pub pvalue_rows: usize,
}

impl RunSummary {
    pub fn all_ok(&self) -> bool {
        self.analyses.iter().all(|a| a.status == "ok")
    }
}

#[derive(Debug, Serialize)]
pub struct GridSummary {
    pub n1: usize,
    pub n2: usize,
    pub nc: usize,
    pub c_min: f64,
    pub c_max: f64,
}

#[derive(Debug, Serialize)]
pub struct AnalysisSummary {
    pub method: String,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub evaluations: usize,
}

struct IndexRow {
    input: String,
    method: &'static str,
    estimate: f64,
    ci: Option<(f64, f64)>,
    n: usize,
    b: usize,
    seed: u64,
    extra: String,
}

struct PvalueRow {
    input: String,
    kernel: &'static str,
    method: &'static str,
    pvalue: f64,
    b_perm: usize,
    seed: u64,
}

fn build_model(config: &RunConfig, space: InputSpace) -> Result<Box<dyn MapModel + Sync + Send>> {
    let g = &config.grid;
    match &config.model {
        ModelConfig::Plume {
            angle,
            spread,
            amplitude,
        } => {
            let idx = |name: &str| space.index_of(name).expect("validated");
            let (a, s, m) = (idx(angle), idx(spread), idx(amplitude));
            let grid = DomainGrid::new(g.x1_bounds, g.x2_bounds, g.n1, g.n2)?;
            Ok(Box::new(SyntheticPlume::new(space, grid, a, s, m)?))
        }
        ModelConfig::Separable { mean, terms } => {
            let grid = DomainGrid::new(g.x1_bounds, g.x2_bounds, g.n1, g.n2)?;
            let terms = terms.iter().map(|t| (t.basis, t.link)).collect();
            Ok(Box::new(SyntheticSeparable::new(space, grid, *mean, terms)?))
        }
        ModelConfig::Table { path } => Ok(Box::new(ExternalTable::from_path(
            path,
            space,
            g.x1_bounds,
            g.x2_bounds,
        )?)),
    }
}

/// i.i.d. sample of the input space, one derived stream per column.
fn iid_inputs(space: &InputSpace, n: usize, seed: u64, tag: u64) -> Result<Array2<f64>> {
    let dists = space.compile()?;
    let mut m = Array2::zeros((n, space.p()));
    for (j, dist) in dists.iter().enumerate() {
        let mut rng = derived_rng(seed, &[tag, j as u64]);
        for k in 0..n {
            m[[k, j]] = dist.inverse_cdf(rng.random())?;
        }
    }
    Ok(m)
}

fn realize_all(model: &SetModel, inputs: &Array2<f64>) -> Result<Vec<SetSample>> {
    (0..inputs.nrows())
        .map(|k| model.realize(inputs.row(k).as_slice().expect("standard layout")))
        .collect()
}

fn boot_spec(cfg: &BootstrapConfig, mode: ResampleMode) -> Option<BootstrapSpec> {
    if !cfg.enabled {
        return None;
    }
    Some(BootstrapSpec {
        b: cfg.b,
        mode,
        level: cfg.level,
        seed: cfg.seed,
    })
}

fn design_name(d: DesignGenerator) -> &'static str {
    match d {
        DesignGenerator::Mc => "mc",
        DesignGenerator::Halton => "halton",
    }
}

fn fmt_ci(ci: Option<(f64, f64)>) -> (String, String) {
    match ci {
        Some((lo, hi)) => (lo.to_string(), hi.to_string()),
        None => (String::new(), String::new()),
    }
}

fn map_csv(field: &MapField, method: &str, label: &str, n: usize, seed: u64) -> String {
    let g = field.grid();
    let (x1, x2) = (g.x1_bounds(), g.x2_bounds());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# x1 [{}, {}] n1={} ; x2 [{}, {}] n2={}",
        x1.0,
        x1.1,
        g.n1(),
        x2.0,
        x2.1,
        g.n2()
    );
    let _ = writeln!(s, "# method={method} field={label} n={n} seed={seed}");
    for i in 0..g.n1() {
        let row: Vec<String> = (0..g.n2()).map(|j| field.value(i, j).to_string()).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let space = config.input_space()?;
    let names: Vec<String> = space.names().iter().map(|s| s.to_string()).collect();

    let counting = CountingModel::new(BoxedModel(build_model(config, space.clone())?));
    let counter = counting.counter();
    let set_model = match config.level_bounds() {
        Some((lo, hi)) => SetModel::new(
            Box::new(counting),
            LevelGrid::new(lo, hi, config.grid.nc)?,
        ),
        None => SetModel::with_auto_levels(Box::new(counting), config.grid.nc)?,
    };
    let pilot_evaluations = counter.load(Ordering::Relaxed);

    std::fs::create_dir_all(out_dir)?;
    let mut rows: Vec<IndexRow> = Vec::new();
    let mut pvrows: Vec<PvalueRow> = Vec::new();
    let mut any_pvalues = false;
    let mut summaries: Vec<AnalysisSummary> = Vec::new();

    for analysis in &config.analyses {
        let before = counter.load(Ordering::Relaxed);
        let outcome = run_one(
            analysis,
            config,
            &space,
            &names,
            &set_model,
            out_dir,
            &mut rows,
            &mut pvrows,
        );
        if let AnalysisConfig::Hsic { pvalues, .. } = analysis {
            if *pvalues != PvalueConfig::None {
                any_pvalues = true;
            }
        }
        let evaluations = counter.load(Ordering::Relaxed) - before;
        summaries.push(match outcome {
            Ok(()) => AnalysisSummary {
                method: analysis.method_name().into(),
                seed: analysis.seed(),
                status: "ok".into(),
                error: None,
                evaluations,
            },
            Err(e) => AnalysisSummary {
                method: analysis.method_name().into(),
                seed: analysis.seed(),
                status: "error".into(),
                error: Some(e.to_string()),
                evaluations,
            },
        });
    }

    let mut indices = String::from("input,method,estimate,ci_lo,ci_hi,n,B,seed,extra\n");
    for r in &rows {
        let (lo, hi) = fmt_ci(r.ci);
        let _ = writeln!(
            indices,
            "{},{},{},{},{},{},{},{},{}",
            r.input, r.method, r.estimate, lo, hi, r.n, r.b, r.seed, r.extra
        );
    }
    std::fs::write(out_dir.join("indices.csv"), indices)?;

    if any_pvalues {
        let mut pv = String::from("input,kernel,method,pvalue,b_perm,seed\n");
        for r in &pvrows {
            let _ = writeln!(
                pv,
                "{},{},{},{},{},{}",
                r.input, r.kernel, r.method, r.pvalue, r.b_perm, r.seed
            );
        }
        std::fs::write(out_dir.join("pvalues.csv"), pv)?;
    }

    let levels = set_model.levels();
    let summary = RunSummary {
        model: config.model.kind_name().into(),
        inputs: names,
        grid: GridSummary {
            n1: set_model.map_model().grid().n1(),
            n2: set_model.map_model().grid().n2(),
            nc: levels.nc(),
            c_min: levels.c_min(),
            c_max: levels.c_max(),
        },
        pilot_evaluations,
        total_evaluations: counter.load(Ordering::Relaxed),
        index_rows: rows.len(),
        pvalue_rows: pvrows.len(),
        analyses: summaries,
    };
    let json = serde_json::to_string_pretty(&summary).expect("plain data");
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}

/// `SetModel` owns its model box, but analyses built from the same config
/// share one; this adapter lets the counting wrapper own the inner box.
struct BoxedModel(Box<dyn MapModel + Sync + Send>);

impl MapModel for BoxedModel {
    fn space(&self) -> &InputSpace {
        self.0.space()
    }
    fn grid(&self) -> &DomainGrid {
        self.0.grid()
    }
    fn evaluate(&self, u: &[f64]) -> Result<MapField> {
        self.0.evaluate(u)
    }
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    analysis: &AnalysisConfig,
    config: &RunConfig,
    space: &InputSpace,
    names: &[String],
    set_model: &SetModel,
    out_dir: &Path,
    rows: &mut Vec<IndexRow>,
    pvrows: &mut Vec<PvalueRow>,
) -> Result<()> {
    let model = set_model.map_model();
    match analysis {
        AnalysisConfig::SobolMaps { n, seed, design } => {
            let d = pick_freeze(space, *n, *seed, *design)?;
            let result = mapsens::sobol::sobol_maps(model, &d)?;
            let maps_dir = out_dir.join("maps");
            std::fs::create_dir_all(&maps_dir)?;
            for (i, name) in names.iter().enumerate() {
                let csv = map_csv(
                    result.index_map(i),
                    "sobol-maps",
                    &format!("S_{name}"),
                    *n,
                    *seed,
                );
                std::fs::write(maps_dir.join(format!("S_{name}.csv")), csv)?;
            }
            let csv = map_csv(result.variance_map(), "sobol-maps", "variance", *n, *seed);
            std::fs::write(maps_dir.join("variance.csv"), csv)?;
        }
        AnalysisConfig::GeneralizedSobol { n, seed, design } => {
            let d = pick_freeze(space, *n, *seed, *design)?;
            let boot = boot_spec(&config.bootstrap, ResampleMode::WithReplacement);
            let result = match &boot {
                Some(spec) => mapsens::sobol::sobol_maps_bootstrap(model, &d, spec)?,
                None => mapsens::sobol::sobol_maps(model, &d)?,
            };
            let cis = result.generalized_ci();
            for (i, name) in names.iter().enumerate() {
                rows.push(IndexRow {
                    input: name.clone(),
                    method: "generalized-sobol",
                    estimate: result.generalized_index(i),
                    ci: cis.map(|c| c[i]),
                    n: *n,
                    b: boot.map_or(0, |b| b.b),
                    seed: *seed,
                    extra: format!("design={}", design_name(*design)),
                });
            }
        }
        AnalysisConfig::Vorobev {
            n_outer,
            n_inner,
            seed,
            inputs,
        } => {
            let boot = boot_spec(&config.bootstrap, ResampleMode::WithReplacement);
            let targets: Vec<usize> = match inputs {
                Some(subset) => subset
                    .iter()
                    .map(|name| space.index_of(name).expect("validated"))
                    .collect(),
                None => (0..space.p()).collect(),
            };
            for i in targets {
                let est = vorobev_index(set_model, i, *n_outer, *n_inner, *seed, boot.as_ref())?;
                rows.push(IndexRow {
                    input: names[i].clone(),
                    method: "vorobev",
                    estimate: est.estimate,
                    ci: est.ci,
                    n: est.evaluations,
                    b: boot.map_or(0, |b| b.b),
                    seed: *seed,
                    extra: format!(
                        "n_outer={};n_inner={};vmd={}",
                        est.n_outer, est.n_inner, est.vmd
                    ),
                });
            }
        }
        AnalysisConfig::Universal {
            family,
            axis,
            law,
            n,
            n_a,
            seed,
        } => {
            let kind = parse_family(family, *axis).map_err(mapsens::Error::Param)?;
            let inputs_m = iid_inputs(space, *n, *seed, UNIVERSAL_INPUT_TAG)?;
            let sets = realize_all(set_model, &inputs_m)?;
            let cov = if kind == FamilyKind::VorobevQuantiles {
                Some(coverage(&sets)?)
            } else {
                None
            };
            let law = law.map_or_else(|| LawQ::default_for(kind), |l| l.to_law());
            let fam = make_family(kind, law, cov)?;
            let boot = boot_spec(
                &config.bootstrap,
                ResampleMode::Subsample {
                    fraction: UNIVERSAL_SUBSAMPLE,
                    correction: true,
                },
            );
            let ests = universal_indices(&inputs_m, &sets, &fam, *n_a, *seed, boot.as_ref())?;
            for est in ests {
                rows.push(IndexRow {
                    input: names[est.input].clone(),
                    method: "universal",
                    estimate: est.estimate,
                    ci: est.ci,
                    n: est.n,
                    b: boot.map_or(0, |b| b.b),
                    seed: *seed,
                    extra: format!("family={};n_a={}", est.family, est.n_a),
                });
            }
        }
        AnalysisConfig::Hsic {
            kernel,
            rescale,
            pvalues,
            b_perm,
            n,
            seed,
        } => {
            let inputs_m = iid_inputs(space, *n, *seed, HSIC_INPUT_TAG)?;
            let sets = realize_all(set_model, &inputs_m)?;
            let kernels = vec![kernel.clone(); space.p()];
            let analysis = HsicAnalysis::with_rescale(
                space,
                &inputs_m,
                &sets,
                &kernels,
                rescale.to_rescale(),
            )?;
            let boot = boot_spec(&config.bootstrap, ResampleMode::WithReplacement);
            let pv_method = match pvalues {
                PvalueConfig::Permutation => Some((PvalueMethod::Permutation, "permutation")),
                PvalueConfig::Gamma => Some((PvalueMethod::Gamma, "gamma")),
                PvalueConfig::None => None,
            };
            for (i, name) in names.iter().enumerate() {
                let est = analysis.s_hsic(i, boot.as_ref())?;
                rows.push(IndexRow {
                    input: name.clone(),
                    method: "hsic",
                    estimate: est.estimate,
                    ci: est.ci,
                    n: *n,
                    b: boot.map_or(0, |b| b.b),
                    seed: *seed,
                    extra: format!(
                        "kernel={};rescale={};hsic={};sigma2={}",
                        kernel.label(),
                        rescale.label(),
                        est.hsic,
                        est.sigma2
                    ),
                });
                if let Some((method, method_name)) = pv_method {
                    let p = analysis.pvalue(i, method, *b_perm, *seed)?;
                    pvrows.push(PvalueRow {
                        input: name.clone(),
                        kernel: kernel.label(),
                        method: method_name,
                        pvalue: p,
                        b_perm: *b_perm,
                        seed: *seed,
                    });
                }
            }
        }
    }
    Ok(())
}
