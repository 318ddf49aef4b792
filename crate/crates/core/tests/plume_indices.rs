//! End-to-end coherence of the four index families on the rotating-plume
//! benchmark: every estimator must separate the three driving inputs
//! from the two inert ones, from its own kind of sample, at a modest
//! budget.

use mapsens::model::{DomainGrid, LevelGrid, SetModel, SyntheticPlume};
use mapsens::sampling::{pick_freeze, DesignGenerator, DistributionSpec, InputSpace};
use mapsens::setgrid::SetSample;
use mapsens::universal::{make_family, universal_indices, FamilyKind, LawQ};
use mapsens::vorobev::vorobev_index;
use mapsens::{HsicAnalysis, InputKernel, PvalueMethod};
use ndarray::Array2;
use rand::Rng;

const ANGLE: usize = 0; // theta
const SPREAD: usize = 1; // u_inf
const AMPLITUDE: usize = 3; // beta
const INERT: [usize; 2] = [2, 4]; // q, nu_max
const DRIVING: [usize; 3] = [ANGLE, SPREAD, AMPLITUDE];

fn demo_space() -> InputSpace {
    InputSpace::from_specs(vec![
        ("theta", DistributionSpec::truncated_normal(0.7, 0.5, -0.35, 1.75)),
        ("u_inf", DistributionSpec::truncated_normal(8.0, 2.0, 5.0, 10.0)),
        (
            "q",
            DistributionSpec::truncated_skew_normal(450.0, 100.0, -3.0, 100.0, 500.0),
        ),
        ("beta", DistributionSpec::uniform(0.0, 1.0)),
        ("nu_max", DistributionSpec::uniform(30.0, 50.0)),
    ])
    .unwrap()
}

fn plume_set_model() -> SetModel {
    let model = SyntheticPlume::new(
        demo_space(),
        DomainGrid::unit(16, 16).unwrap(),
        ANGLE,
        SPREAD,
        AMPLITUDE,
    )
    .unwrap();
    SetModel::new(Box::new(model), LevelGrid::new(0.0, 1.0, 12).unwrap())
}

/// i.i.d. rows of the demo space.
fn mc_inputs(n: usize, seed: u64) -> Array2<f64> {
    let space = demo_space();
    let dists = space.compile().unwrap();
    let mut rng = mapsens::rng::derived_rng(seed, &[0xcafe]);
    Array2::from_shape_fn((n, space.p()), |(_, i)| {
        dists[i].inverse_cdf(rng.random()).unwrap()
    })
}

#[test]
fn generalized_sobol_separates_driving_inputs() {
    let model = SyntheticPlume::new(
        demo_space(),
        DomainGrid::unit(16, 16).unwrap(),
        ANGLE,
        SPREAD,
        AMPLITUDE,
    )
    .unwrap();
    let design = pick_freeze(&demo_space(), 1024, 3, DesignGenerator::Halton).unwrap();
    let result = mapsens::sobol::sobol_maps(&model, &design).unwrap();
    for i in DRIVING {
        assert!(
            result.generalized_index(i) > 0.05,
            "driving input {i} scored {}",
            result.generalized_index(i)
        );
    }
    for i in INERT {
        assert!(
            result.generalized_index(i).abs() <= 0.05,
            "inert input {i} scored {}",
            result.generalized_index(i)
        );
    }
}

#[test]
fn vorobev_scores_inert_inputs_near_zero() {
    let model = plume_set_model();
    // Conditioning on the angle pins the plume in place, so it is the
    // input that moves the conditional median; amplitude and spread mostly
    // rescale a set that the angle mixing has already flattened.
    let inert = vorobev_index(&model, INERT[0], 24, 24, 5, None).unwrap();
    assert!(
        inert.estimate.abs() <= 0.1,
        "inert input scored {}",
        inert.estimate
    );
    let angle = vorobev_index(&model, ANGLE, 24, 24, 5, None).unwrap();
    assert!(
        angle.estimate > inert.estimate + 0.3,
        "angle {} vs inert {}",
        angle.estimate,
        inert.estimate
    );
}

#[test]
fn universal_ranks_driving_above_inert() {
    let model = plume_set_model();
    let inputs = mc_inputs(400, 11);
    let sets: Vec<SetSample> = (0..400)
        .map(|j| model.realize(inputs.row(j).as_slice().unwrap()).unwrap())
        .collect();
    let family = make_family(
        FamilyKind::CenteredBalls,
        LawQ::Uniform { lo: 0.0, hi: 0.5 },
        None,
    )
    .unwrap();
    let ests = universal_indices(&inputs, &sets, &family, 100, 13, None).unwrap();
    let floor = DRIVING
        .iter()
        .map(|&i| ests[i].estimate)
        .fold(f64::INFINITY, f64::min);
    for i in INERT {
        assert!(
            ests[i].estimate.abs() <= 0.15,
            "inert input {i} scored {}",
            ests[i].estimate
        );
        assert!(
            floor > ests[i].estimate,
            "driving floor {floor} vs inert {}",
            ests[i].estimate
        );
    }
}

#[test]
fn hsic_pvalues_screen_inert_inputs() {
    let model = plume_set_model();
    let inputs = mc_inputs(300, 17);
    let sets: Vec<SetSample> = (0..300)
        .map(|j| model.realize(inputs.row(j).as_slice().unwrap()).unwrap())
        .collect();
    let analysis =
        HsicAnalysis::uniform_kernel(&demo_space(), &inputs, &sets, InputKernel::Sobolev1)
            .unwrap();
    for i in DRIVING {
        let p = analysis.pvalue(i, PvalueMethod::Permutation, 99, 23).unwrap();
        assert!(p <= 0.05, "driving input {i} has p {p}");
    }
    for i in INERT {
        let p = analysis.pvalue(i, PvalueMethod::Permutation, 99, 23).unwrap();
        assert!(p > 0.05, "inert input {i} has p {p}");
    }
}
