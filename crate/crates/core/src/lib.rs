//! Global sensitivity analysis for models that produce two-dimensional
//! scalar maps.
//!
//! The library covers two complementary views of a map-valued model:
//!
//! * a pointwise view, where first-order Sobol' indices are estimated at
//!   every grid cell and aggregated into variance-weighted generalized
//!   indices ([`sobol`]);
//! * a set-valued view, where each output map is lifted to its hypograph
//!   on a discretized 3-D grid and analysed with three families of
//!   set-valued indices: Vorob'ev median-deviation indices ([`vorobev`]),
//!   universal indices over test-set families ([`universal`]), and
//!   HSIC kernel indices with independence tests ([`hsic`]).
//!
//! Supporting machinery: input distributions and experimental designs
//! ([`sampling`]), synthetic and table-backed models ([`model`]),
//! discretized set arithmetic ([`setgrid`]) and a bootstrap engine
//! ([`resample`]).
//!
//! Everything is deterministic for a fixed seed, independent of thread
//! count.

pub mod error;
pub mod hsic;
pub mod model;
pub mod quad;
pub mod resample;
pub mod rng;
pub mod sampling;
pub mod setgrid;
pub mod sobol;
pub mod universal;
pub mod vorobev;

pub use error::{Error, Result};
pub use hsic::{HsicAnalysis, HsicEstimate, InputKernel, InputRescale, PvalueMethod};
pub use model::{
    CountingModel, DomainGrid, ExternalTable, LevelGrid, MapField, MapModel, SetModel,
    SyntheticPlume, SyntheticSeparable,
};
pub use resample::{BootstrapSpec, ResampleMode};
pub use sampling::{Dist, DistributionSpec, InputSpace, PickFreezeDesign};
pub use setgrid::{CoverageField, GridDims, SetSample};
pub use sobol::SobolMapResult;
pub use universal::{FamilyKind, LawQ, TestSetFamily, UniversalEstimate};
pub use vorobev::VorobevEstimate;
