//! Confidence bands for partially identified average treatment effects
//! under Manski bounds, with concentration-inequality padding for
//! estimated supports and a sequential threshold scan.
//!
//! The modules build on each other: [`panel`] loads data and assigns
//! treatment, [`estimators`] reduces a split to per-arm statistics,
//! [`manski`], [`concentration`] and [`hybrid`] turn those into bands,
//! [`sequential`] scans a threshold grid, and [`montecarlo`] runs the
//! coverage study.

pub mod bands;
pub mod concentration;
pub mod error;
pub mod estimators;
pub mod hybrid;
pub mod manski;
pub mod montecarlo;
pub mod normal;
pub mod panel;
pub mod sequential;
pub mod synthetic;

pub use bands::{compute_band, BandConfig, BandResult, Method};
pub use concentration::{
    BernsteinWeakConstants, Dependence, MeanPaddingRule, PaddedBand, PaddingConfig, Paddings,
    PerArm, Sides, Truncation,
};
pub use error::{Error, Result};
pub use estimators::{group_stats, Arm, ArmStats, GroupStats, NaiveEstimate, VarianceMode};
pub use hybrid::{hybrid_band, Algorithm1Bands, BandForm, HybridBand, SupportRule};
pub use manski::{
    manski_region, prop1_band, DeltaMethodBand, IdentificationRegion, ShareCoupling,
    SupportBounds, SupportSource,
};
pub use montecarlo::{CoverageCell, CoverageMethod, DgpId, DgpParams, DgpSpec, ManskiVariant, SimOptions};
pub use panel::{assign_treatment, load_csv, Observation, PanelDataset, Schema, TreatmentAssignment};
pub use sequential::{scan, Direction, ScanOptions, ScanResult, ScanRow, ThresholdGrid};
