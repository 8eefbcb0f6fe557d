//! Campaign runner behind the `etuq` binary: configuration, the estimator
//! campaign, and the manifest/report artifacts.

pub mod campaign;
pub mod config;
pub mod error;
pub mod manifest;

pub use campaign::{run_campaign, write_trace, CampaignSummary};
pub use config::{CampaignConfig, MethodChoice, Overrides};
pub use error::{CliError, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
pub use manifest::{read_manifest, render_report, write_manifest, ManifestRow};
