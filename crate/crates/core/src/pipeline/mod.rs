//! End-to-end experiment: data, artifacts, training, scoring,
//! evaluation and report, driven by one [`RunConfig`].

mod config;
pub mod report;
mod results;
mod run;
mod stages;
pub mod svg;

pub use config::{
    paper_suite, ArtifactSection, ExternalData, FeatureBankSection, ModelSpec, PhantomSection,
    RunConfig,
};
pub use results::*;
pub use run::{run_experiment, run_pipeline, RunOutput, Stage};
pub use stages::*;
