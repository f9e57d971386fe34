//! Data generators for the simulation designs and a replicate runner that
//! produces boxplot-ready summaries.

mod scenario;
mod study;

pub use scenario::{
    catalog, expected_missing_fraction, find_scenario, generate, generate_model, normal_fits, CovariateLaw, FitSpec,
    SimScenario,
};
pub use study::{
    export_summary, quantile, read_summary, run_study, summarize, summarize_records, summary_rows, write_summary,
    ParamSummary, ReplicateFit, ReplicateRecord, StudyOptions, StudyRun, StudySummary, SummaryRow, TemplateSummary,
    SUMMARY_COLUMNS,
};
