//! Respondent-driven sampling on a population graph.

mod design;
mod forest;
mod simulate;

pub use design::{parse_pmf, RdsDesign, Regime};
pub use forest::{
    read_forest_csv, recruiters_of, write_forest_csv, ForestEntry, ForestRecord, RecruitmentForest,
};
pub use simulate::{draw_seeds_pps, simulate_rds};
