//! Cluster sizing, head selection, re-formation and clustering feasibility.

pub mod feasibility;
pub mod reform;
pub mod selection;
pub mod size;

pub use feasibility::{clustering_feasibility, crossover_payload, FeasibilityInputs, FeasibilityReport};
pub use reform::{offcenter_member_distance, reformation_decision, ReformationDecision};
pub use selection::{
    ch_select, ch_tenure, ch_tenure_replay, maxmin_fairness_check, run_reselection, small_cluster_model,
    ChCandidateContext, ChTenure, FairnessReport, HeadDistanceMode, ReselectionPolicy, Selection, SelectionModel,
};
pub use size::{
    optimal_cluster_size, optimal_cluster_size_by, optimal_cluster_size_general, DensityArea, ReservationScenario,
    ScenarioPoint, SizeOptimum,
};
