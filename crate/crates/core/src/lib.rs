//! Scenario-based safety testing of autopilots against vista contexts.

pub mod bridge;
pub mod criticality;
pub mod dynamics;
pub mod metric_map;
pub mod oracle;
pub mod report;
pub mod sim;
pub mod sweep;
pub mod vista;
