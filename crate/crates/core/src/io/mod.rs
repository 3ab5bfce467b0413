//! File formats: traces, configuration, and result tables.

pub mod config;
pub mod results;
pub mod synth;
pub mod trace;

pub use config::{load_config, ConfigFile, UserDefaults, UserEntry};
pub use results::{
    comparison_table, emit_events_jsonl, format_sig, round_sig, summary_table, users_table, write_result, OutputFormat, Table,
};
pub use synth::{generate_synthetic_traces, CapacityPhase, CapacityStats};
pub use trace::{
    emit_capacity_trace, emit_encounter_trace, parse_capacity_trace, parse_encounter_trace, CapacitySeries,
    CapacityTrace, EncounterTrace,
};
