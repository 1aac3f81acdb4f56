//! Probes over trained and analytic codes: per-round linear regression,
//! power allocation against index errors, blocklength composition and
//! throughput.

mod bench;
mod blocklength;
mod power;
mod probe;

pub use bench::{hardware_note, throughput_bench, BenchTarget, LightCodeBench, PbBench, ThroughputReport, BENCH_REPS};
pub use blocklength::{blocklength_table, BlocklengthRow};
pub use power::{power_distribution_report, power_report_from, Lda, PowerReport, PowerRow, LDA_RIDGE, REPORT_ROWS};
pub use probe::{
    fit_linear_probe, linear_probe, LinearProbeResult, ProbeMode, ProbeSamples, RoundEncoder, SymbolFit,
    MIN_PROBE_SAMPLES, PROBE_STREAMS, RIDGE,
};
