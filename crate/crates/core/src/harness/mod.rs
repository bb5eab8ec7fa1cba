//! Adversaries, dataset ingestion, parameter sweeps and rate fitting.

mod adversary;
mod ingest;
mod rate;
mod select;
mod sweep;

pub use adversary::{generate_stream, AdversaryKind, AdversarySpec, TAIL_RADIUS};
pub use ingest::{ingest_csv, ingest_csv_reader, Ingested};
pub use rate::{fit_points, fit_rate, median, RateFit};
pub use select::{evaluate, load_finite_class, parse_class, parse_losses, MetricName, NRule};
pub use sweep::{read_results, row_seed, run_row, run_sweep, ResultRow, SweepConfig, THREADS_ENV};
