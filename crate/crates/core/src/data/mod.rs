//! Domain datasets: synthetic generators, CSV files and batching.

mod batcher;
mod csv;
mod dataset;
mod synthetic;

pub use batcher::Batcher;
pub use csv::{fmt_f64, load_csv, parse_csv, save_csv, to_csv_string};
pub use dataset::{check_homogeneous, DomainDataset};
pub use synthetic::{gen_gaussian_domains, gen_moons_domains, SyntheticSpec, SCALE_RATIO};
