//! Coupled-cluster Green's functions from shifted linear problems in the
//! `N ± 1` electron sectors, with a Lehmann-sum reference.

mod engine;
mod grid;
mod oracle;

pub use engine::{ducc_gfcc, gfcc, Components, GfOptions, GfSolver, GreensResult};
pub use grid::{find_peaks, find_peaks_in, FrequencyGrid, Peak, PEAK_FLOOR};
pub use oracle::{fci_lehmann_oracle, lehmann_poles, Pole};
