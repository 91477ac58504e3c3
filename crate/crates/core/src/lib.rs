//! Simulation, k-mer combinatorics, excursion statistics and total variation
//! tools for comparing k-mer laws on a pair of trees.

pub mod cf_sim;
pub mod excursion;
pub mod kmer;
pub mod numeric;
pub mod phylo;
pub mod tv;

pub use cf_sim::{simulate_marked, BinarySequence, SimError, SimulationConfig};
pub use excursion::{ExcursionError, ExcursionSource, MomentEstimate};
pub use kmer::{KmerCountVector, KmerError, TransitionTable};
pub use phylo::{build_paper_trees, PaperTreePair, PaperTreeParams, PhyloError, Tree};
pub use tv::{Backend, FiniteDistribution, Statistic, TVReport, TvError};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
