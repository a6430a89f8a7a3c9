//! Latent-space models of dyadic interaction data.
//!
//! Contact records between pairs of individuals are reduced to per-dyad
//! counts ([`data`]), modeled through distance-dependent open/rate parameters
//! ([`model`]) over a Dirichlet-process-clustered latent space ([`space`]),
//! fit by a Gibbs sampler ([`sampler`]), and evaluated with posterior
//! predictive checks and link-formation lift ([`netstats`]).
//!
//! The clustering is what makes the likelihood tractable at scale: with `k`
//! distinct latent coordinates there are only `C(k,2) + 1` distinct empty-dyad
//! likelihood values, so a full-table evaluation costs `O(k^2 + |nonempty|)`
//! rather than `O(N^2)`.

pub mod data;
pub mod error;
pub mod model;
pub mod netstats;
mod numeric;
pub mod rng;
pub mod sampler;
pub mod space;

pub use data::{
    build_dyad_table, dyad_transition_counts, ingest_records, split_windows, total_dyads,
    DyadKey, DyadTable, IdPolicy, IngestResult, InteractionRecord, ObservationWindow,
    TransitionCounts,
};
pub use error::{Error, Result};
pub use model::{
    aggregated_loglik, dyad_params, link_mu, link_p, marginal_loglik, prob_nonempty_future,
    simulate_network, simulate_records, AggregatedLoglik, DyadParams, LinkCoefficients,
    ModelVariant, PopulationParams,
};
pub use space::{
    crp_simulate, expected_mass_points, latent_distance, radius_density, sample_angles,
    sample_h0, sample_radius, spherical_to_cartesian, ClusterTable, DpConcentration,
    LatentCoordinate, RadiusShape, Site, SphericalCoordinate,
};
