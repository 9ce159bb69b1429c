//! Saddle-mediated transport in two-degree-of-freedom Hamiltonian systems.
//!
//! Unstable periodic orbits near index-1 saddles, their stable and unstable
//! manifold tubes, homoclinic and heteroclinic connections between them, and
//! shadowing orbits that follow prescribed itineraries through the resulting
//! connection graph. Three systems are built in: the physical double
//! pendulum, the point-mass double pendulum and the planar circular
//! restricted three-body problem.

pub mod connections;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod itinerary;
pub mod manifolds;
pub mod upo;
pub mod section;

mod linalg;

/// Library version, recorded in every CLI manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use section::{Direction, SectionSpec};

pub use dynamics::{apply_reverser, ModelKind, State, SystemModel};
pub use error::{Error, Result};

/// The user guide, compiled here so its code listings run as doc-tests.
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    pub mod systems {}
    #[doc = include_str!("../../../book/src/equilibria.md")]
    pub mod equilibria {}
    #[doc = include_str!("../../../book/src/periodic_orbits.md")]
    pub mod periodic_orbits {}
    #[doc = include_str!("../../../book/src/tubes.md")]
    pub mod tubes {}
    #[doc = include_str!("../../../book/src/connections.md")]
    pub mod connections {}
    #[doc = include_str!("../../../book/src/shadowing.md")]
    pub mod shadowing {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
