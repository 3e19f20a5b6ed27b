//! Forward simulation and maximum-likelihood characterization of small
//! integrated linear-optical multiports.
//!
//! The crate models two laser-written glass devices: a three-waveguide
//! single-coupling-region 3-port (a "tritter") and a 4-port built from four
//! directional couplers with an inner waveguide crossing. From a device's
//! transfer matrix it predicts classical power splitting, two-photon
//! coincidence probabilities, and Hong-Ou-Mandel visibilities; from
//! measured data it fits the device parameters back out, so quantum
//! interference can be predicted from classical intensity measurements
//! alone.
//!
//! The layered structure mirrors the measurement chain:
//!
//! - [`linop`]: complex matrices, Hermitian coupling matrices, unitary
//!   transfer matrices, and the matrix exponential between them.
//! - [`devices`]: the tritter and 4-port constructors plus ideal
//!   reference devices.
//! - [`two_photon`]: coincidence probabilities, visibilities, visibility
//!   matrices, and coupling sweeps.
//! - [`characterize`]: the lossy intensity model, loss-cancelling
//!   fractions, and weighted least-squares parameter fits.
//! - [`hom`]: delay-scanned coincidence dips with counting noise, and dip
//!   fitting back to visibilities.
//! - [`io`]: measurement/report file schemas, CSV tables, and the fit
//!   pipeline used by the `multiport` binary.
//!
//! ```
//! use multiport::devices::{tritter_unitary, TritterCoupling};
//! use multiport::two_photon::{visibility, PortPair};
//!
//! let u = tritter_unitary(&TritterCoupling::new(0.81, 0.51)?)?;
//! let v = visibility(&u, PortPair::new(1, 2)?, PortPair::new(1, 2)?)?;
//! assert!(v > 0.0 && v < 1.0);
//! # Ok::<(), multiport::Error>(())
//! ```
//!
//! A narrative guide lives in the `book/` directory of the repository; its
//! code snippets are compiled and run as doc-tests of this crate.

pub mod characterize;
pub mod devices;
pub mod error;
pub mod hom;
pub mod io;
pub mod linop;
pub mod optim;
pub mod two_photon;

pub use error::{Error, Result};

// Keep the book's code snippets honest: each chapter is attached as a doc
// comment here so `cargo test --doc` compiles and runs them.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/transfer-matrices.md")]
    mod transfer_matrices {}
    #[doc = include_str!("../../../book/src/devices.md")]
    mod devices {}
    #[doc = include_str!("../../../book/src/two-photon.md")]
    mod two_photon {}
    #[doc = include_str!("../../../book/src/characterization.md")]
    mod characterization {}
    #[doc = include_str!("../../../book/src/hom-dips.md")]
    mod hom_dips {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
