//! The two device models: a three-waveguide single-coupling-region tritter
//! and a four-port built from four directional couplers, plus ideal
//! reference devices used as oracles in tests.
//!
//! Transfer matrices follow the row-equals-input orientation of
//! [`TransferMatrix`]: entry (j,k) is the amplitude from input port j to
//! output port k.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linop::{expm_hermitian, matmul, ComplexMatrix, CouplingMatrix, TransferMatrix};

/// Practical upper bound on effective couplings; the transfer matrix is
/// periodic in them, so larger values add nothing.
pub const MAX_COUPLING: f64 = 4.0 * PI;

/// Effective couplings of the isosceles tritter interaction region.
///
/// `g_bar` couples the adjacent waveguide pairs (1,2) and (2,3);
/// `g_bar_outer` couples the outer pair (1,3). Both are dimensionless
/// (coupling strength times interaction length over phase velocity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TritterCoupling {
    pub g_bar: f64,
    pub g_bar_outer: f64,
    /// Common propagation phase; contributes only a global phase and
    /// cancels in every observable. Kept for completeness.
    #[serde(default)]
    pub beta: f64,
}

impl TritterCoupling {
    pub fn new(g_bar: f64, g_bar_outer: f64) -> Result<Self> {
        Self::with_beta(g_bar, g_bar_outer, 0.0)
    }

    pub fn with_beta(g_bar: f64, g_bar_outer: f64, beta: f64) -> Result<Self> {
        for (name, value) in [("g_bar", g_bar), ("g_bar_outer", g_bar_outer)] {
            if !value.is_finite() || !(0.0..=MAX_COUPLING).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be in [0, 4*pi], got {value}"),
                });
            }
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be finite, got {beta}"),
            });
        }
        Ok(Self {
            g_bar,
            g_bar_outer,
            beta,
        })
    }
}

/// Parameters of the four-coupler 4-port: the shared directional-coupler
/// reflectivity and the phase picked up on the inner crossing arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourPortParams {
    /// Directional-coupler reflectivity, in [0, 1].
    pub eta: f64,
    /// Inner-arm phase in radians, normalized to [-pi, pi).
    pub phi: f64,
}

impl FourPortParams {
    pub fn new(eta: f64, phi: f64) -> Result<Self> {
        if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be in [0, 1], got {eta}"),
            });
        }
        if !phi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: format!("must be finite, got {phi}"),
            });
        }
        Ok(Self {
            eta,
            phi: wrap_phase(phi),
        })
    }
}

/// Wrap an angle to [-pi, pi).
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut x = (phi + PI).rem_euclid(two_pi) - PI;
    if x >= PI {
        x -= two_pi;
    }
    x
}

/// The isosceles 3x3 coupling matrix
/// `[[beta, g, G], [g, beta, g], [G, g, beta]]`.
pub fn tritter_coupling_matrix(p: &TritterCoupling) -> Result<CouplingMatrix> {
    TritterCoupling::with_beta(p.g_bar, p.g_bar_outer, p.beta)?;
    let (b, g, gg) = (p.beta, p.g_bar, p.g_bar_outer);
    CouplingMatrix::from_real(3, &[b, g, gg, g, b, g, gg, g, b])
}

/// Tritter transfer matrix `U = exp(-i C)`; the effective interaction
/// length is already folded into the couplings.
pub fn tritter_unitary(p: &TritterCoupling) -> Result<TransferMatrix> {
    expm_hermitian(&tritter_coupling_matrix(p)?, 1.0)
}

/// Directional coupler of reflectivity `eta` on ports `i`, `j` (1-based)
/// of an `n_modes`-port device: the 2x2 block
/// `[[sqrt(eta), -i sqrt(1-eta)], [-i sqrt(1-eta), sqrt(eta)]]` embedded
/// in the identity.
pub fn beamsplitter_matrix(i: usize, j: usize, eta: f64, n_modes: usize) -> Result<TransferMatrix> {
    if i == j {
        return Err(Error::PortsNotDistinct { a: i, b: j });
    }
    for port in [i, j] {
        if port == 0 || port > n_modes {
            return Err(Error::PortOutOfRange { port, n_modes });
        }
    }
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("must be in [0, 1], got {eta}"),
        });
    }
    let t = Complex64::new(eta.sqrt(), 0.0);
    let r = Complex64::new(0.0, -(1.0 - eta).sqrt());
    let (a, b) = (i - 1, j - 1);
    let mut m = ComplexMatrix::identity(n_modes);
    m.set(a, a, t);
    m.set(b, b, t);
    m.set(a, b, r);
    m.set(b, a, r);
    TransferMatrix::new(m)
}

/// Diagonal phase factor `e^{i phi}` on port `j` (1-based).
fn phase_matrix(j: usize, phi: f64, n_modes: usize) -> Result<ComplexMatrix> {
    if j == 0 || j > n_modes {
        return Err(Error::PortOutOfRange { port: j, n_modes });
    }
    let mut m = ComplexMatrix::identity(n_modes);
    m.set(j - 1, j - 1, Complex64::from_polar(1.0, phi));
    Ok(m)
}

/// 4-port transfer matrix as the product of its six elements.
///
/// Light meets couplers (1,2) and (3,4) first, then the inner arms 2 and 3
/// pick up the crossing phase, then couplers (1,3) and (2,4). In the
/// row-equals-input orientation the chronological product reads left to
/// right, and the inner-arm phase must enter as `e^{+i phi}` for the
/// product to reproduce [`fourport_closed_form`]; the two agree to machine
/// precision for all parameters.
pub fn fourport_composed(p: &FourPortParams) -> Result<TransferMatrix> {
    let p = FourPortParams::new(p.eta, p.phi)?;
    let b12 = beamsplitter_matrix(1, 2, p.eta, 4)?;
    let b34 = beamsplitter_matrix(3, 4, p.eta, 4)?;
    let b13 = beamsplitter_matrix(1, 3, p.eta, 4)?;
    let b24 = beamsplitter_matrix(2, 4, p.eta, 4)?;
    let p2 = phase_matrix(2, p.phi, 4)?;
    let p3 = phase_matrix(3, p.phi, 4)?;

    let mut m = matmul(b12.matrix(), b34.matrix())?;
    m = matmul(&m, &p2)?;
    m = matmul(&m, &p3)?;
    m = matmul(&m, b13.matrix())?;
    m = matmul(&m, b24.matrix())?;
    TransferMatrix::new(m)
}

/// 4-port transfer matrix written out in closed form.
pub fn fourport_closed_form(p: &FourPortParams) -> Result<TransferMatrix> {
    let p = FourPortParams::new(p.eta, p.phi)?;
    let eta = Complex64::new(p.eta, 0.0);
    let etam1 = Complex64::new(p.eta - 1.0, 0.0);
    let s = Complex64::new(0.0, -((1.0 - p.eta) * p.eta).sqrt()); // -i sqrt((1-eta) eta)
    let e = Complex64::from_polar(1.0, p.phi);

    let entries = vec![
        eta,
        e * s,
        s,
        e * etam1,
        s,
        e * eta,
        etam1,
        e * s,
        e * s,
        etam1,
        e * eta,
        s,
        e * etam1,
        s,
        e * s,
        eta,
    ];
    TransferMatrix::new(ComplexMatrix::new(4, 4, entries)?)
}

/// The ideal symmetric tritter: the 3x3 Fourier unitary
/// `U_jk = w^{jk} / sqrt(3)` with `w = e^{2 pi i / 3}` and 1-based j, k.
/// Every splitting ratio is exactly 1/3; used as an independent oracle for
/// symmetric-tritter visibilities.
pub fn symmetric_tritter_reference() -> TransferMatrix {
    let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    let norm = 3.0_f64.sqrt();
    let mut m = ComplexMatrix::zeros(3, 3);
    for j in 1..=3_u32 {
        for k in 1..=3_u32 {
            m.set((j - 1) as usize, (k - 1) as usize, w.powu(j * k) / norm);
        }
    }
    TransferMatrix::new(m).expect("Fourier matrix is unitary")
}
