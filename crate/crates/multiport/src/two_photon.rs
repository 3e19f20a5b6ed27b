//! Two-photon coincidence probabilities and Hong-Ou-Mandel visibilities for
//! an arbitrary transfer matrix.
//!
//! For photons injected into ports i and j and detected at ports k and l,
//! with `U` in the row-equals-input orientation:
//!
//! ```text
//! Q = |U_ik U_jl + U_il U_jk|^2 / (1 + delta_ij)      (quantum)
//! C = |U_ik U_jl|^2 + |U_il U_jk|^2                   (classical)
//! V = (C - Q) / C                                     (visibility)
//! ```
//!
//! Positive visibility is a coincidence dip, negative a peak. A classically
//! forbidden combination (C = 0) has no defined visibility and is reported
//! as an explicit error, never a silent zero.

use serde::{Deserialize, Serialize};

use crate::devices::TritterCoupling;
use crate::error::{Error, Result};
use crate::linop::TransferMatrix;

/// An unordered pair of 1-based port labels, stored with `a <= b`.
/// Equal labels are allowed (two photons in one input port).
/// Serializes as the two-element array `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "(usize, usize)", try_from = "(usize, usize)")]
pub struct PortPair {
    a: usize,
    b: usize,
}

impl From<PortPair> for (usize, usize) {
    fn from(p: PortPair) -> Self {
        (p.a, p.b)
    }
}

impl TryFrom<(usize, usize)> for PortPair {
    type Error = Error;

    fn try_from((a, b): (usize, usize)) -> Result<Self> {
        PortPair::new(a, b)
    }
}

impl PortPair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::PortOutOfRange {
                port: 0,
                n_modes: 0,
            });
        }
        Ok(Self {
            a: a.min(b),
            b: a.max(b),
        })
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn is_bunched(&self) -> bool {
        self.a == self.b
    }

    fn check_range(&self, n_modes: usize) -> Result<()> {
        for port in [self.a, self.b] {
            if port > n_modes {
                return Err(Error::PortOutOfRange { port, n_modes });
            }
        }
        Ok(())
    }

    /// All distinct pairs (a < b) over `n_modes` ports, lexicographic.
    pub fn distinct_pairs(n_modes: usize) -> Vec<PortPair> {
        let mut out = Vec::new();
        for a in 1..=n_modes {
            for b in (a + 1)..=n_modes {
                out.push(PortPair { a, b });
            }
        }
        out
    }
}

impl std::fmt::Display for PortPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// Quantum two-photon coincidence probability for detection at distinct
/// ports. For a bunched output pair (k = l) this returns the raw
/// interference term of the formula above, which overcounts the physical
/// bunched probability by 2; use [`two_photon_distribution`] for properly
/// normalized output probabilities.
pub fn quantum_coincidence(u: &TransferMatrix, input: PortPair, output: PortPair) -> Result<f64> {
    input.check_range(u.n_modes())?;
    output.check_range(u.n_modes())?;
    let (i, j) = (input.a, input.b);
    let (k, l) = (output.a, output.b);
    let amp = u.amplitude(i, k)? * u.amplitude(j, l)? + u.amplitude(i, l)? * u.amplitude(j, k)?;
    let delta = if input.is_bunched() { 1.0 } else { 0.0 };
    Ok(amp.norm_sqr() / (1.0 + delta))
}

/// Classical (distinguishable-photon) coincidence probability.
pub fn classical_coincidence(u: &TransferMatrix, input: PortPair, output: PortPair) -> Result<f64> {
    input.check_range(u.n_modes())?;
    output.check_range(u.n_modes())?;
    let (i, j) = (input.a, input.b);
    let (k, l) = (output.a, output.b);
    let first = (u.amplitude(i, k)? * u.amplitude(j, l)?).norm_sqr();
    let second = (u.amplitude(i, l)? * u.amplitude(j, k)?).norm_sqr();
    Ok(first + second)
}

/// HOM visibility `V = (C - Q) / C` for distinct detectors.
pub fn visibility(u: &TransferMatrix, input: PortPair, output: PortPair) -> Result<f64> {
    if output.is_bunched() {
        return Err(Error::PortsNotDistinct {
            a: output.a,
            b: output.b,
        });
    }
    let c = classical_coincidence(u, input, output)?;
    if c == 0.0 {
        return Err(Error::UndefinedVisibility {
            in_a: input.a,
            in_b: input.b,
            out_a: output.a,
            out_b: output.b,
        });
    }
    let q = quantum_coincidence(u, input, output)?;
    // (C - Q) / C lies in [-1, 1] exactly (Q <= 2C by the triangle
    // inequality); clamp away the last-ULP excursions of the division.
    Ok(((c - q) / c).clamp(-1.0, 1.0))
}

/// Full two-photon output distribution for a given input pair, including
/// bunched outputs, normalized so the probabilities sum to 1 for a unitary
/// transfer matrix.
pub fn two_photon_distribution(
    u: &TransferMatrix,
    input: PortPair,
) -> Result<Vec<(PortPair, f64)>> {
    input.check_range(u.n_modes())?;
    let n = u.n_modes();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for k in 1..=n {
        for l in k..=n {
            let pair = PortPair::new(k, l)?;
            let q = quantum_coincidence(u, input, pair)?;
            let norm = if pair.is_bunched() { 2.0 } else { 1.0 };
            out.push((pair, q / norm));
        }
    }
    Ok(out)
}

/// One entry of a visibility matrix. `value` is absent where the
/// combination is classically forbidden or (for measured data) where a dip
/// fit failed; `note` carries the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEntry {
    pub input: PortPair,
    pub output: PortPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Visibilities over all distinct input pairs x distinct output pairs,
/// in lexicographic pair order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMatrix {
    pub n_modes: usize,
    pub entries: Vec<VisibilityEntry>,
}

impl VisibilityMatrix {
    pub fn input_pairs(&self) -> Vec<PortPair> {
        PortPair::distinct_pairs(self.n_modes)
    }

    pub fn output_pairs(&self) -> Vec<PortPair> {
        PortPair::distinct_pairs(self.n_modes)
    }

    pub fn get(&self, input: PortPair, output: PortPair) -> Option<&VisibilityEntry> {
        self.entries
            .iter()
            .find(|e| e.input == input && e.output == output)
    }

    /// Entries that hold a defined value.
    pub fn defined(&self) -> impl Iterator<Item = (&VisibilityEntry, f64)> {
        self.entries.iter().filter_map(|e| e.value.map(|v| (e, v)))
    }
}

/// Model visibilities for every distinct input pair and distinct output
/// pair of `u`. Classically forbidden combinations are recorded as absent
/// entries rather than errors.
pub fn visibility_matrix(u: &TransferMatrix) -> Result<VisibilityMatrix> {
    let n = u.n_modes();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n_modes",
            reason: format!("need at least 2 modes, got {n}"),
        });
    }
    let pairs = PortPair::distinct_pairs(n);
    let mut entries = Vec::with_capacity(pairs.len() * pairs.len());
    for &input in &pairs {
        for &output in &pairs {
            let entry = match visibility(u, input, output) {
                Ok(v) => {
                    debug_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
                    VisibilityEntry {
                        input,
                        output,
                        value: Some(v),
                        sigma: None,
                        note: None,
                    }
                }
                Err(Error::UndefinedVisibility { .. }) => VisibilityEntry {
                    input,
                    output,
                    value: None,
                    sigma: None,
                    note: Some("classically forbidden (C = 0)".to_string()),
                },
                Err(e) => return Err(e),
            };
            entries.push(entry);
        }
    }
    Ok(VisibilityMatrix {
        n_modes: n,
        entries,
    })
}

/// One point of a coupling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub g_bar: f64,
    pub matrix: VisibilityMatrix,
}

/// Tritter visibilities on a uniform grid of effective couplings
/// `g_bar in [0, g_max]` (endpoints included), holding the outer coupling
/// at `ratio * g_bar`.
pub fn visibility_sweep(ratio: f64, g_max: f64, points: usize) -> Result<Vec<SweepPoint>> {
    if !ratio.is_finite() || ratio < 0.0 {
        return Err(Error::InvalidParameter {
            name: "ratio",
            reason: format!("must be a nonnegative finite number, got {ratio}"),
        });
    }
    if !g_max.is_finite() || g_max <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "g_max",
            reason: format!("must be positive and finite, got {g_max}"),
        });
    }
    if points < 2 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: format!("need at least 2 grid points, got {points}"),
        });
    }
    let mut out = Vec::with_capacity(points);
    for idx in 0..points {
        let g_bar = g_max * idx as f64 / (points - 1) as f64;
        let coupling = TritterCoupling::new(g_bar, ratio * g_bar)?;
        let u = crate::devices::tritter_unitary(&coupling)?;
        out.push(SweepPoint {
            g_bar,
            matrix: visibility_matrix(&u)?,
        });
    }
    Ok(out)
}
