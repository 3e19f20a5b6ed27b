//! Classical characterization: the lossy intensity model, loss-cancelling
//! intensity fractions with first-order uncertainty propagation, and
//! weighted least-squares fits of the device parameters.
//!
//! Injecting classical power M into port j and reading power at port k
//! gives `N^k_j = eps_in_j * eps_out_k * M * |U_jk|^2` with unknown per-port
//! loss factors. The four-intensity ratios
//!
//! ```text
//! F^{k,s}_{j,r} = (N^k_j N^s_r) / (N^k_r N^s_j)
//! ```
//!
//! cancel every loss factor exactly and depend only on `|U|^2`, so device
//! parameters can be fitted from classical measurements alone. The fits
//! minimize the uncertainty-weighted squared residuals of these fractions
//! over a deterministic grid followed by simplex refinement.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::devices::{fourport_closed_form, tritter_unitary, FourPortParams, TritterCoupling};
use crate::error::{Error, Result};
use crate::linop::TransferMatrix;
use crate::optim;
use crate::two_photon::{visibility, PortPair, VisibilityMatrix};

/// Records with mean below this times the dataset maximum are rejected
/// from fraction denominators.
pub const DEGENERATE_MEAN_RATIO: f64 = 1e-12;

/// One classical power measurement: light in at `input`, read at `output`
/// (1-based ports), in arbitrary but consistent detector units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityRecord {
    pub input: usize,
    pub output: usize,
    pub mean: f64,
    pub std: f64,
}

/// A set of classical intensity measurements over an `n_modes`-port device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityDataset {
    pub n_modes: usize,
    pub records: Vec<IntensityRecord>,
}

impl IntensityDataset {
    pub fn get(&self, input: usize, output: usize) -> Option<&IntensityRecord> {
        self.records
            .iter()
            .find(|r| r.input == input && r.output == output)
    }

    pub fn max_mean(&self) -> f64 {
        self.records.iter().map(|r| r.mean).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            for port in [r.input, r.output] {
                if port == 0 || port > self.n_modes {
                    return Err(Error::PortOutOfRange {
                        port,
                        n_modes: self.n_modes,
                    });
                }
            }
            if !r.mean.is_finite() || !r.std.is_finite() || r.mean < 0.0 || r.std < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "intensity record",
                    reason: format!(
                        "mean and std must be finite and nonnegative, got ({}, {}) at ({}, {})",
                        r.mean, r.std, r.input, r.output
                    ),
                });
            }
        }
        Ok(())
    }
}

/// A loss-cancelling fraction `F^{k,s}_{j,r}` with its propagated
/// uncertainty. Indices are 1-based ports: j, r inputs; k, s outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fraction {
    pub j: usize,
    pub r: usize,
    pub k: usize,
    pub s: usize,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FractionSet {
    pub entries: Vec<Fraction>,
}

impl FractionSet {
    pub fn get(&self, j: usize, r: usize, k: usize, s: usize) -> Option<&Fraction> {
        self.entries
            .iter()
            .find(|f| f.j == j && f.r == r && f.k == k && f.s == s)
    }
}

/// The three fractions used to fit the tritter couplings, as
/// (j, r, k, s) index tuples.
pub const TRITTER_FIT_FRACTIONS: [(usize, usize, usize, usize); 3] =
    [(1, 2, 1, 2), (1, 3, 1, 3), (2, 3, 2, 3)];

/// The six fractions used to fit the 4-port reflectivity.
pub const FOURPORT_FIT_FRACTIONS: [(usize, usize, usize, usize); 6] = [
    (1, 2, 1, 2),
    (1, 3, 1, 3),
    (1, 4, 1, 4),
    (2, 3, 2, 3),
    (2, 4, 2, 4),
    (3, 4, 3, 4),
];

/// Result of a parameter fit. `parameters` is keyed by parameter name;
/// `covariance` rows/columns follow the map's (alphabetical) key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: BTreeMap<String, f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }
}

/// Forward model of the classical measurement: per-port input and output
/// loss factors in (0, 1] applied to `source_power * |U_jk|^2`. The
/// returned records carry zero uncertainty.
pub fn predict_intensities(
    u: &TransferMatrix,
    losses_in: &[f64],
    losses_out: &[f64],
    source_power: f64,
) -> Result<IntensityDataset> {
    let n = u.n_modes();
    if losses_in.len() != n || losses_out.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "need {n} loss factors per side, got {} in / {} out",
            losses_in.len(),
            losses_out.len()
        )));
    }
    for (side, losses) in [("losses_in", losses_in), ("losses_out", losses_out)] {
        if let Some(&bad) = losses
            .iter()
            .find(|&&e| !e.is_finite() || e <= 0.0 || e > 1.0)
        {
            return Err(Error::InvalidParameter {
                name: "loss factor",
                reason: format!("{side} must lie in (0, 1], got {bad}"),
            });
        }
    }
    if !source_power.is_finite() || source_power <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "source_power",
            reason: format!("must be positive, got {source_power}"),
        });
    }
    let mut records = Vec::with_capacity(n * n);
    for j in 1..=n {
        for k in 1..=n {
            let p = u.amplitude(j, k)?.norm_sqr();
            records.push(IntensityRecord {
                input: j,
                output: k,
                mean: losses_in[j - 1] * losses_out[k - 1] * source_power * p,
                std: 0.0,
            });
        }
    }
    Ok(IntensityDataset {
        n_modes: n,
        records,
    })
}

/// Apply seeded Gaussian relative noise to every record and stamp the
/// matching uncertainty, for synthetic-data studies.
pub fn add_intensity_noise(data: &IntensityDataset, rel_sigma: f64, seed: u64) -> IntensityDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = data
        .records
        .iter()
        .map(|r| {
            let draw: f64 = rng.sample(StandardNormal);
            IntensityRecord {
                input: r.input,
                output: r.output,
                mean: r.mean * (1.0 + rel_sigma * draw),
                std: r.mean * rel_sigma,
            }
        })
        .collect();
    IntensityDataset {
        n_modes: data.n_modes,
        records,
    }
}

fn lookup_positive(
    data: &IntensityDataset,
    input: usize,
    output: usize,
    floor: f64,
) -> Result<&IntensityRecord> {
    let rec = data
        .get(input, output)
        .ok_or(Error::MissingRecord { input, output })?;
    if rec.mean <= floor {
        return Err(Error::DegenerateDenominator {
            input,
            output,
            mean: rec.mean,
        });
    }
    Ok(rec)
}

/// Compute the requested loss-cancelling fractions from measured
/// intensities. Uncertainties propagate to first order: relative variances
/// of the four constituent intensities add.
pub fn compute_fractions(
    data: &IntensityDataset,
    requested: &[(usize, usize, usize, usize)],
) -> Result<FractionSet> {
    data.validate()?;
    let floor = DEGENERATE_MEAN_RATIO * data.max_mean();
    let mut entries = Vec::with_capacity(requested.len());
    for &(j, r, k, s) in requested {
        if j == r || k == s {
            return Err(Error::InvalidParameter {
                name: "fraction indices",
                reason: format!("need j != r and k != s, got F^{{{k},{s}}}_{{{j},{r}}}"),
            });
        }
        let n_jk = lookup_positive(data, j, k, floor)?;
        let n_rs = lookup_positive(data, r, s, floor)?;
        let n_rk = lookup_positive(data, r, k, floor)?;
        let n_js = lookup_positive(data, j, s, floor)?;
        let value = (n_jk.mean * n_rs.mean) / (n_rk.mean * n_js.mean);
        let rel_var: f64 = [n_jk, n_rs, n_rk, n_js]
            .iter()
            .map(|n| (n.std / n.mean).powi(2))
            .sum();
        entries.push(Fraction {
            j,
            r,
            k,
            s,
            value,
            sigma: value * rel_var.sqrt(),
        });
    }
    Ok(FractionSet { entries })
}

/// Model-side fraction from a transfer matrix; `None` where a denominator
/// splitting ratio vanishes.
fn model_fraction(u: &TransferMatrix, j: usize, r: usize, k: usize, s: usize) -> Option<f64> {
    let p = |a: usize, b: usize| u.amplitude(a, b).ok().map(|z| z.norm_sqr());
    let denom = p(r, k)? * p(j, s)?;
    if denom <= 0.0 {
        return None;
    }
    Some(p(j, k)? * p(r, s)? / denom)
}

/// (j, r, k, s, value, sigma) of one fraction entering a fit.
type FractionRow = (usize, usize, usize, usize, f64, f64);

/// Extract the named fractions and the least-squares weights. Weights are
/// 1/sigma^2 when every sigma is positive, 1 when every sigma is zero.
fn gather(
    fractions: &FractionSet,
    wanted: &[(usize, usize, usize, usize)],
) -> Result<Vec<FractionRow>> {
    let mut rows = Vec::with_capacity(wanted.len());
    for &(j, r, k, s) in wanted {
        let f = fractions.get(j, r, k, s).ok_or(Error::InvalidParameter {
            name: "fractions",
            reason: format!("missing fraction F^{{{k},{s}}}_{{{j},{r}}}"),
        })?;
        rows.push((j, r, k, s, f.value, f.sigma));
    }
    let positive = rows.iter().filter(|row| row.5 > 0.0).count();
    if positive != 0 && positive != rows.len() {
        return Err(Error::MixedWeights);
    }
    Ok(rows)
}

fn weight(sigma: f64) -> f64 {
    if sigma > 0.0 {
        1.0 / (sigma * sigma)
    } else {
        1.0
    }
}

fn build_result(
    names: &[&str],
    outcome: &optim::MultiStartOutcome,
    covariance: Option<Vec<Vec<f64>>>,
    mut warnings: Vec<String>,
) -> FitResult {
    let mut parameters = BTreeMap::new();
    for (name, value) in names.iter().zip(&outcome.best.x) {
        parameters.insert((*name).to_string(), *value);
    }
    for other in &outcome.others {
        if other.f <= 2.0 * outcome.best.f + 1e-12 {
            warnings.push(format!(
                "competing minimum at ({}) with objective {:.3e}",
                other
                    .x
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                other.f
            ));
        }
    }
    FitResult {
        parameters,
        objective_value: outcome.best.f,
        iterations: outcome.best.iterations,
        converged: outcome.best.converged,
        covariance,
        warnings,
    }
}

fn converged_or_err(result: FitResult) -> Result<FitResult> {
    if result.converged {
        Ok(result)
    } else {
        Err(Error::FitDidNotConverge {
            objective: result.objective_value,
            best: Box::new(result),
        })
    }
}

/// Fit the tritter effective couplings from the three fractions
/// `F^{1,2}_{1,2}`, `F^{1,3}_{1,3}`, `F^{2,3}_{2,3}`.
///
/// The couplings are searched over [0, pi]^2. The fraction map has a few
/// exact aliases at large couplings (the transfer matrix is periodic); the
/// deterministic tie-break reports the lexicographically smallest
/// minimizer, which is the physical small-coupling branch, and any
/// competing minimum is listed in the warnings.
pub fn fit_tritter(fractions: &FractionSet) -> Result<FitResult> {
    let rows = gather(fractions, &TRITTER_FIT_FRACTIONS)?;
    let mut objective = |x: &[f64]| -> f64 {
        let coupling = match TritterCoupling::new(x[0], x[1]) {
            Ok(c) => c,
            Err(_) => return f64::INFINITY,
        };
        let u = match tritter_unitary(&coupling) {
            Ok(u) => u,
            Err(_) => return f64::INFINITY,
        };
        rows.iter()
            .map(
                |&(j, r, k, s, value, sigma)| match model_fraction(&u, j, r, k, s) {
                    Some(model) => weight(sigma) * (value - model) * (value - model),
                    None => f64::INFINITY,
                },
            )
            .sum()
    };

    let lo = [0.0, 0.0];
    let hi = [PI, PI];
    let outcome = optim::grid_then_refine(&mut objective, &lo, &hi, 64, 5, 2000);
    let covariance = optim::covariance_at_minimum(&mut objective, &outcome.best.x, &lo, &hi);

    let mut warnings = Vec::new();
    if rows.iter().all(|row| (row.4 - 1.0).abs() < 1e-9) {
        warnings.push(
            "fractions are all 1: the device is consistent with a balanced splitter and \
             the couplings are only constrained to the symmetric locus"
                .to_string(),
        );
    }
    converged_or_err(build_result(
        &["g_bar", "g_bar_outer"],
        &outcome,
        covariance,
        warnings,
    ))
}

/// Fit the 4-port coupler reflectivity from the six pairwise fractions.
/// The fractions depend only on `|U|^2`, so the inner-arm phase does not
/// enter this fit.
pub fn fit_fourport_eta(fractions: &FractionSet) -> Result<FitResult> {
    let rows = gather(fractions, &FOURPORT_FIT_FRACTIONS)?;
    let mut objective = |x: &[f64]| -> f64 {
        let params = match FourPortParams::new(x[0], 0.0) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let u = match fourport_closed_form(&params) {
            Ok(u) => u,
            Err(_) => return f64::INFINITY,
        };
        rows.iter()
            .map(
                |&(j, r, k, s, value, sigma)| match model_fraction(&u, j, r, k, s) {
                    Some(model) => weight(sigma) * (value - model) * (value - model),
                    None => f64::INFINITY,
                },
            )
            .sum()
    };

    let lo = [0.0];
    let hi = [1.0];
    let outcome = optim::grid_then_refine(&mut objective, &lo, &hi, 257, 4, 1500);
    let covariance = optim::covariance_at_minimum(&mut objective, &outcome.best.x, &lo, &hi);

    let mut warnings = Vec::new();
    if rows.iter().all(|row| (row.4 - 1.0).abs() < 1e-9) {
        warnings.push(
            "fractions are all 1: eta is near 0.5 where eta and 1 - eta are degenerate".to_string(),
        );
    }
    converged_or_err(build_result(&["eta"], &outcome, covariance, warnings))
}

/// Reduce a phase to the canonical representative in [0, pi/2].
///
/// Every model visibility depends on the inner-arm phase only through
/// cos(2 phi), so {phi, -phi, pi - phi, phi - pi} produce identical
/// visibility matrices and only the class representative is identifiable.
pub fn canonical_phi(phi: f64) -> f64 {
    let m = crate::devices::wrap_phase(phi).abs();
    if m > PI / 2.0 {
        PI - m
    } else {
        m
    }
}

/// Fit the inner-arm phase from measured visibilities of a single input
/// pair, with the reflectivity already fitted from intensities.
///
/// Needs at least 3 usable visibilities. The reported phase is the
/// canonical representative in [0, pi/2]; see [`canonical_phi`].
pub fn fit_fourport_phi(
    eta: f64,
    input_pair: PortPair,
    measured: &VisibilityMatrix,
) -> Result<FitResult> {
    FourPortParams::new(eta, 0.0)?;
    let rows: Vec<(PortPair, f64, f64)> = measured
        .entries
        .iter()
        .filter(|e| e.input == input_pair)
        .filter_map(|e| e.value.map(|v| (e.output, v, e.sigma.unwrap_or(0.0))))
        .collect();
    if rows.len() < 3 {
        return Err(Error::Underdetermined {
            have: rows.len(),
            need: 3,
        });
    }
    let positive = rows.iter().filter(|row| row.2 > 0.0).count();
    if positive != 0 && positive != rows.len() {
        return Err(Error::MixedWeights);
    }

    let mut objective = |x: &[f64]| -> f64 {
        let params = match FourPortParams::new(eta, x[0]) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let u = match fourport_closed_form(&params) {
            Ok(u) => u,
            Err(_) => return f64::INFINITY,
        };
        rows.iter()
            .map(
                |&(output, value, sigma)| match visibility(&u, input_pair, output) {
                    Ok(model) => weight(sigma) * (value - model) * (value - model),
                    Err(_) => f64::INFINITY,
                },
            )
            .sum()
    };

    // For inputs (1,2) and (3,4) the phase factors out of every coincidence
    // amplitude, so their visibilities carry no phase information. Detect a
    // flat objective instead of returning an arbitrary point of it.
    let probes = [0.0, PI / 8.0, PI / 4.0, 3.0 * PI / 8.0, PI / 2.0];
    let probe_vals: Vec<f64> = probes.iter().map(|&p| objective(&[p])).collect();
    let pv_max = probe_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pv_min = probe_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if pv_max.is_finite() && pv_max - pv_min <= 1e-12 * (1.0 + pv_max.abs()) {
        return Err(Error::PhaseInsensitiveInput {
            a: input_pair.a(),
            b: input_pair.b(),
        });
    }

    // The canonical domain [0, pi/2] already reaches every achievable
    // visibility pattern.
    let lo = [0.0];
    let hi = [PI / 2.0];
    let outcome = optim::grid_then_refine(&mut objective, &lo, &hi, 181, 4, 1500);
    let covariance = optim::covariance_at_minimum(&mut objective, &outcome.best.x, &lo, &hi);

    let phi = canonical_phi(outcome.best.x[0]);
    let mut result = build_result(
        &["phi"],
        &outcome,
        covariance,
        vec![format!(
            "phi is identified only up to the class {{phi, -phi, pi-phi, phi-pi}}; \
             reporting the representative in [0, pi/2] ({phi:.6} rad)"
        )],
    );
    result.parameters.insert("phi".to_string(), phi);
    converged_or_err(result)
}
