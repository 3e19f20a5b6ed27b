//! File formats and the pipeline stages behind the command-line surface:
//! JSON measurement and report files, plot-ready CSV tables, and the
//! fit stages that turn measurement files into report bundles.
//!
//! All port labels in files are 1-based. JSON carries full-precision
//! numbers (exact round-trip); CSV is formatted to 9 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::characterize::{
    compute_fractions, fit_fourport_eta, fit_fourport_phi, fit_tritter, FitResult,
    IntensityDataset, FOURPORT_FIT_FRACTIONS, TRITTER_FIT_FRACTIONS,
};
use crate::devices::{fourport_closed_form, tritter_unitary, FourPortParams, TritterCoupling};
use crate::error::{Error, Result};
use crate::hom::{scans_to_visibility_matrix, DipScan};
use crate::linop::TransferMatrix;
use crate::two_photon::{visibility_matrix, PortPair, SweepPoint, VisibilityMatrix};

/// Accepted measurement/report schema version.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Tritter,
    Fourport,
}

impl DeviceKind {
    pub fn n_modes(self) -> usize {
        match self {
            DeviceKind::Tritter => 3,
            DeviceKind::Fourport => 4,
        }
    }
}

impl std::fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeviceKind::Tritter => write!(f, "tritter"),
            DeviceKind::Fourport => write!(f, "fourport"),
        }
    }
}

/// On-disk container for measured (or synthesized) device data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub schema_version: String,
    pub device: DeviceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensities: Option<IntensityDataset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scans: Option<Vec<DipScan>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl MeasurementFile {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {:?}, expected {:?}",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        let n = self.device.n_modes();
        if let Some(data) = &self.intensities {
            if data.n_modes != n {
                return Err(Error::Schema(format!(
                    "intensities declare {} modes but the device has {n}",
                    data.n_modes
                )));
            }
            data.validate().map_err(|e| Error::Schema(e.to_string()))?;
        }
        if let Some(scans) = &self.scans {
            for scan in scans {
                scan.validate().map_err(|e| Error::Schema(e.to_string()))?;
                let max_port = scan.input_pair.b().max(scan.output_pair.b());
                if max_port > n {
                    return Err(Error::Schema(format!(
                        "scan references port {max_port} on a {n}-mode device"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: MeasurementFile =
            serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// One row of a measured-versus-predicted visibility comparison. `delta`
/// and `pull` are present only where both sides exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub input: PortPair,
    pub output: PortPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pull: Option<f64>,
}

/// Output of a fit stage: fitted parameters, model-predicted visibilities,
/// measured visibilities where scans were available, and their comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: String,
    pub device: DeviceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_visibilities: Option<VisibilityMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_visibilities: Option<VisibilityMatrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<ComparisonRow>,
}

impl ReportBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Fit stages exposed by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStage {
    Tritter,
    FourportEta,
    FourportPhi,
    Dips,
}

fn require_intensities(file: &MeasurementFile) -> Result<&IntensityDataset> {
    file.intensities.as_ref().ok_or_else(|| {
        Error::Schema("this stage needs an \"intensities\" section in the measurement file".into())
    })
}

fn require_scans(file: &MeasurementFile) -> Result<&Vec<DipScan>> {
    file.scans.as_ref().ok_or_else(|| {
        Error::Schema("this stage needs a \"scans\" section in the measurement file".into())
    })
}

fn compare(
    predicted: Option<&VisibilityMatrix>,
    measured: Option<&VisibilityMatrix>,
) -> Vec<ComparisonRow> {
    let Some(measured) = measured else {
        return Vec::new();
    };
    measured
        .entries
        .iter()
        .map(|m| {
            let p = predicted
                .and_then(|pm| pm.get(m.input, m.output))
                .and_then(|e| e.value);
            let delta = match (p, m.value) {
                (Some(p), Some(v)) => Some(v - p),
                _ => None,
            };
            let pull = match (delta, m.sigma) {
                (Some(d), Some(s)) if s > 0.0 => Some(d / s),
                _ => None,
            };
            ComparisonRow {
                input: m.input,
                output: m.output,
                predicted: p,
                measured: m.value,
                sigma: m.sigma,
                delta,
                pull,
            }
        })
        .collect()
}

/// Run one fit stage over a measurement file. `phi_input_pair` selects the
/// input pair whose measured visibilities constrain the inner-arm phase
/// (only used by the `FourportPhi` stage).
pub fn run_fit_stage(
    file: &MeasurementFile,
    stage: FitStage,
    phi_input_pair: PortPair,
) -> Result<ReportBundle> {
    file.validate()?;
    let mut bundle = ReportBundle {
        schema_version: SCHEMA_VERSION.to_string(),
        device: file.device,
        fitted: None,
        predicted_visibilities: None,
        measured_visibilities: None,
        comparison: Vec::new(),
    };

    match (stage, file.device) {
        (FitStage::Tritter, DeviceKind::Tritter) => {
            let data = require_intensities(file)?;
            let fractions = compute_fractions(data, &TRITTER_FIT_FRACTIONS)?;
            let fit = fit_tritter(&fractions)?;
            let coupling = TritterCoupling::new(
                fit.parameter("g_bar").expect("fit parameter"),
                fit.parameter("g_bar_outer").expect("fit parameter"),
            )?;
            let predicted = visibility_matrix(&tritter_unitary(&coupling)?)?;
            if let Some(scans) = &file.scans {
                bundle.measured_visibilities = Some(scans_to_visibility_matrix(scans)?);
            }
            bundle.comparison = compare(Some(&predicted), bundle.measured_visibilities.as_ref());
            bundle.fitted = Some(fit);
            bundle.predicted_visibilities = Some(predicted);
        }
        (FitStage::FourportEta, DeviceKind::Fourport) => {
            let data = require_intensities(file)?;
            let fractions = compute_fractions(data, &FOURPORT_FIT_FRACTIONS)?;
            bundle.fitted = Some(fit_fourport_eta(&fractions)?);
        }
        (FitStage::FourportPhi, DeviceKind::Fourport) => {
            let data = require_intensities(file)?;
            let scans = require_scans(file)?;
            let fractions = compute_fractions(data, &FOURPORT_FIT_FRACTIONS)?;
            let eta_fit = fit_fourport_eta(&fractions)?;
            let eta = eta_fit.parameter("eta").expect("fit parameter");

            let measured = scans_to_visibility_matrix(scans)?;
            let mut fit = fit_fourport_phi(eta, phi_input_pair, &measured)?;
            fit.parameters.insert("eta".to_string(), eta);
            fit.warnings.extend(eta_fit.warnings);

            let params = FourPortParams::new(eta, fit.parameter("phi").expect("fit parameter"))?;
            let predicted = visibility_matrix(&fourport_closed_form(&params)?)?;
            bundle.comparison = compare(Some(&predicted), Some(&measured));
            bundle.fitted = Some(fit);
            bundle.predicted_visibilities = Some(predicted);
            bundle.measured_visibilities = Some(measured);
        }
        (FitStage::Dips, _) => {
            let scans = require_scans(file)?;
            let measured = scans_to_visibility_matrix(scans)?;
            bundle.comparison = compare(None, Some(&measured));
            bundle.measured_visibilities = Some(measured);
        }
        (stage, device) => {
            return Err(Error::Schema(format!(
                "stage {stage:?} does not apply to a {device} measurement file"
            )));
        }
    }
    Ok(bundle)
}

/// The full chain for a measurement file: fit the device parameters from
/// classical intensities, predict all visibilities, extract measured
/// visibilities from the dip scans, and compare.
pub fn run_report(file: &MeasurementFile, phi_input_pair: PortPair) -> Result<ReportBundle> {
    match file.device {
        DeviceKind::Tritter => run_fit_stage(file, FitStage::Tritter, phi_input_pair),
        DeviceKind::Fourport => run_fit_stage(file, FitStage::FourportPhi, phi_input_pair),
    }
}

/// 9-significant-digit scientific formatting used in every CSV cell.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// `|U_jk|^2` as CSV: one row per input port, columns per output port.
pub fn magnitudes_csv(u: &TransferMatrix) -> String {
    let n = u.n_modes();
    let mut out = String::from("input");
    for k in 1..=n {
        let _ = write!(out, ",out{k}");
    }
    out.push('\n');
    for j in 1..=n {
        let _ = write!(out, "{j}");
        for k in 1..=n {
            let p = u.amplitude(j, k).expect("in range").norm_sqr();
            let _ = write!(out, ",{}", format_sig9(p));
        }
        out.push('\n');
    }
    out
}

/// Visibility matrix as long-format CSV; undefined entries leave the value
/// cell empty.
pub fn visibility_csv(vm: &VisibilityMatrix) -> String {
    let mut out = String::from("in_i,in_j,out_k,out_l,visibility,sigma\n");
    for e in &vm.entries {
        let value = e.value.map(format_sig9).unwrap_or_default();
        let sigma = e.sigma.map(format_sig9).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.input.a(),
            e.input.b(),
            e.output.a(),
            e.output.b(),
            value,
            sigma
        );
    }
    out
}

/// Sweep as wide-format CSV: one row per coupling, one column per
/// input/output pair combination, empty cells where the visibility is
/// undefined.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let Some(first) = points.first() else {
        return String::from("g_bar\n");
    };
    let inputs = first.matrix.input_pairs();
    let outputs = first.matrix.output_pairs();
    let mut out = String::from("g_bar");
    for i in &inputs {
        for o in &outputs {
            let _ = write!(out, ",V_in{}{}_out{}{}", i.a(), i.b(), o.a(), o.b());
        }
    }
    out.push('\n');
    for p in points {
        let _ = write!(out, "{}", format_sig9(p.g_bar));
        for i in &inputs {
            for o in &outputs {
                let cell = p
                    .matrix
                    .get(*i, *o)
                    .and_then(|e| e.value)
                    .map(format_sig9)
                    .unwrap_or_default();
                let _ = write!(out, ",{cell}");
            }
        }
        out.push('\n');
    }
    out
}
