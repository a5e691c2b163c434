//! Profile and field files, CSV tables and content hashes.
//!
//! Binary files start with one line of JSON (the header) followed by a raw
//! little-endian `f64` payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::EvolutionTrace;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::groundstate::{ProfileEquation, RadialProfile};
use crate::params::ProblemParams;
use crate::spectral::SpectralReport;
use crate::variational::MassFrequencyMap;

pub const PROFILE_SCHEMA: &str = "profile-v1";
pub const FIELD_SCHEMA: &str = "field-v1";

/// Largest relative gap tolerated between the stored mass and the mass of
/// the stored samples.
const MASS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileHeader {
    schema: String,
    d: u32,
    /// `None` for the critical profile `q`.
    p: Option<f64>,
    omega: f64,
    r_max: f64,
    n_nodes: usize,
    center_value: f64,
    mass: f64,
}

/// Header of a field snapshot. The box is `[−L, L)²` sampled by `N × N`
/// points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub schema: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub half_length: f64,
    pub t: f64,
    pub d: u32,
    pub p: f64,
}

#[derive(Deserialize)]
struct FieldHeaderIn {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    half_length: f64,
    t: f64,
    d: u32,
    p: f64,
}

/// A field read back from disk with its time stamp and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub field: ScalarField,
    pub t: f64,
    pub params: ProblemParams,
}

fn write_with_header<H: Serialize>(
    path: &Path,
    header: &H,
    payload: impl Iterator<Item = f64>,
) -> Result<()> {
    let mut bytes = serde_json::to_vec(header).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    for x in payload {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Splits a file into its schema-checked header value and payload.
fn read_with_header(path: &Path, schema: &str) -> Result<(serde_json::Value, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptFile("missing header line".into()))?;
    let header: serde_json::Value = serde_json::from_slice(&bytes[..split])
        .map_err(|e| Error::CorruptFile(format!("header: {e}")))?;
    match header.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == schema => {}
        other => {
            return Err(Error::SchemaError(format!(
                "expected {schema}, found {other:?}"
            )))
        }
    }
    let payload = &bytes[split + 1..];
    if payload.len() % 8 != 0 {
        return Err(Error::CorruptFile(format!(
            "payload of {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

fn parse_header<T: for<'de> Deserialize<'de>>(value: serde_json::Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::CorruptFile(format!("header: {e}")))
}

pub fn save_profile(profile: &RadialProfile, path: &Path) -> Result<()> {
    let header = ProfileHeader {
        schema: PROFILE_SCHEMA.into(),
        d: profile.d(),
        p: profile.equation.params().map(|p| p.p()),
        omega: profile.omega,
        r_max: profile.r_max,
        n_nodes: profile.n_nodes,
        center_value: profile.center_value,
        mass: profile.mass,
    };
    write_with_header(path, &header, profile.values.iter().copied())
}

pub fn load_profile(path: &Path) -> Result<RadialProfile> {
    let (header, values) = read_with_header(path, PROFILE_SCHEMA)?;
    let h: ProfileHeader = parse_header(header)?;
    if values.len() != h.n_nodes + 1 {
        return Err(Error::CorruptFile(format!(
            "expected {} samples, found {}",
            h.n_nodes + 1,
            values.len()
        )));
    }
    let equation = match h.p {
        Some(p) => ProfileEquation::DoublePower(ProblemParams::new(h.d, p)?),
        None => ProfileEquation::Critical { d: h.d },
    };
    let profile = RadialProfile {
        equation,
        omega: h.omega,
        r_max: h.r_max,
        n_nodes: h.n_nodes,
        values,
        center_value: h.center_value,
        mass: h.mass,
    };
    let recomputed = profile.compute_mass();
    if !((recomputed - h.mass).abs() <= MASS_TOLERANCE * h.mass.abs().max(1.0)) {
        return Err(Error::CorruptFile(format!(
            "header mass {} but samples give {recomputed}",
            h.mass
        )));
    }
    Ok(profile)
}

pub fn save_field(field: &ScalarField, t: f64, params: &ProblemParams, path: &Path) -> Result<()> {
    let grid = field.grid();
    let header = FieldHeader {
        schema: FIELD_SCHEMA,
        n: grid.n(),
        half_length: grid.half_length(),
        t,
        d: params.d(),
        p: params.p(),
    };
    write_with_header(
        path,
        &header,
        field.values().iter().flat_map(|z| [z.re, z.im]),
    )
}

pub fn load_field(path: &Path) -> Result<FieldFile> {
    let (header, values) = read_with_header(path, FIELD_SCHEMA)?;
    let h: FieldHeaderIn = parse_header(header)?;
    let grid = GridSpec::new(h.half_length, h.n).map_err(|e| Error::CorruptFile(e.to_string()))?;
    if values.len() != 2 * grid.len() {
        return Err(Error::CorruptFile(format!(
            "expected {} values, found {}",
            2 * grid.len(),
            values.len()
        )));
    }
    let data = values
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    let field = ScalarField::new(grid, data).map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok(FieldFile {
        field,
        t: h.t,
        params: ProblemParams::new(h.d, h.p)?,
    })
}

/// Lower-case hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// One row per frequency; failed frequencies carry `NaN` and
/// `converged = false`.
pub fn write_massmap_csv(map: &MassFrequencyMap, path: &Path) -> Result<()> {
    let mut rows: Vec<(f64, Vec<String>)> = map
        .samples
        .iter()
        .map(|s| {
            let row = [s.omega, s.mass, s.energy, s.d_value]
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>();
            (s.omega, [row, vec!["true".into()]].concat())
        })
        .collect();
    for (w, _) in &map.failures {
        rows.push((
            *w,
            vec![
                w.to_string(),
                "NaN".into(),
                "NaN".into(),
                "NaN".into(),
                "false".into(),
            ],
        ));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rows: Vec<_> = rows.into_iter().map(|(_, r)| r).collect();
    write_rows(
        path,
        &strings(&["omega", "mass", "energy", "d_value", "converged"]),
        &rows,
    )
}

pub fn write_spectrum_csv(reports: &[SpectralReport], path: &Path) -> Result<()> {
    let header = strings(&[
        "omega",
        "eig_plus_0",
        "eig_plus_1",
        "eig_minus_0",
        "n_negative_plus",
        "kernel_residual_minus",
        "vk_slope",
        "verdict",
    ]);
    let eig = |v: &[f64], i: usize| v.get(i).map_or("NaN".to_string(), f64::to_string);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.omega.to_string(),
                eig(&r.lowest_eigs_plus, 0),
                eig(&r.lowest_eigs_plus, 1),
                eig(&r.lowest_eigs_minus, 0),
                r.n_negative_plus.to_string(),
                r.kernel_residual_minus.to_string(),
                r.vk_slope.to_string(),
                r.verdict.as_str().to_string(),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// Conserved quantities and residual per probe time, followed by the
/// localized masses `I_k` and momenta `M_k` when the trace has them.
pub fn write_trace_csv(trace: &EvolutionTrace, path: &Path) -> Result<()> {
    let k = trace.localized_mass.first().map_or(0, Vec::len);
    let mut header = strings(&["t", "mass", "energy", "px", "py", "residual"]);
    header.extend((1..=k).map(|i| format!("I_{i}")));
    for i in 1..=k {
        header.push(format!("M_{i}x"));
        header.push(format!("M_{i}y"));
    }
    let rows: Vec<Vec<String>> = (0..trace.times.len())
        .map(|j| {
            let p = trace.momentum_series[j];
            let mut row: Vec<String> = [
                trace.times[j],
                trace.mass_series[j],
                trace.energy_series[j],
                p[0],
                p[1],
                trace.residual_series[j],
            ]
            .iter()
            .map(f64::to_string)
            .collect();
            if k > 0 {
                row.extend(trace.localized_mass[j].iter().map(f64::to_string));
                for m in &trace.localized_momentum[j] {
                    row.push(m[0].to_string());
                    row.push(m[1].to_string());
                }
            }
            row
        })
        .collect();
    write_rows(path, &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_profile() -> RadialProfile {
        let n_nodes = 400;
        let r_max = 20.0;
        let values: Vec<f64> = (0..=n_nodes)
            .map(|i| (-(i as f64 * r_max / n_nodes as f64).powi(2)).exp())
            .collect();
        let mut p = RadialProfile {
            equation: ProfileEquation::Critical { d: 2 },
            omega: 1.0,
            r_max,
            n_nodes,
            values,
            center_value: 1.0,
            mass: 0.0,
        };
        p.mass = p.compute_mass();
        p
    }

    #[test]
    fn header_is_one_json_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        let prof = tiny_profile();
        save_profile(&prof, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let split = bytes.iter().position(|&b| b == b'\n').unwrap();
        let h: serde_json::Value = serde_json::from_slice(&bytes[..split]).unwrap();
        assert_eq!(h["schema"], "profile-v1");
        assert!(h["p"].is_null());
        assert_eq!(bytes.len() - split - 1, 8 * 401);
        assert_eq!(load_profile(&path).unwrap(), prof);
    }

    #[test]
    fn trailing_byte_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        save_profile(&tiny_profile(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.push(0);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_profile(&path), Err(Error::CorruptFile(_))));
    }
}
