//! Model and Gram cache files: JSON-shaped UTF-8 documents.
//!
//! Floats are serialized as decimal with 17 significant digits, which makes
//! write -> read -> write byte-identical (17 digits round-trip any f64).
//! All output goes through [`write_atomic`]: a temp file in the target
//! directory, renamed on success, so failed commands never leave partial
//! files behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use prototypal::linalg::Mat;
use prototypal::KernelSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub rows: usize,
    pub hash: String,
}

/// Declaration of one feature block, stored so prediction can rebuild (and
/// validate) the training and incoming data layout.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct BlockSchema {
    pub name: String,
    /// "predictor" or "response".
    pub role: String,
    /// "vector", "onehot" or "distribution".
    pub kind: String,
    /// Source columns for vector blocks, the source column for one-hot.
    pub columns: Vec<String>,
    /// Category order for one-hot blocks (first appearance in training).
    pub categories: Vec<String>,
    pub dim: usize,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct KernelSpecEntry {
    pub block: String,
    pub family: String,
    pub sigma: Option<f64>,
    pub degree: Option<u32>,
}

impl KernelSpecEntry {
    pub fn from_spec(block: &str, spec: &KernelSpec) -> Self {
        let (family, sigma, degree) = match spec {
            KernelSpec::Linear => ("linear", None, None),
            KernelSpec::Gaussian { sigma } => ("gaussian", Some(*sigma), None),
            KernelSpec::Laplacian { sigma } => ("laplacian", Some(*sigma), None),
            KernelSpec::BSpline { degree } => ("bspline", None, Some(*degree)),
            KernelSpec::Energy => ("energy", None, None),
        };
        KernelSpecEntry {
            block: block.to_string(),
            family: family.to_string(),
            sigma,
            degree,
        }
    }

    pub fn to_spec(&self) -> Result<KernelSpec> {
        let spec = match self.family.as_str() {
            "linear" => KernelSpec::Linear,
            "energy" => KernelSpec::Energy,
            "gaussian" => KernelSpec::Gaussian {
                sigma: self
                    .sigma
                    .ok_or_else(|| CliError::data("gaussian kernel entry lacks sigma"))?,
            },
            "laplacian" => KernelSpec::Laplacian {
                sigma: self
                    .sigma
                    .ok_or_else(|| CliError::data("laplacian kernel entry lacks sigma"))?,
            },
            "bspline" => KernelSpec::BSpline {
                degree: self
                    .degree
                    .ok_or_else(|| CliError::data("bspline kernel entry lacks degree"))?,
            },
            other => return Err(CliError::data(format!("unknown kernel family '{other}'"))),
        };
        spec.validate().map_err(CliError::from)?;
        Ok(spec)
    }
}

/// On-disk model document.
///
/// Matrices follow the conventional orientation: `a` is `k x n` (row per
/// prototype, column per training point), `b` and `c` are `n x k` (row per
/// training point). One entry per predictor; single-predictor kinds store
/// one-element lists. `lambda`, `k`, `a`, `b`, `c` align by predictor index;
/// `tau` is empty unless the kind is `multiple_regression`, and `c` is empty
/// for the unsupervised kinds.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub schema_version: u32,
    /// "prototypal" | "archetypal" | "simple_regression" | "multiple_regression"
    pub kind: String,
    pub schema: Vec<BlockSchema>,
    pub kernel_specs: Vec<KernelSpecEntry>,
    pub lambda: Vec<f64>,
    pub k: Vec<usize>,
    pub a: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<Vec<f64>>>,
    pub c: Vec<Vec<Vec<f64>>>,
    pub tau: Vec<f64>,
    pub fingerprint: Fingerprint,
}

/// Gram cache document ("same envelope, gram payload").
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct GramFile {
    pub schema_version: u32,
    /// Always "gram".
    pub kind: String,
    pub provenance: String,
    pub fingerprint: Fingerprint,
    pub gram: Vec<Vec<f64>>,
}

/// JSON formatter writing every float with 17 significant digits.
struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::data(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to a sibling temp file and renames into place on success.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}tmp",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)
            .map_err(|e| CliError::data(format!("{}: {e}", tmp.display())))?;
        f.write_all(bytes)
            .map_err(|e| CliError::data(format!("{}: {e}", tmp.display())))?;
        f.sync_all().ok();
    }
    fs::rename(&tmp, path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn check_finite(m: &ModelFile) -> Result<()> {
    let all = m
        .lambda
        .iter()
        .chain(m.tau.iter())
        .chain(m.a.iter().flatten().flatten())
        .chain(m.b.iter().flatten().flatten())
        .chain(m.c.iter().flatten().flatten());
    for v in all {
        if !v.is_finite() {
            return Err(CliError::Numerical(
                "model contains non-finite values; refusing to save".into(),
            ));
        }
    }
    Ok(())
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    check_finite(model)?;
    write_atomic(path, &to_json_bytes(model)?)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let model: ModelFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::data(format!("{}: malformed model file: {e}", path.display())))?;
    if model.schema_version != SCHEMA_VERSION {
        return Err(CliError::data(format!(
            "{}: unsupported schema version {} (expected {SCHEMA_VERSION})",
            path.display(),
            model.schema_version
        )));
    }
    Ok(model)
}

pub fn save_gram(path: &Path, gram: &GramFile) -> Result<()> {
    write_atomic(path, &to_json_bytes(gram)?)
}

pub fn load_gram(path: &Path) -> Result<GramFile> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let gram: GramFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::data(format!("{}: malformed gram file: {e}", path.display())))?;
    if gram.schema_version != SCHEMA_VERSION {
        return Err(CliError::data(format!(
            "{}: unsupported schema version {}",
            path.display(),
            gram.schema_version
        )));
    }
    Ok(gram)
}

/// Serializes a model document to its byte representation (exposed so tests
/// can assert byte-identical round trips).
pub fn model_bytes(model: &ModelFile) -> Result<Vec<u8>> {
    check_finite(model)?;
    to_json_bytes(model)
}

/// In-memory matrix (documented row orientation) -> transposed nested rows.
pub fn mat_transposed_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|j| m.col(j)).collect()
}

/// Nested rows -> in-memory matrix, transposing back.
pub fn rows_to_mat_transposed(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    if r == 0 {
        return Err(CliError::data("empty matrix in model file"));
    }
    let c = rows[0].len();
    let mut m = Mat::zeros(c, r);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(CliError::data("ragged matrix in model file"));
        }
        for (j, v) in row.iter().enumerate() {
            m.set(j, i, *v);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> ModelFile {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            kind: "prototypal".into(),
            schema: vec![BlockSchema {
                name: "x".into(),
                role: "predictor".into(),
                kind: "vector".into(),
                columns: vec!["a".into(), "b".into()],
                categories: vec![],
                dim: 2,
            }],
            kernel_specs: vec![KernelSpecEntry::from_spec("x", &KernelSpec::Linear)],
            lambda: vec![0.1],
            k: vec![2],
            a: vec![vec![vec![0.25, 1.0 / 3.0], vec![0.75, 2.0 / 3.0]]],
            b: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            c: vec![],
            tau: vec![],
            fingerprint: Fingerprint {
                rows: 2,
                hash: "deadbeefdeadbeef".into(),
            },
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_model();
        save_model(&path, &model).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        save_model(&path, &loaded).unwrap();
        let second = fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn floats_use_17_significant_digits() {
        let bytes = model_bytes(&sample_model()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_model();
        save_model(&path, &model).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() / 2);
        fs::write(&path, &bytes).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, CliError::Data(_)));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut model = sample_model();
        model.schema_version = 99;
        // Bypass save_model's implicit version by writing directly.
        write_atomic(&path, &to_json_bytes(&model).unwrap()).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn non_finite_models_refuse_to_save() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = sample_model();
        model.lambda[0] = f64::NAN;
        let err = save_model(&dir.path().join("m.json"), &model).unwrap_err();
        assert!(matches!(err, CliError::Numerical(_)));
    }

    #[test]
    fn gram_file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gram.json");
        let file = GramFile {
            schema_version: SCHEMA_VERSION,
            kind: "gram".into(),
            provenance: "kernel:gaussian(sigma=0.5)".into(),
            fingerprint: Fingerprint {
                rows: 2,
                hash: "0123456789abcdef".into(),
            },
            gram: vec![vec![1.0, 1.0 / 3.0], vec![1.0 / 3.0, 1.0]],
        };
        save_gram(&path, &file).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_gram(&path).unwrap();
        assert_eq!(loaded, file);
        save_gram(&path, &loaded).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
    }

    #[test]
    fn matrix_transposition_round_trips() {
        let m = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let nested = mat_transposed_rows(&m);
        assert_eq!(nested, vec![vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]);
        let back = rows_to_mat_transposed(&nested).unwrap();
        assert_eq!(back, m);
    }
}
