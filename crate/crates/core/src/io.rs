//! File formats: CSV input/output, the meta-model JSON document, and the
//! binary Gram cache.
//!
//! All floating-point text output goes through Rust's shortest round-trip
//! formatting, so writing and re-reading a value is bit-exact; the model
//! document and the Gram cache are therefore lossless.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::DesignData;
use crate::error::{Error, Result};
use crate::gram::{EigenGram, GroupEigen};
use crate::groups::{build_group_set, GroupSet};
use crate::kernel::KernelKind;
use crate::model::MetaModel;
use crate::select::{FitPath, PathEntry};
use crate::sobol::SobolReport;

/// Version of the model JSON document.
pub const MODEL_SCHEMA_VERSION: u32 = 1;
/// Version of the Gram cache binary format.
pub const GRAM_CACHE_VERSION: u32 = 1;

const GRAM_MAGIC: &[u8; 4] = b"RKGC";

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Reads a rectangular numeric CSV into a matrix. Rows are observations;
/// there is no header unless `has_header` says to skip one.
pub fn read_matrix_csv(path: &Path, has_header: bool) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::Io(annotate(e, path)))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::parse(format!(
                        "{}: row {}: not a number: {field:?}",
                        path.display(),
                        idx + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(format!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    idx + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(format!("{}: no data rows", path.display())));
    }
    let ncols = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let nrows = flat.len() / ncols;
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))
}

/// Reads a single-column CSV into a vector.
pub fn read_vector_csv(path: &Path, has_header: bool) -> Result<Array1<f64>> {
    let m = read_matrix_csv(path, has_header)?;
    if m.ncols() != 1 {
        return Err(Error::parse(format!(
            "{}: expected a single column, found {}",
            path.display(),
            m.ncols()
        )));
    }
    Ok(m.column(0).to_owned())
}

pub fn write_vector_csv(path: &Path, v: &Array1<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::Io(annotate(e, path)))?);
    for x in v.iter() {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::Io(annotate(e, path)))?);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the prediction-error matrix with mu values down the first column
/// and gamma values across the header row, full precision.
pub fn write_error_matrix_csv(
    path: &Path,
    mus: &[f64],
    gammas: &[f64],
    errors: &Array2<f64>,
) -> Result<()> {
    if errors.dim() != (mus.len(), gammas.len()) {
        return Err(Error::invalid("error matrix shape does not match the grids"));
    }
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::Io(annotate(e, path)))?);
    let header: Vec<String> = gammas.iter().map(|g| format!("{g}")).collect();
    writeln!(out, "mu,{}", header.join(","))?;
    for (i, mu) in mus.iter().enumerate() {
        let row: Vec<String> = (0..gammas.len()).map(|j| format!("{}", errors[[i, j]])).collect();
        writeln!(out, "{mu},{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a Sobol report: group rows, a blank line, then per-variable
/// totals.
pub fn write_sobol_csv(path: &Path, report: &SobolReport, groups: &GroupSet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::Io(annotate(e, path)))?);
    writeln!(out, "group,cardinality,index")?;
    for (name, card, s) in report.rows(groups) {
        writeln!(out, "{name},{card},{s}")?;
    }
    writeln!(out)?;
    writeln!(out, "variable,total")?;
    for (a, t) in report.total_by_var.iter().enumerate() {
        writeln!(out, "{},{t}", a + 1)?;
    }
    out.flush()?;
    Ok(())
}

fn annotate(e: std::io::Error, path: &Path) -> std::io::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Model document
// ---------------------------------------------------------------------------

/// Serialized form of a fitted meta-model, with the training design and
/// enough context to predict and compute indices later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kernel: KernelKind,
    pub dmax: usize,
    pub mu: f64,
    pub gamma: f64,
    pub intercept: f64,
    pub teta: Vec<Vec<f64>>,
    #[serde(rename = "fit.v")]
    pub fit_v: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
    #[serde(rename = "Norm.n")]
    pub norm_n: Vec<f64>,
    #[serde(rename = "Norm.H")]
    pub norm_h: Vec<f64>,
    /// 1-based positions of the active groups in the canonical order.
    pub supp: Vec<usize>,
    #[serde(rename = "Nsupp")]
    pub nsupp: Vec<String>,
    #[serde(rename = "SCR")]
    pub scr: f64,
    pub crit: f64,
    /// (sweep budget, sweeps used).
    pub iter: (usize, usize),
    pub convergence: bool,
    #[serde(rename = "RelDiffCrit")]
    pub rel_diff_crit: f64,
    #[serde(rename = "RelDiffPar")]
    pub rel_diff_par: f64,
    pub train_x: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl ModelFile {
    pub fn from_model(
        model: &MetaModel,
        groups: &GroupSet,
        kind: KernelKind,
        train_x: &Array2<f64>,
        provenance: Option<serde_json::Value>,
    ) -> Self {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            kernel: kind,
            dmax: groups.dmax(),
            mu: model.mu,
            gamma: model.gamma,
            intercept: model.intercept,
            teta: model.theta.rows().into_iter().map(|r| r.to_vec()).collect(),
            fit_v: model.fit_v.iter().map(|f| f.to_vec()).collect(),
            fitted: model.fitted.to_vec(),
            norm_n: model.norm_n.clone(),
            norm_h: model.norm_h.clone(),
            supp: model.supp.iter().map(|v| v + 1).collect(),
            nsupp: model.support_names(groups),
            scr: model.scr,
            crit: model.crit,
            iter: (model.max_iter, model.iter),
            convergence: model.converged,
            rel_diff_crit: model.rel_diff_crit,
            rel_diff_par: model.rel_diff_par,
            train_x: train_x.rows().into_iter().map(|r| r.to_vec()).collect(),
            provenance,
        }
    }

    /// Rebuilds the in-memory model, the group set and the training design
    /// matrix.
    pub fn into_parts(self) -> Result<(MetaModel, GroupSet, Array2<f64>)> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let train_x = vecs_to_matrix(self.train_x, "train_x")?;
        let d = train_x.ncols();
        let groups = build_group_set(d, self.dmax)?;
        let vmax = groups.len();
        let theta = vecs_to_matrix(self.teta, "teta")?;
        if theta.nrows() != vmax {
            return Err(Error::parse(format!(
                "teta has {} rows but the group set has {vmax} groups",
                theta.nrows()
            )));
        }
        let n = theta.ncols();
        if self.fitted.len() != n || self.fit_v.len() != vmax {
            return Err(Error::parse("model document has inconsistent dimensions"));
        }
        let fit_v: Vec<Array1<f64>> = self
            .fit_v
            .into_iter()
            .map(|f| {
                if f.len() == n {
                    Ok(Array1::from_vec(f))
                } else {
                    Err(Error::parse("fit.v row length mismatch"))
                }
            })
            .collect::<Result<_>>()?;
        let supp: Vec<usize> = self
            .supp
            .iter()
            .map(|&v| {
                if (1..=vmax).contains(&v) {
                    Ok(v - 1)
                } else {
                    Err(Error::parse(format!("support index {v} out of range 1..={vmax}")))
                }
            })
            .collect::<Result<_>>()?;
        let model = MetaModel {
            intercept: self.intercept,
            theta,
            fitted: Array1::from_vec(self.fitted),
            fit_v,
            norm_n: self.norm_n,
            norm_h: self.norm_h,
            supp,
            scr: self.scr,
            crit: self.crit,
            mu: self.mu,
            gamma: self.gamma,
            iter: self.iter.1,
            max_iter: self.iter.0,
            converged: self.convergence,
            rel_diff_crit: self.rel_diff_crit,
            rel_diff_par: self.rel_diff_par,
        };
        Ok((model, groups, train_x))
    }
}

fn vecs_to_matrix(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::parse(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::parse(format!("{what}: ragged rows")));
    }
    let nrows = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((nrows, ncols), flat).map_err(|e| Error::parse(format!("{what}: {e}")))
}

pub fn save_model(path: &Path, doc: &ModelFile) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(annotate(e, path)))?;
    serde_json::to_writer(BufWriter::new(file), doc)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let file = File::open(path).map_err(|e| Error::Io(annotate(e, path)))?;
    // Read the version first so a schema mismatch is reported as such
    // rather than as an arbitrary missing-field parse error.
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse(format!("{}: missing schema_version", path.display())))?;
    if found != MODEL_SCHEMA_VERSION as u64 {
        return Err(Error::SchemaMismatch { found: found as u32, expected: MODEL_SCHEMA_VERSION });
    }
    serde_json::from_value(value).map_err(|e| Error::parse(format!("{}: {e}", path.display())))
}

/// Serialized fit path: the grids plus one model document per entry.
#[derive(Debug, Serialize, Deserialize)]
pub struct PathFile {
    pub schema_version: u32,
    pub mus: Vec<f64>,
    pub gammas: Vec<f64>,
    pub entries: Vec<PathEntryFile>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PathEntryFile {
    pub mu: f64,
    pub gamma: f64,
    #[serde(rename = "Meta-Model")]
    pub model: ModelFile,
}

impl PathFile {
    pub fn from_path(
        path: &FitPath,
        groups: &GroupSet,
        kind: KernelKind,
        train_x: &Array2<f64>,
        provenance: Option<serde_json::Value>,
    ) -> Self {
        PathFile {
            schema_version: MODEL_SCHEMA_VERSION,
            mus: path.mus.clone(),
            gammas: path.gammas.clone(),
            entries: path
                .entries
                .iter()
                .map(|e| PathEntryFile {
                    mu: e.mu,
                    gamma: e.gamma,
                    model: ModelFile::from_model(&e.model, groups, kind, train_x, provenance.clone()),
                })
                .collect(),
        }
    }

    pub fn into_fit_path(self) -> Result<FitPath> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let entries = self
            .entries
            .into_iter()
            .map(|e| {
                let (model, _groups, _x) = e.model.into_parts()?;
                Ok(PathEntry { mu: e.mu, gamma: e.gamma, model })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FitPath { mus: self.mus, gammas: self.gammas, entries })
    }
}

pub fn save_path(path: &Path, doc: &PathFile) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(annotate(e, path)))?;
    serde_json::to_writer(BufWriter::new(file), doc)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn load_path(path: &Path) -> Result<PathFile> {
    let file = File::open(path).map_err(|e| Error::Io(annotate(e, path)))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Gram cache
// ---------------------------------------------------------------------------

/// Cache key: digest of the kernel, interaction order, tolerance and the
/// exact bit pattern of the design matrix.
pub fn gram_cache_key(x: &Array2<f64>, kind: KernelKind, dmax: usize, tol: f64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(kind.name().as_bytes());
    hasher.update((dmax as u64).to_le_bytes());
    hasher.update(tol.to_le_bytes());
    hasher.update((x.nrows() as u64).to_le_bytes());
    hasher.update((x.ncols() as u64).to_le_bytes());
    for v in x.iter() {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().into()
}

/// Writes the eigendecompositions to a binary cache file.
pub fn save_gram(path: &Path, gram: &EigenGram, data: &DesignData) -> Result<()> {
    let key = gram_cache_key(data.x(), gram.kind(), gram.groups().dmax(), gram.tol());
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::Io(annotate(e, path)))?);
    out.write_all(GRAM_MAGIC)?;
    out.write_all(&GRAM_CACHE_VERSION.to_le_bytes())?;
    out.write_all(&key)?;
    out.write_all(&[match gram.kind() {
        KernelKind::Linear => 0u8,
        KernelKind::Quadratic => 1,
        KernelKind::Brownian => 2,
        KernelKind::Matern => 3,
        KernelKind::Gaussian => 4,
    }])?;
    out.write_all(&(gram.n() as u64).to_le_bytes())?;
    out.write_all(&(gram.groups().d() as u64).to_le_bytes())?;
    out.write_all(&(gram.groups().dmax() as u64).to_le_bytes())?;
    out.write_all(&gram.tol().to_le_bytes())?;
    out.write_all(&(gram.len() as u64).to_le_bytes())?;
    for eig in gram.iter() {
        out.write_all(&[eig.corrected as u8])?;
        for v in eig.values.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in eig.vectors.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Loads a cache written by [`save_gram`], verifying that it belongs to
/// exactly this design, kernel, interaction order and tolerance.
pub fn load_gram(
    path: &Path,
    data: &DesignData,
    kind: KernelKind,
    dmax: usize,
    tol: f64,
) -> Result<EigenGram> {
    let mut input = BufReader::new(File::open(path).map_err(|e| Error::Io(annotate(e, path)))?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != GRAM_MAGIC {
        return Err(Error::parse(format!("{}: not a Gram cache file", path.display())));
    }
    let version = read_u32(&mut input)?;
    if version != GRAM_CACHE_VERSION {
        return Err(Error::SchemaMismatch { found: version, expected: GRAM_CACHE_VERSION });
    }
    let mut key = [0u8; 32];
    input.read_exact(&mut key)?;
    let expected = gram_cache_key(data.x(), kind, dmax, tol);
    if key != expected {
        return Err(Error::parse(format!(
            "{}: cache key does not match this design/kernel/dmax/tol",
            path.display()
        )));
    }
    let mut kind_byte = [0u8; 1];
    input.read_exact(&mut kind_byte)?;
    let n = read_u64(&mut input)? as usize;
    let d = read_u64(&mut input)? as usize;
    let dmax_file = read_u64(&mut input)? as usize;
    let tol_file = read_f64(&mut input)?;
    let vmax = read_u64(&mut input)? as usize;
    if n != data.n() || d != data.d() || dmax_file != dmax || tol_file.to_bits() != tol.to_bits() {
        return Err(Error::parse(format!("{}: cache header inconsistent", path.display())));
    }
    let groups = build_group_set(d, dmax)?;
    if groups.len() != vmax {
        return Err(Error::parse(format!("{}: group count mismatch", path.display())));
    }
    let mut eigs = Vec::with_capacity(vmax);
    for _ in 0..vmax {
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let mut values = Array1::zeros(n);
        for v in values.iter_mut() {
            *v = read_f64(&mut input)?;
        }
        let mut vectors = Array2::zeros((n, n));
        for v in vectors.iter_mut() {
            *v = read_f64(&mut input)?;
        }
        eigs.push(GroupEigen { values, vectors, corrected: flag[0] != 0 });
    }
    Ok(EigenGram::from_parts(groups, kind, n, tol, eigs))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::compute_gram;
    use crate::group_lasso::{group_lasso_fit, mu_max};
    use crate::model::FitConfig;
    use ndarray::array;
    use tempfile::tempdir;

    fn fitted_example() -> (DesignData, GroupSet, EigenGram, MetaModel) {
        let x = array![
            [0.1, 0.7],
            [0.4, 0.2],
            [0.8, 0.9],
            [0.3, 0.5],
            [0.6, 0.05],
            [0.95, 0.45]
        ];
        let y = array![1.0, -0.5, 2.0, 0.3, -1.2, 0.8];
        let data = DesignData::new(x, y).unwrap();
        let groups = build_group_set(2, 2).unwrap();
        let grams = compute_gram(&data, &groups, KernelKind::Matern, true, 1e-8).unwrap();
        let mu_g = mu_max(data.y(), &grams) / 5.0;
        let model = group_lasso_fit(data.y(), &grams, mu_g, &FitConfig::default(), None).unwrap();
        (data, groups, grams, model)
    }

    #[test]
    fn model_document_round_trips_bit_exactly() {
        let (data, groups, _grams, model) = fitted_example();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let doc = ModelFile::from_model(&model, &groups, KernelKind::Matern, data.x(), None);
        save_model(&path, &doc).unwrap();
        let loaded = load_model(&path).unwrap();
        let (model2, groups2, x2) = loaded.into_parts().unwrap();
        assert_eq!(groups2, groups);
        assert_eq!(x2, *data.x());
        assert_eq!(model2.intercept.to_bits(), model.intercept.to_bits());
        assert_eq!(model2.crit.to_bits(), model.crit.to_bits());
        assert_eq!(model2.scr.to_bits(), model.scr.to_bits());
        assert_eq!(model2.supp, model.supp);
        for (a, b) in model2.theta.iter().zip(model.theta.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in model2.fitted.iter().zip(model.fitted.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn model_document_rejects_future_schema() {
        let (data, groups, _grams, model) = fitted_example();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut doc = ModelFile::from_model(&model, &groups, KernelKind::Matern, data.x(), None);
        doc.schema_version = 99;
        save_model(&path, &doc).unwrap();
        match load_model(&path) {
            Err(Error::SchemaMismatch { found: 99, expected: _ }) => {}
            other => panic!("expected schema mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncated_model_document_is_a_parse_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{\"schema_version\": 1, \"kernel\": \"matern\"").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn gram_cache_round_trips_bit_exactly() {
        let (data, _groups, grams, _model) = fitted_example();
        let dir = tempdir().unwrap();
        let path = dir.path().join("gram.bin");
        save_gram(&path, &grams, &data).unwrap();
        let loaded = load_gram(&path, &data, KernelKind::Matern, 2, 1e-8).unwrap();
        assert_eq!(loaded.len(), grams.len());
        for (a, b) in loaded.iter().zip(grams.iter()) {
            assert_eq!(a.corrected, b.corrected);
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.vectors.iter().zip(b.vectors.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn gram_cache_rejects_wrong_key() {
        let (data, _groups, grams, _model) = fitted_example();
        let dir = tempdir().unwrap();
        let path = dir.path().join("gram.bin");
        save_gram(&path, &grams, &data).unwrap();
        // different kernel -> different key
        assert!(load_gram(&path, &data, KernelKind::Gaussian, 2, 1e-8).is_err());
        // different tolerance -> different key
        assert!(load_gram(&path, &data, KernelKind::Matern, 2, 1e-6).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = array![[0.5, 1.0e-17], [1.0 / 3.0, 2.0_f64.powi(-40)]];
        write_matrix_csv(&path, &m).unwrap();
        let back = read_matrix_csv(&path, false).unwrap();
        for (a, b) in back.iter().zip(m.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(read_matrix_csv(&path, false), Err(Error::Parse(_))));
        std::fs::write(&path, "1.0,abc\n").unwrap();
        assert!(matches!(read_matrix_csv(&path, false), Err(Error::Parse(_))));
    }
}
