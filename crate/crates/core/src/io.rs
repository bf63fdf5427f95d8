//! JSON file formats for plants, systems, controllers and disturbance
//! signals, plus helpers for deterministic report output.

use crate::matops;
use crate::momentsim::InputSignal;
use crate::qsde::{canonical_ito, CommutationMatrix, ItoMatrix, LinearQsde, ThetaKind};
use crate::realization::FullController;
use crate::robustness::UncertainPlant;
use crate::synthesis::{ControllerTriple, Plant};
use crate::Mat;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;

/// Parse or validation error, anchored to a position in the source text
/// when one is known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoError {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for IoError {}

impl IoError {
    fn plain(message: impl Into<String>) -> Self {
        IoError {
            message: message.into(),
            line: None,
            column: None,
        }
    }

    /// Anchors the error at the first occurrence of `"key"` in `raw`.
    fn at_key(raw: Option<&str>, key: &str, message: impl Into<String>) -> Self {
        let mut e = IoError::plain(message);
        if let Some((l, c)) = raw.and_then(|r| locate_key(r, key)) {
            e.line = Some(l);
            e.column = Some(c);
        }
        e
    }
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError {
            message: e.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
        }
    }
}

/// 1-based (line, column) of the first `"key"` in `raw`.
pub fn locate_key(raw: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    let pos = raw.find(&needle)?;
    let before = &raw[..pos];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map(|i| pos - i).unwrap_or(pos + 1);
    Some((line, column))
}

pub type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItoSpec {
    Named(String),
    Explicit {
        #[serde(rename = "S")]
        s: Rows,
        #[serde(rename = "Tim")]
        tim: Rows,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThetaSpec {
    Canonical,
    Degenerate { nprime: usize },
    Matrix { matrix: Rows },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantIto {
    pub v: ItoSpec,
    pub w: ItoSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub mu: f64,
    #[serde(rename = "S")]
    pub s: Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    pub n: usize,
    pub matrices: BTreeMap<String, Rows>,
    pub theta: ThetaSpec,
    pub ito: PlantIto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub matrices: BTreeMap<String, Rows>,
    pub theta: ThetaSpec,
    pub ito: ItoSpec,
    #[serde(default)]
    pub output_offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    pub n: usize,
    pub matrices: BTreeMap<String, Rows>,
    pub theta: ThetaSpec,
    pub ito: ItoSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSegment {
    pub t: f64,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalFile {
    pub horizon: f64,
    pub segments: Vec<SignalSegment>,
}

pub fn rows(m: &Mat) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn to_matrix(
    raw: Option<&str>,
    name: &str,
    r: &Rows,
    rows_if_empty: usize,
    cols_if_empty: usize,
) -> Result<Mat, IoError> {
    if r.is_empty() {
        return Ok(DMatrix::zeros(rows_if_empty, cols_if_empty));
    }
    let ncols = r[0].len();
    if r.iter().any(|row| row.len() != ncols) {
        return Err(IoError::at_key(raw, name, format!("{name}: rows have unequal lengths")));
    }
    if ncols == 0 {
        return Ok(DMatrix::zeros(r.len(), cols_if_empty));
    }
    Ok(DMatrix::from_fn(r.len(), ncols, |i, j| r[i][j]))
}

fn get<'a>(raw: Option<&str>, m: &'a BTreeMap<String, Rows>, name: &str) -> Result<&'a Rows, IoError> {
    m.get(name)
        .ok_or_else(|| IoError::at_key(raw, "matrices", format!("missing matrix {name}")))
}

fn expect_shape(raw: Option<&str>, name: &str, m: &Mat, r: usize, c: usize) -> Result<(), IoError> {
    if m.shape() != (r, c) {
        return Err(IoError::at_key(
            raw,
            name,
            format!("{name} is {}x{}, expected {r}x{c}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn theta_from_spec(raw: Option<&str>, spec: &ThetaSpec, n: usize) -> Result<CommutationMatrix<f64>, IoError> {
    let r = match spec {
        ThetaSpec::Canonical => CommutationMatrix::canonical(n),
        ThetaSpec::Degenerate { nprime } => CommutationMatrix::degenerate(n, *nprime),
        ThetaSpec::Matrix { matrix } => {
            let m = to_matrix(raw, "matrix", matrix, n, n)?;
            expect_shape(raw, "matrix", &m, n, n)?;
            CommutationMatrix::from_matrix(m)
        }
    };
    r.map_err(|e| IoError::at_key(raw, "theta", e.to_string()))
}

pub fn theta_spec(theta: &CommutationMatrix<f64>) -> ThetaSpec {
    match theta.kind() {
        ThetaKind::Canonical => ThetaSpec::Canonical,
        ThetaKind::Degenerate { nprime } => ThetaSpec::Degenerate { nprime },
        ThetaKind::Permuted { .. } => ThetaSpec::Matrix {
            matrix: rows(theta.matrix()),
        },
    }
}

fn ito_from_spec(raw: Option<&str>, key: &str, spec: &ItoSpec, dim: usize) -> Result<ItoMatrix<f64>, IoError> {
    match spec {
        ItoSpec::Named(s) if s == "canonical" => {
            canonical_ito(dim).map_err(|e| IoError::at_key(raw, key, e.to_string()))
        }
        ItoSpec::Named(s) => Err(IoError::at_key(raw, key, format!("unknown Ito matrix \"{s}\""))),
        ItoSpec::Explicit { s, tim } => {
            let sm = to_matrix(raw, "S", s, dim, dim)?;
            let tm = to_matrix(raw, "Tim", tim, dim, dim)?;
            expect_shape(raw, "S", &sm, dim, dim)?;
            expect_shape(raw, "Tim", &tm, dim, dim)?;
            ItoMatrix::from_parts(sm, tm).map_err(|e| IoError::at_key(raw, key, e.to_string()))
        }
    }
}

pub fn ito_spec(f: &ItoMatrix<f64>) -> ItoSpec {
    if f.dim() % 2 == 0 && f.is_canonical(0.0) {
        ItoSpec::Named("canonical".to_string())
    } else {
        ItoSpec::Explicit {
            s: rows(&f.s),
            tim: rows(&f.tim),
        }
    }
}

impl PlantFile {
    pub fn parse(raw: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(raw)?)
    }

    pub fn to_plant(&self, raw: Option<&str>) -> Result<Plant<f64>, IoError> {
        let m = &self.matrices;
        for k in m.keys() {
            if !["A", "B0", "B1", "B2", "C1", "D12", "C2", "D20", "D21"].contains(&k.as_str()) {
                return Err(IoError::at_key(raw, k, format!("unknown matrix {k}")));
            }
        }
        let n = self.n;
        let a = to_matrix(raw, "A", get(raw, m, "A")?, n, n)?;
        expect_shape(raw, "A", &a, n, n)?;
        let b0 = to_matrix(raw, "B0", get(raw, m, "B0")?, n, 0)?;
        let b1 = to_matrix(raw, "B1", get(raw, m, "B1")?, n, 0)?;
        let b2 = to_matrix(raw, "B2", get(raw, m, "B2")?, n, 0)?;
        for (k, b) in [("B0", &b0), ("B1", &b1), ("B2", &b2)] {
            expect_shape(raw, k, b, n, b.ncols())?;
        }
        let (nv, nw, nu) = (b0.ncols(), b1.ncols(), b2.ncols());
        let c1 = to_matrix(raw, "C1", get(raw, m, "C1")?, 0, n)?;
        expect_shape(raw, "C1", &c1, c1.nrows(), n)?;
        let nz = c1.nrows();
        let d12 = to_matrix(raw, "D12", get(raw, m, "D12")?, nz, nu)?;
        expect_shape(raw, "D12", &d12, nz, nu)?;
        let c2 = to_matrix(raw, "C2", get(raw, m, "C2")?, 0, n)?;
        expect_shape(raw, "C2", &c2, c2.nrows(), n)?;
        let ny = c2.nrows();
        let d20 = to_matrix(raw, "D20", get(raw, m, "D20")?, ny, nv)?;
        expect_shape(raw, "D20", &d20, ny, nv)?;
        let d21 = to_matrix(raw, "D21", get(raw, m, "D21")?, ny, nw)?;
        expect_shape(raw, "D21", &d21, ny, nw)?;
        let plant = Plant {
            a,
            b0,
            b1,
            b2,
            c1,
            d12,
            c2,
            d20,
            d21,
            f_v: ito_from_spec(raw, "v", &self.ito.v, nv)?,
            f_w: ito_from_spec(raw, "w", &self.ito.w, nw)?,
            theta: theta_from_spec(raw, &self.theta, n)?,
        };
        plant
            .validate()
            .map_err(|e| IoError::at_key(raw, "matrices", e.to_string()))?;
        Ok(plant)
    }

    pub fn to_uncertain(&self, raw: Option<&str>) -> Result<Option<UncertainPlant<f64>>, IoError> {
        let Some(u) = &self.uncertainty else { return Ok(None) };
        let nominal = self.to_plant(raw)?;
        let s = to_matrix(raw, "S", &u.s, self.n, self.n)?;
        expect_shape(raw, "S", &s, self.n, self.n)?;
        Ok(Some(UncertainPlant {
            nominal,
            mu: u.mu,
            s,
        }))
    }

    pub fn from_plant(p: &Plant<f64>) -> Self {
        let mut matrices = BTreeMap::new();
        for (k, m) in [
            ("A", &p.a),
            ("B0", &p.b0),
            ("B1", &p.b1),
            ("B2", &p.b2),
            ("C1", &p.c1),
            ("D12", &p.d12),
            ("C2", &p.c2),
            ("D20", &p.d20),
            ("D21", &p.d21),
        ] {
            matrices.insert(k.to_string(), rows(m));
        }
        PlantFile {
            n: p.n(),
            matrices,
            theta: theta_spec(&p.theta),
            ito: PlantIto {
                v: ito_spec(&p.f_v),
                w: ito_spec(&p.f_w),
            },
            uncertainty: None,
        }
    }

    pub fn from_uncertain(p: &UncertainPlant<f64>) -> Self {
        let mut f = PlantFile::from_plant(&p.nominal);
        f.uncertainty = Some(UncertaintySpec {
            mu: p.mu,
            s: rows(&p.s),
        });
        f
    }
}

impl SystemFile {
    pub fn to_system(&self, raw: Option<&str>) -> Result<LinearQsde<f64>, IoError> {
        let m = &self.matrices;
        let n = self.n;
        let a = to_matrix(raw, "A", get(raw, m, "A")?, n, n)?;
        expect_shape(raw, "A", &a, n, n)?;
        let b = to_matrix(raw, "B", get(raw, m, "B")?, n, 0)?;
        expect_shape(raw, "B", &b, n, b.ncols())?;
        let c = to_matrix(raw, "C", get(raw, m, "C")?, 0, n)?;
        expect_shape(raw, "C", &c, c.nrows(), n)?;
        let d = to_matrix(raw, "D", get(raw, m, "D")?, c.nrows(), b.ncols())?;
        expect_shape(raw, "D", &d, c.nrows(), b.ncols())?;
        let nw = b.ncols();
        LinearQsde::new(
            a,
            b,
            c,
            d,
            theta_from_spec(raw, &self.theta, n)?,
            ito_from_spec(raw, "ito", &self.ito, nw)?,
            self.output_offset,
        )
        .map_err(|e| IoError::at_key(raw, "matrices", e.to_string()))
    }

    pub fn from_system(s: &LinearQsde<f64>) -> Self {
        let mut matrices = BTreeMap::new();
        for (k, m) in [("A", &s.a), ("B", &s.b), ("C", &s.c), ("D", &s.d)] {
            matrices.insert(k.to_string(), rows(m));
        }
        SystemFile {
            n: s.n(),
            matrices,
            theta: theta_spec(&s.theta),
            ito: ito_spec(&s.ito),
            output_offset: s.output_offset,
        }
    }
}

impl ControllerFile {
    pub fn to_controller(&self, raw: Option<&str>) -> Result<FullController<f64>, IoError> {
        let m = &self.matrices;
        let n = self.n;
        let a_k = to_matrix(raw, "A_K", get(raw, m, "A_K")?, n, n)?;
        expect_shape(raw, "A_K", &a_k, n, n)?;
        let b_k = to_matrix(raw, "B_K", get(raw, m, "B_K")?, n, 0)?;
        expect_shape(raw, "B_K", &b_k, n, b_k.ncols())?;
        let c_k = to_matrix(raw, "C_K", get(raw, m, "C_K")?, 0, n)?;
        expect_shape(raw, "C_K", &c_k, c_k.nrows(), n)?;
        let b_k1 = to_matrix(raw, "B_K1", get(raw, m, "B_K1")?, n, 0)?;
        expect_shape(raw, "B_K1", &b_k1, n, b_k1.ncols())?;
        let b_k0 = to_matrix(raw, "B_K0", get(raw, m, "B_K0")?, c_k.nrows(), b_k1.ncols())?;
        expect_shape(raw, "B_K0", &b_k0, c_k.nrows(), b_k1.ncols())?;
        let nvk = b_k1.ncols();
        Ok(FullController {
            triple: ControllerTriple { a_k, b_k, c_k },
            b_k0,
            b_k1,
            theta: theta_from_spec(raw, &self.theta, n)?,
            f_vk: ito_from_spec(raw, "ito", &self.ito, nvk)?,
            oscillator: None,
        })
    }

    pub fn from_controller(c: &FullController<f64>) -> Self {
        let mut matrices = BTreeMap::new();
        for (k, m) in [
            ("A_K", &c.triple.a_k),
            ("B_K", &c.triple.b_k),
            ("C_K", &c.triple.c_k),
            ("B_K0", &c.b_k0),
            ("B_K1", &c.b_k1),
        ] {
            matrices.insert(k.to_string(), rows(m));
        }
        ControllerFile {
            n: c.triple.n_k(),
            matrices,
            theta: theta_spec(&c.theta),
            ito: ito_spec(&c.f_vk),
        }
    }
}

impl SignalFile {
    pub fn to_signal(&self, dim: usize) -> Result<InputSignal<f64>, IoError> {
        if self.segments.is_empty() {
            return Ok(InputSignal::zero(dim, self.horizon));
        }
        let mut starts = Vec::new();
        let mut values = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            if s.beta.len() != dim {
                return Err(IoError::plain(format!(
                    "segment {i}: beta has {} entries, expected {dim}",
                    s.beta.len()
                )));
            }
            if starts.last().is_some_and(|&t: &f64| s.t <= t) {
                return Err(IoError::plain(format!("segment {i}: start times must increase")));
            }
            starts.push(s.t);
            values.push(DVector::from_vec(s.beta.clone()));
        }
        if starts[0] > 0.0 {
            starts.insert(0, 0.0);
            values.insert(0, DVector::zeros(dim));
        }
        Ok(InputSignal {
            starts,
            values,
            horizon: self.horizon,
        })
    }
}

/// Any of the three model documents, recognised by its matrix names.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelDocument {
    Plant(PlantFile),
    System(SystemFile),
    Controller(ControllerFile),
}

pub fn parse_document(raw: &str) -> Result<ModelDocument, IoError> {
    let v: Value = serde_json::from_str(raw)?;
    let keys = v
        .get("matrices")
        .and_then(Value::as_object)
        .ok_or_else(|| IoError::plain("document has no \"matrices\" object"))?;
    if keys.contains_key("B0") {
        Ok(ModelDocument::Plant(serde_json::from_str(raw)?))
    } else if keys.contains_key("A_K") {
        Ok(ModelDocument::Controller(serde_json::from_str(raw)?))
    } else {
        Ok(ModelDocument::System(serde_json::from_str(raw)?))
    }
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round12(x))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn mat(m: &Mat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array(m.row(i).iter().map(|&x| num(x)).collect()))
            .collect(),
    )
}

/// Complex matrix as separate real and imaginary parts.
pub fn cmat(m: &crate::CMat) -> Value {
    let mut o = serde_json::Map::new();
    o.insert("re".to_string(), mat(&matops::re_part(m)));
    o.insert("im".to_string(), mat(&matops::im_part(m)));
    Value::Object(o)
}

pub fn to_pretty<S: Serialize>(s: &S) -> String {
    let mut out = serde_json::to_string_pretty(s).unwrap_or_default();
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn plant_round_trip() {
        for p in [fixtures::cavity(), fixtures::cavity_measured(), fixtures::amplifier_cavity()] {
            let f = PlantFile::from_plant(&p);
            let text = to_pretty(&f);
            let back = PlantFile::parse(&text).unwrap();
            assert_eq!(to_pretty(&back), text);
            assert_eq!(back.to_plant(Some(&text)).unwrap(), p);
        }
    }

    #[test]
    fn anchored_dimension_error() {
        let mut f = PlantFile::from_plant(&fixtures::cavity());
        f.matrices.insert("C2".to_string(), vec![vec![1.0, 2.0, 3.0]]);
        let text = to_pretty(&f);
        let err = PlantFile::parse(&text).unwrap().to_plant(Some(&text)).unwrap_err();
        assert!(err.message.contains("C2"));
        let (line, _) = locate_key(&text, "C2").unwrap();
        assert_eq!(err.line, Some(line));
    }

    #[test]
    fn syntax_error_position() {
        let err = PlantFile::parse("{\n  \"n\": 2,\n  oops\n}").unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn rounding() {
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(-0.0), 0.0);
    }

    #[test]
    fn document_detection() {
        let sys = fixtures::cavity().as_qsde().unwrap();
        let text = to_pretty(&SystemFile::from_system(&sys));
        match parse_document(&text).unwrap() {
            ModelDocument::System(s) => assert_eq!(s.to_system(Some(&text)).unwrap(), sys),
            other => panic!("{other:?}"),
        }
    }
}
