use qsynth::io::{cmat, mat, num};
use qsynth::realizability::RealizabilityReport;
use qsynth::riccati::CareSolution;
use qsynth::synthesis::{ControllerTriple, SynthesisError};
use num_complex::Complex;
use serde_json::{json, Map, Value};

pub const VERSION: &str = "qsynth-report/1";

pub fn new(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(command));
    m
}

pub fn finish(mut m: Map<String, Value>, pass: bool) -> (Value, bool) {
    m.insert("status".into(), json!(if pass { "pass" } else { "fail" }));
    (Value::Object(m), pass)
}

pub fn eigs(v: &[Complex<f64>]) -> Value {
    Value::Array(v.iter().map(|z| json!([num(z.re), num(z.im)])).collect())
}

pub fn care(s: &CareSolution<f64>) -> Value {
    json!({
        "matrix": mat(&s.x),
        "residual": num(s.residual),
        "stabilizing": s.stabilizing,
        "closed_loop_eigenvalues": eigs(&s.closed_loop_eigs),
        "method": format!("{:?}", s.method),
    })
}

pub fn triple(t: &ControllerTriple<f64>) -> Value {
    json!({ "A_K": mat(&t.a_k), "B_K": mat(&t.b_k), "C_K": mat(&t.c_k) })
}

pub fn realizability(r: &RealizabilityReport<f64>) -> Value {
    let mut m = Map::new();
    m.insert("realizable".into(), json!(r.realizable));
    m.insert("residual_A".into(), num(r.residual_a));
    m.insert("residual_B".into(), num(r.residual_b));
    m.insert("residual_D".into(), num(r.d_residual));
    m.insert("D_conforms".into(), json!(r.d_conforms));
    m.insert("tolerance".into(), num(r.tolerance));
    m.insert("augmented".into(), json!(r.augmentation.is_some()));
    Value::Object(m)
}

pub fn oscillator(p: &qsynth::realizability::OscillatorParams<f64>) -> Value {
    json!({ "R": mat(&p.r), "Lambda": cmat(&p.lambda) })
}

pub fn synthesis_error(e: &SynthesisError) -> Value {
    let mut m = Map::new();
    m.insert("code".into(), json!(e.code()));
    m.insert("message".into(), json!(e.to_string()));
    let stage = match e {
        SynthesisError::GTooSmall { stage }
        | SynthesisError::NegativeSolution { stage, .. }
        | SynthesisError::Riccati { stage, .. } => Some(stage.as_str()),
        SynthesisError::AssumptionA1Violated { .. } => Some("assumption_a1"),
        SynthesisError::SpectralRadiusGeOne { .. } | SynthesisError::SingularIMinusYX => Some("assumption_a2"),
        SynthesisError::CertificateFailed { .. } => Some("certificate"),
        _ => None,
    };
    if let Some(s) = stage {
        m.insert("stage".into(), json!(s));
    }
    if let SynthesisError::AssumptionA1Violated { condition, .. } = e {
        m.insert("condition".into(), json!(condition));
    }
    Value::Object(m)
}

pub fn failure(code: &str, message: impl ToString) -> Value {
    json!({ "code": code, "message": message.to_string() })
}
