use crate::load::{self, UsageError};
use crate::report;
use qsynth::io::{mat, num, ModelDocument};
use qsynth::qsde::{default_structure_tol, preserves_commutation, LinearQsde, ThetaKind};
use qsynth::realizability::{augment_degenerate, check_physical_realizability, extract_hamiltonian_coupling};
use qsynth::Tolerances64;
use serde_json::{json, Value};
use std::path::Path;

fn as_system(path: &Path) -> Result<(&'static str, LinearQsde<f64>), UsageError> {
    let (doc, raw) = load::document(path)?;
    let bad = |e: &dyn std::fmt::Display| UsageError(format!("{}: {e}", path.display()));
    Ok(match doc {
        ModelDocument::Plant(f) => {
            let p = f.to_plant(Some(&raw)).map_err(|e| UsageError::io(path, e))?;
            ("plant", p.as_qsde().map_err(|e| bad(&e))?)
        }
        ModelDocument::System(f) => ("system", f.to_system(Some(&raw)).map_err(|e| UsageError::io(path, e))?),
        ModelDocument::Controller(f) => {
            let c = f.to_controller(Some(&raw)).map_err(|e| UsageError::io(path, e))?;
            ("controller", c.as_qsde().map_err(|e| bad(&e))?)
        }
    })
}

fn augmentation_value(aug: &qsynth::realizability::AugmentedSystem<f64>) -> Value {
    json!({
        "n": aug.sys.n(),
        "A": mat(&aug.sys.a),
        "B": mat(&aug.sys.b),
        "C": mat(&aug.sys.c),
        "D": mat(&aug.sys.d),
        "Theta": mat(aug.sys.theta.matrix()),
        "embed": aug.embed,
        "canonical_order": aug.order,
    })
}

pub fn run(path: &Path, extract: bool, augment: bool, tol: &Tolerances64) -> Result<(Value, bool), UsageError> {
    let (kind, sys) = as_system(path)?;
    let mut m = report::new("check");
    m.insert("document".into(), json!(kind));
    m.insert("n".into(), json!(sys.n()));
    let structure_tol = default_structure_tol(&sys.a, &sys.b, tol);
    let comm = preserves_commutation(&sys, structure_tol);
    m.insert(
        "commutation".into(),
        json!({ "holds": comm.holds, "residual": num(comm.residual), "tolerance": num(structure_tol) }),
    );
    let rep = check_physical_realizability(&sys, Some(structure_tol));
    let realizable = match &rep {
        Ok(r) => {
            m.insert("realizability".into(), report::realizability(r));
            r.realizable
        }
        Err(e) => {
            m.insert("realizability".into(), json!({ "realizable": false, "error": e.to_string() }));
            false
        }
    };
    if extract {
        let value = match rep.as_ref().ok().and_then(|r| r.params.as_ref()) {
            Some(p) => report::oscillator(p),
            None => match extract_hamiltonian_coupling(&sys) {
                Ok(p) => report::oscillator(&p),
                Err(e) => json!({ "error": e.to_string() }),
            },
        };
        m.insert("extraction".into(), value);
    }
    if augment {
        let value = match rep.as_ref().ok().and_then(|r| r.augmentation.as_ref()) {
            Some(aug) => augmentation_value(aug),
            None if sys.theta.kind() == ThetaKind::Canonical => json!({ "needed": false }),
            None => match augment_degenerate(&sys) {
                Ok(aug) => augmentation_value(&aug),
                Err(e) => json!({ "error": e.to_string() }),
            },
        };
        m.insert("augmentation".into(), value);
    }
    Ok(report::finish(m, comm.holds && realizable))
}
