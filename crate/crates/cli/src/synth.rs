use crate::load::{self, LoadedPlant, UsageError};
use crate::report;
use qsynth::io::{mat, num, to_pretty, ControllerFile};
use qsynth::matops::spectral_abscissa;
use qsynth::qsde::{default_structure_tol, CommutationMatrix};
use qsynth::realizability::check_physical_realizability;
use qsynth::realization::{
    check_compatibility, realize_classical_controller, realize_mixed_controller, realize_quantum_controller,
    FullController, RealizationChoice,
};
use qsynth::riccati::hinf_norm;
use qsynth::synthesis::{
    bisect_feasible_level, close_loop, close_loop_triple, synthesize, verify_hinf_objective_bound, ClosedLoop,
    SynthesisResult,
};
use qsynth::{Mat, Plant64, Tolerances64};
use serde_json::{json, Map, Value};
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Realize {
    Quantum,
    Classical,
    Mixed(usize),
}

impl FromStr for Realize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quantum" => Ok(Realize::Quantum),
            "classical" => Ok(Realize::Classical),
            _ => s
                .strip_prefix("mixed:")
                .and_then(|n| n.parse().ok())
                .map(Realize::Mixed)
                .ok_or_else(|| format!("expected quantum, classical or mixed:N, got {s:?}")),
        }
    }
}

/// H∞ norm of the block of the closed loop between the given B̃ columns
/// and C̃ rows.
pub fn channel_norm(cl: &ClosedLoop<f64>, cols: (usize, usize), rows: (usize, usize)) -> Option<f64> {
    let b = cl.btil.columns(cols.0, cols.1).into_owned();
    let c = cl.ctil.rows(rows.0, rows.1).into_owned();
    let d = Mat::zeros(c.nrows(), b.ncols());
    if spectral_abscissa(&cl.atil).ok()? >= 0.0 {
        return None;
    }
    hinf_norm(&cl.atil, &b, &c, &d, 1e-10).ok()
}

fn round_up_3sf(x: f64) -> f64 {
    let e = 10f64.powf(x.log10().floor() - 2.0);
    ((x / e) - 1e-9).ceil() * e
}

fn sweep(lp: &LoadedPlant, lo: f64, hi: f64, tol: &Tolerances64) -> Value {
    let feasible = |g: f64| lp.design(g).is_ok_and(|p| synthesize(&p, g, tol).is_ok());
    match bisect_feasible_level(lo, hi, 1e-4, feasible) {
        Some(g) => {
            let g3 = round_up_3sf(g);
            json!({ "lo": num(lo), "hi": num(hi), "g_min": num(g), "g_min_3sf": num(g3), "feasible": true })
        }
        None => json!({ "lo": num(lo), "hi": num(hi), "feasible": false }),
    }
}

fn result_sections(m: &mut Map<String, Value>, plant: &Plant64, lp: &LoadedPlant, r: &SynthesisResult<f64>) {
    let a1 = &r.a1;
    m.insert(
        "assumptions".into(),
        json!({
            "A1": {
                "holds": a1.holds(),
                "E1_positive": a1.e1_positive,
                "E2_positive": a1.e2_positive,
                "control_pencil_full_rank": a1.control_pencil.full_rank,
                "measurement_pencil_full_rank": a1.measurement_pencil.full_rank,
            },
            "A2": {
                "holds": r.a2.holds(),
                "X_stabilizing": r.a2.x_stabilizing,
                "Y_stabilizing": r.a2.y_stabilizing,
                "spectral_radius_XY": num(r.a2.spectral_radius),
            },
        }),
    );
    m.insert("riccati".into(), json!({ "X": report::care(&r.x), "Y": report::care(&r.y) }));
    m.insert("controller".into(), report::triple(&r.triple));
    let bound = verify_hinf_objective_bound(r);
    m.insert(
        "certificate".into(),
        json!({
            "strict": r.certificate.strict,
            "lmi_margin": num(r.certificate.epsilon),
            "lambda0": num(r.certificate.lambda0),
            "X": mat(&r.certificate.x),
            "epsilon": num(bound.epsilon),
            "mu2": num(bound.mu2),
        }),
    );
    if let Ok(cl) = close_loop_triple(plant, &r.triple) {
        let mut c = Map::new();
        c.insert("order".into(), json!(cl.n()));
        c.insert("spectral_abscissa".into(), spectral_abscissa(&cl.atil).map(num).unwrap_or(Value::Null));
        let nw = plant.n_w();
        let nz = plant.n_z();
        c.insert("norm".into(), channel_norm(&cl, (0, nw), (0, nz)).map(num).unwrap_or(Value::Null));
        if let Some(u) = &lp.uncertain {
            let ch = u.channel();
            let nominal = channel_norm(&cl, (0, ch.w_start), (0, ch.z_start));
            let unc = channel_norm(&cl, (ch.w_start, ch.dim), (ch.z_start, ch.dim)).map(|v| v / r.g);
            c.insert("nominal_norm".into(), nominal.map(num).unwrap_or(Value::Null));
            c.insert("uncertainty_channel_norm".into(), unc.map(num).unwrap_or(Value::Null));
        }
        m.insert("closed_loop".into(), Value::Object(c));
    }
}

fn realize(kind: Realize, r: &SynthesisResult<f64>) -> Result<FullController<f64>, String> {
    let t = r.triple.padded();
    let choice = RealizationChoice::default();
    match kind {
        Realize::Quantum => realize_quantum_controller(&t, &choice),
        Realize::Classical => realize_classical_controller(&t),
        Realize::Mixed(np) => {
            let theta = CommutationMatrix::degenerate(t.n_k(), np).map_err(|e| e.to_string())?;
            realize_mixed_controller(&t, &theta, &choice)
        }
    }
    .map_err(|e| e.to_string())
}

fn realization_section(
    kind: Realize,
    ctrl: &FullController<f64>,
    plant: &Plant64,
    r: &SynthesisResult<f64>,
    tol: &Tolerances64,
) -> (Value, bool) {
    let mut m = Map::new();
    m.insert(
        "kind".into(),
        json!(match kind {
            Realize::Quantum => "quantum".to_string(),
            Realize::Classical => "classical".to_string(),
            Realize::Mixed(np) => format!("mixed:{np}"),
        }),
    );
    m.insert("n_vK".into(), json!(ctrl.n_vk()));
    m.insert("B_K0".into(), mat(&ctrl.b_k0));
    m.insert("B_K1".into(), mat(&ctrl.b_k1));
    m.insert("Theta_K".into(), mat(ctrl.theta.matrix()));
    let no_ft = ctrl.no_feedthrough();
    m.insert("no_feedthrough".into(), json!(no_ft));
    m.insert("compatible".into(), json!(check_compatibility(ctrl, 1e-9)));
    if let Some(p) = &ctrl.oscillator {
        m.insert("oscillator".into(), report::oscillator(p));
    }
    let realizable = match ctrl.as_qsde() {
        Ok(sys) => {
            let t = default_structure_tol(&sys.a, &sys.b, tol);
            match check_physical_realizability(&sys, Some(t)) {
                Ok(rep) => {
                    m.insert("realizability".into(), report::realizability(&rep));
                    rep.realizable
                }
                Err(e) => {
                    m.insert("realizability".into(), json!({ "realizable": false, "error": e.to_string() }));
                    false
                }
            }
        }
        Err(e) => {
            m.insert("realizability".into(), json!({ "realizable": false, "error": e.to_string() }));
            false
        }
    };
    let mut stable = false;
    if let Ok(cl) = close_loop(plant, ctrl) {
        let sa = spectral_abscissa(&cl.atil).unwrap_or(f64::INFINITY);
        stable = sa < 0.0;
        m.insert(
            "closed_loop".into(),
            json!({
                "order": cl.n(),
                "spectral_abscissa": num(sa),
                "lambda0": cl.lambda0(&r.certificate.x).map(num).unwrap_or(Value::Null),
            }),
        );
    }
    (Value::Object(m), realizable && no_ft && stable)
}

pub fn run(
    path: &Path,
    g: Option<f64>,
    realize_kind: Option<Realize>,
    out: Option<&Path>,
    sweep_range: Option<(f64, f64)>,
    tol: &Tolerances64,
) -> Result<(Value, bool), UsageError> {
    let lp = load::plant(path)?;
    let mut m = report::new("synthesize");
    let mut pass = true;
    if let Some((lo, hi)) = sweep_range {
        let s = sweep(&lp, lo, hi, tol);
        pass &= s["feasible"] == json!(true);
        m.insert("sweep".into(), s);
    }
    let Some(g) = g else {
        return Ok(report::finish(m, pass));
    };
    if !(g > 0.0) {
        return Err(UsageError("--g must be positive".into()));
    }
    m.insert("g".into(), num(g));
    let plant = lp.design(g).map_err(UsageError)?;
    m.insert(
        "plant".into(),
        json!({
            "n": plant.n(), "n_v": plant.n_v(), "n_w": plant.n_w(), "n_u": plant.n_u(),
            "n_z": plant.n_z(), "n_y": plant.n_y(), "uncertain": lp.uncertain.is_some(),
        }),
    );
    let r = match synthesize(&plant, g, tol) {
        Ok(r) => r,
        Err(e) => {
            m.insert("error".into(), report::synthesis_error(&e));
            return Ok(report::finish(m, false));
        }
    };
    result_sections(&mut m, &plant, &lp, &r);
    if let Some(kind) = realize_kind {
        match realize(kind, &r) {
            Ok(ctrl) => {
                let (v, ok) = realization_section(kind, &ctrl, &plant, &r, tol);
                m.insert("realization".into(), v);
                pass &= ok;
                if let Some(out) = out {
                    load::write(out, &to_pretty(&ControllerFile::from_controller(&ctrl)))?;
                }
            }
            Err(e) => {
                m.insert("error".into(), report::failure("realization_failed", e));
                pass = false;
            }
        }
    }
    Ok(report::finish(m, pass))
}
