use crate::load::{self, LoadedPlant, UsageError};
use crate::report;
use crate::synth::channel_norm;
use crate::Output;
use qsynth::dissipativity::{bounded_real_supply, strict_bounded_real_check, verify_dissipation};
use qsynth::io::{mat, num, ModelDocument};
use qsynth::matops::spectral_abscissa;
use qsynth::momentsim::{default_dt, propagate_moments, verify_dissipation_empirically, verify_hinf_objective, GaussianState};
use qsynth::robustness::{perturbed_drift, robust_stability_check};
use qsynth::synthesis::{close_loop, close_loop_triple, synthesize, verify_hinf_objective_bound, ClosedLoop};
use qsynth::{Mat, Plant64, Tolerances64, Vector};
use serde_json::{json, Map, Value};
use std::path::Path;

pub struct Setup {
    g: f64,
    lp: LoadedPlant,
    plant: Plant64,
    cl: ClosedLoop<f64>,
    /// Storage matrix from the synthesis certificate, when synthesized here.
    storage: Option<Mat>,
    base: Map<String, Value>,
}

impl Setup {
    /// Loads the plant and closes the loop. The inner `Err` is a finished
    /// failure report (synthesis failed).
    pub fn new(
        plant_path: &Path,
        g: f64,
        controller: Option<&Path>,
        tol: &Tolerances64,
    ) -> Result<Result<Setup, (Value, bool)>, UsageError> {
        let lp = load::plant(plant_path)?;
        let plant = lp.design(g).map_err(UsageError)?;
        let mut base = report::new("analyze");
        base.insert("g".into(), num(g));
        let (cl, storage) = match controller {
            Some(path) => {
                let (doc, raw) = load::document(path)?;
                let ModelDocument::Controller(f) = doc else {
                    return Err(UsageError(format!("{}: not a controller file", path.display())));
                };
                let ctrl = f.to_controller(Some(&raw)).map_err(|e| UsageError::io(path, e))?;
                let cl = close_loop(&plant, &ctrl).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                base.insert("controller".into(), json!("file"));
                (cl, None)
            }
            None => match synthesize(&plant, g, tol) {
                Ok(r) => {
                    base.insert("controller".into(), json!("synthesized"));
                    let cl = close_loop_triple(&plant, &r.triple)
                        .map_err(|e| UsageError(e.to_string()))?;
                    (cl, Some(r.certificate.x.clone()))
                }
                Err(e) => {
                    base.insert("error".into(), report::synthesis_error(&e));
                    return Ok(Err(report::finish(base, false)));
                }
            },
        };
        Ok(Ok(Setup { g, lp, plant, cl, storage, base }))
    }

    fn w_to_z(&self) -> (usize, usize) {
        (self.plant.n_w(), self.plant.n_z())
    }
}

pub fn norm(s: &Setup) -> (Value, bool) {
    let mut m = s.base.clone();
    m.insert("analysis".into(), json!("norm"));
    let (nw, nz) = s.w_to_z();
    let norm = channel_norm(&s.cl, (0, nw), (0, nz));
    m.insert("spectral_abscissa".into(), spectral_abscissa(&s.cl.atil).map(num).unwrap_or(Value::Null));
    m.insert("norm".into(), norm.map(num).unwrap_or(Value::Null));
    m.insert("norm_6".into(), json!(norm.map(|v| format!("{v:.6}"))));
    m.insert("below_g".into(), json!(norm.is_some_and(|v| v < s.g)));
    if let Some(u) = &s.lp.uncertain {
        let ch = u.channel();
        let nominal = channel_norm(&s.cl, (0, ch.w_start), (0, ch.z_start));
        let unc = channel_norm(&s.cl, (ch.w_start, ch.dim), (ch.z_start, ch.dim)).map(|v| v / s.g);
        m.insert("nominal_norm".into(), nominal.map(num).unwrap_or(Value::Null));
        m.insert("uncertainty_channel_norm".into(), unc.map(num).unwrap_or(Value::Null));
    }
    report::finish(m, norm.is_some())
}

pub fn sbr(s: &Setup, tol: &Tolerances64) -> (Value, bool) {
    let mut m = s.base.clone();
    m.insert("analysis".into(), json!("sbr"));
    let d0 = Mat::zeros(s.cl.ctil.nrows(), s.cl.btil.ncols());
    let res = strict_bounded_real_check(&s.cl.atil, &s.cl.btil, &s.cl.ctil, &d0, s.g, tol);
    m.insert("holds".into(), json!(res.holds));
    m.insert("reason".into(), json!(res.reason.map(|r| r.as_str())));
    if let Some(x) = &res.x {
        m.insert("X".into(), mat(x));
        let supply = bounded_real_supply(&s.cl.ctil, &d0, s.g);
        if let Ok(chk) =
            verify_dissipation(&s.cl.atil, &s.cl.btil, &s.cl.gtil, &s.cl.f_combined, &supply, x, false, tol)
        {
            m.insert(
                "dissipation".into(),
                json!({ "ok": chk.ok, "lmi_max_eigenvalue": num(chk.lmi_max_eig), "lambda0": num(chk.lambda0) }),
            );
        }
    }
    report::finish(m, res.holds)
}

pub fn robust(s: &Setup, grid: usize, samples: usize, seed: u64, tol: &Tolerances64) -> Result<(Value, bool), UsageError> {
    let u = s
        .lp
        .uncertain
        .as_ref()
        .ok_or_else(|| UsageError("plant file has no \"uncertainty\" section".into()))?;
    let ch = u.channel();
    let rep = robust_stability_check(&s.cl, &ch, s.g, grid, samples, seed, tol).map_err(|e| UsageError(e.to_string()))?;
    let mut m = s.base.clone();
    m.insert("analysis".into(), json!("robust"));
    m.insert("certified".into(), json!(rep.certified));
    m.insert("channel_norm".into(), num(rep.channel_norm));
    m.insert("worst_abscissa".into(), num(rep.worst_margin));
    m.insert("all_samples_stable".into(), json!(rep.all_samples_stable));
    m.insert(
        "structured".into(),
        Value::Array(rep.structured.iter().map(|(t, a)| json!({ "t": num(*t), "abscissa": num(*a) })).collect()),
    );
    let mut grid_ok = true;
    let mut shifts = Vec::new();
    let k = grid.max(2);
    for i in 0..k {
        let delta = u.mu * (-1.0 + 2.0 * i as f64 / (k - 1) as f64);
        let abar = perturbed_drift(&s.cl, &ch, &u.delta_for_shift(delta, s.g)).map_err(|e| UsageError(e.to_string()))?;
        let a = spectral_abscissa(&abar).unwrap_or(f64::INFINITY);
        grid_ok &= a < 0.0;
        shifts.push(json!({ "delta": num(delta), "abscissa": num(a) }));
    }
    m.insert("delta_grid".into(), Value::Array(shifts));
    Ok(report::finish(m, rep.certified && rep.all_samples_stable && grid_ok))
}

pub fn simulate(
    s: &Setup,
    signal: &Path,
    dt: Option<f64>,
    out: Option<&Path>,
    tol: &Tolerances64,
) -> Result<Output, UsageError> {
    let u = load::signal(signal, s.plant.n_w())?;
    let dt = match dt {
        Some(v) if v > 0.0 => v,
        Some(_) => return Err(UsageError("--dt must be positive".into())),
        None => default_dt(&s.cl.atil),
    };
    let n = s.cl.n();
    let d0 = Mat::zeros(s.cl.ctil.nrows(), s.cl.btil.ncols());
    let x = match &s.storage {
        Some(x) => Some(x.clone()),
        None => strict_bounded_real_check(&s.cl.atil, &s.cl.btil, &s.cl.ctil, &d0, s.g, tol).x,
    };
    let state = GaussianState::new(Vector::zeros(n), Mat::identity(n, n));
    let traj = propagate_moments(&s.cl.atil, &s.cl.btil, &s.cl.noise_input(), &s.cl.f_combined, &state, &u, dt);
    let mut m = s.base.clone();
    m.insert("analysis".into(), json!("simulate"));
    m.insert("steps".into(), json!(traj.len() - 1));
    m.insert("dt".into(), num(traj.times.get(1).copied().unwrap_or(dt)));
    m.insert("coarse_step".into(), json!(traj.coarse_step));
    let pass = match &x {
        Some(x) => {
            let lambda = s.cl.lambda0(x).map_err(|e| UsageError(e.to_string()))?;
            let supply = bounded_real_supply(&s.cl.ctil, &d0, s.g);
            let slack = verify_dissipation_empirically(&traj, x, &supply, lambda);
            m.insert("lambda0".into(), num(lambda));
            m.insert("dissipation_min_slack".into(), num(slack));
            if s.storage.is_some() {
                let eps = match synthesize(&s.plant, s.g, tol) {
                    Ok(r) => verify_hinf_objective_bound(&r).epsilon,
                    Err(_) => 0.0,
                };
                let mu1 = (x * state.second_moment()).trace();
                let obj = verify_hinf_objective(&traj, &s.cl.ctil, s.g, eps, mu1, lambda);
                m.insert("objective_min_slack".into(), num(obj.min_slack));
            }
            slack >= -1e-6
        }
        None => {
            m.insert("error".into(), report::failure("no_storage", "loop is not strictly bounded real at g"));
            false
        }
    };
    let csv = traj.to_csv();
    match out {
        Some(path) => {
            load::write(path, &csv)?;
            m.insert("csv".into(), json!(path.display().to_string()));
            Ok(report::finish(m, pass).into())
        }
        None => Ok(Output::Text(csv, pass)),
    }
}
