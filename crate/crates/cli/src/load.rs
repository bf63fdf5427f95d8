use qsynth::io::{parse_document, IoError, ModelDocument, PlantFile, SignalFile};
use qsynth::robustness::UncertainPlant;
use qsynth::{Plant64, Tolerances64};
use std::fmt;
use std::path::Path;

/// Failure before any analysis ran: unreadable or malformed input, bad flags.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl UsageError {
    pub fn io(path: &Path, e: IoError) -> Self {
        UsageError(format!("{}: {e}", path.display()))
    }
}

pub fn read(path: &Path) -> Result<String, UsageError> {
    std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> Result<(), UsageError> {
    std::fs::write(path, text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

pub fn document(path: &Path) -> Result<(ModelDocument, String), UsageError> {
    let raw = read(path)?;
    let doc = parse_document(&raw).map_err(|e| UsageError::io(path, e))?;
    Ok((doc, raw))
}

pub struct LoadedPlant {
    pub nominal: Plant64,
    pub uncertain: Option<UncertainPlant<f64>>,
}

impl LoadedPlant {
    /// The plant a controller is designed for: the uncertainty-augmented
    /// plant when the file declares an uncertainty, the nominal one otherwise.
    pub fn design(&self, g: f64) -> Result<Plant64, String> {
        match &self.uncertain {
            Some(u) => u.augmented(g).map_err(|e| e.to_string()),
            None => Ok(self.nominal.clone()),
        }
    }
}

pub fn plant(path: &Path) -> Result<LoadedPlant, UsageError> {
    let raw = read(path)?;
    let file = PlantFile::parse(&raw).map_err(|e| UsageError::io(path, e))?;
    let nominal = file.to_plant(Some(&raw)).map_err(|e| UsageError::io(path, e))?;
    let uncertain = file.to_uncertain(Some(&raw)).map_err(|e| UsageError::io(path, e))?;
    Ok(LoadedPlant { nominal, uncertain })
}

pub fn signal(path: &Path, dim: usize) -> Result<qsynth::momentsim::InputSignal<f64>, UsageError> {
    let raw = read(path)?;
    let file: SignalFile = serde_json::from_str(&raw).map_err(|e| UsageError::io(path, IoError::from(e)))?;
    file.to_signal(dim).map_err(|e| UsageError::io(path, e))
}

/// Default tolerances with the residual threshold taken from QSYNTH_TOL.
pub fn tolerances() -> Result<Tolerances64, UsageError> {
    match std::env::var("QSYNTH_TOL") {
        Ok(v) => {
            let t: f64 = v
                .trim()
                .parse()
                .map_err(|_| UsageError(format!("QSYNTH_TOL: not a number: {v:?}")))?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(UsageError(format!("QSYNTH_TOL must be positive, got {t}")));
            }
            Ok(Tolerances64::with_residual(t))
        }
        Err(_) => Ok(Tolerances64::default()),
    }
}
