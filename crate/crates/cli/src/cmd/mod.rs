pub mod bench;
pub mod eval;
pub mod formula;
pub mod probe;
pub mod simulate;
pub mod train;

use std::path::Path;

use fbcode_neural::lightcode::load_model;
use fbcode_neural::LightCodeModel;

use crate::error::{CliError, Result};

/// Loads a checkpoint, naming the file in any error.
pub fn load(path: &str) -> Result<LightCodeModel<f32>> {
    load_model::<f32>(Path::new(path)).map(|(m, _)| m).map_err(|e| {
        let code = CliError::from(e);
        let msg = format!("{path}: {code}");
        match code {
            CliError::Usage(_) => CliError::Usage(msg),
            CliError::Numeric(_) => CliError::Numeric(msg),
            CliError::Io(_) => CliError::Io(msg),
        }
    })
}
