//! Versioned JSON checkpoints of the two-scale state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupler::TwoScaleState;
use crate::error::{Error, Result};

pub const FORMAT: &str = "dpfe2-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    state: TwoScaleState,
}

pub fn to_json(state: &TwoScaleState) -> Result<String> {
    let env = Envelope {
        format: FORMAT.into(),
        version: VERSION,
        state: state.clone(),
    };
    serde_json::to_string(&env).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_json(text: &str) -> Result<TwoScaleState> {
    let env: Envelope = serde_json::from_str(text).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    if env.format != FORMAT {
        return Err(Error::Format(format!("not a checkpoint (format '{}')", env.format)));
    }
    if env.version != VERSION {
        return Err(Error::Format(format!("checkpoint version {} unsupported (expected {VERSION})", env.version)));
    }
    Ok(env.state)
}

pub fn save(state: &TwoScaleState, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(state)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TwoScaleState> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{Mat2, MaterialParams, PermeabilityUpdate};
    use crate::geometry::{build_unit_cell, CellParams, MacroDomain, Sampling};

    #[test]
    fn round_trip_and_version_check() {
        let dom = MacroDomain::rectangle(0.2, 0.1, 1, 1, Sampling::PerElement).unwrap();
        let cell = build_unit_cell(&CellParams::straight([0.2, 0.2], 10)).unwrap();
        let mat = MaterialParams {
            mu: [1.0; 3],
            permeability: [Mat2::identity(); 3],
            eps: 0.1,
            permeability_update: PermeabilityUpdate::Constant,
        };
        let st = TwoScaleState::new(dom, cell, mat).unwrap();
        let text = to_json(&st).unwrap();
        assert_eq!(from_json(&text).unwrap(), st);
        let wrong = text.replacen("\"version\":1", "\"version\":99", 1);
        assert!(from_json(&wrong).is_err());
    }
}
