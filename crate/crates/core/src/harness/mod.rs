//! Experiment orchestration: spec strings, configuration, sweeps, the
//! invariant suite and construction files.

pub mod config;
pub mod oracle;
pub mod spec;
pub mod sweep;
pub mod verify;

use std::path::Path;

use crate::construction::NestedConstruction;
use crate::error::{Error, Result};

pub use config::{ExperimentConfig, Mode, PartialConfig};
pub use sweep::{run_bler_sweep, run_rd_sweep};
pub use verify::{verify, Fault, VerifyReport};

pub fn save_construction(path: &Path, c: &NestedConstruction) -> Result<()> {
    std::fs::write(path, c.to_text())?;
    Ok(())
}

pub fn load_construction(path: &Path) -> Result<NestedConstruction> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::CorruptFile("not utf-8".into()))?;
    NestedConstruction::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{construct, exact_params, CodeMode};
    use crate::dmc::{channel_test_channels, Dmc};

    #[test]
    fn construction_file_round_trip() {
        let w = Dmc::bsc(0.1).unwrap();
        let (ws, wc) = channel_test_channels(&[0.5, 0.5], &w).unwrap();
        let c =
            construct(&exact_params(&ws, 3).unwrap(), &exact_params(&wc, 3).unwrap(), CodeMode::Channel, 0.25, 0.0, 4)
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        save_construction(&path, &c).unwrap();
        let back = load_construction(&path).unwrap();
        assert_eq!(back.to_text(), c.to_text());
        assert_eq!(back.hash(), c.hash());

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_construction(&path), Err(Error::CorruptFile(_))));
        std::fs::write(&path, text.replacen("construction 1", "construction 9", 1)).unwrap();
        assert!(matches!(load_construction(&path), Err(Error::VersionMismatch { found: 9, .. })));
        assert!(matches!(load_construction(&dir.path().join("missing")), Err(Error::Io(_))));
    }
}
