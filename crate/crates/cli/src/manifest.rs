//! Batch manifest: a JSON array of items naming the image pair and any
//! optional ground-truth or fused files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestItem {
    pub reference: PathBuf,
    pub moving: PathBuf,
    /// Ground-truth affine (JSON), as emitted by `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<PathBuf>,
    /// Ground-truth deformation field (PFM), as emitted by `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PathBuf>,
    /// Fused image for fusion-quality metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fused: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct BatchManifest {
    pub items: Vec<ManifestItem>,
}

impl BatchManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read manifest {path:?}: {e}")))?;
        let items: Vec<ManifestItem> = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid manifest {path:?}: {e}")))?;
        if items.is_empty() {
            return Err(CliError::Usage(format!("manifest {path:?} is empty")));
        }
        // Resolve relative paths against the manifest's directory and check
        // existence up front, so a batch never starts half-runnable.
        let base = path.parent().unwrap_or(Path::new("."));
        let items = items
            .into_iter()
            .map(|mut item| {
                for p in [Some(&mut item.reference), Some(&mut item.moving)]
                    .into_iter()
                    .flatten()
                    .chain(item.theta.as_mut())
                    .chain(item.phi.as_mut())
                    .chain(item.fused.as_mut())
                {
                    if p.is_relative() {
                        *p = base.join(&p);
                    }
                    if !p.exists() {
                        return Err(CliError::Usage(format!(
                            "manifest path does not exist: {p:?}"
                        )));
                    }
                }
                Ok(item)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BatchManifest { items })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_is_usage_error() {
        let dir = std::env::temp_dir().join("warpfuse-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.json");
        std::fs::write(&path, "[]").unwrap();
        assert!(matches!(
            BatchManifest::load(&path),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn missing_paths_are_reported() {
        let dir = std::env::temp_dir().join("warpfuse-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("missing.json");
        std::fs::write(
            &path,
            r#"[{"reference": "no_such.pgm", "moving": "also_missing.pgm"}]"#,
        )
        .unwrap();
        assert!(matches!(
            BatchManifest::load(&path),
            Err(CliError::Usage(_))
        ));
    }
}
