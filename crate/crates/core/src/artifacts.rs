//! System artifacts pulled from a device (zygote64 maps, oatdump listings,
//! shared libraries) and the resolution step built on them.
//!
//! A directory of artifacts looks like:
//!
//! ```text
//! maps.txt          /proc/<zygote64 pid>/maps
//! oatdump/*.txt     one oatdump listing per boot image
//! libs/*.so         copies of the mapped libraries, by basename
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::address::{
    executable_images, oatdump_location, parse_oatdump, parse_proc_maps, resolve_probes, DirSymbolReader,
    MalformedLine, MemorySymbolReader, OatImage, OatdumpError, Resolution, SymbolReader,
};
use crate::config::HooksConfig;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Maps { path: PathBuf, source: MalformedLine },
    #[error("{path}: {source}")]
    Oatdump { path: PathBuf, source: OatdumpError },
    #[error("{0}: no LOCATION block naming the oat file")]
    NoLocation(PathBuf),
}

pub struct Artifacts {
    pub maps: String,
    /// `(source name, listing text)` pairs.
    pub oatdumps: Vec<(String, String)>,
    pub symbols: Box<dyn SymbolReader>,
}

mod bundled {
    pub const MAPS: &str = include_str!("../fixtures/zygote64/maps.txt");
    pub const OATDUMPS: [(&str, &str); 2] = [
        ("boot.oat.txt", include_str!("../fixtures/zygote64/oatdump/boot.oat.txt")),
        ("boot-framework.oat.txt", include_str!("../fixtures/zygote64/oatdump/boot-framework.oat.txt")),
    ];
    pub const LIBS: [(&str, &[u8]); 4] = [
        ("libc.so", include_bytes!("../fixtures/zygote64/libs/libc.so")),
        ("libdl.so", include_bytes!("../fixtures/zygote64/libs/libdl.so")),
        ("libbinder_ndk.so", include_bytes!("../fixtures/zygote64/libs/libbinder_ndk.so")),
        ("libcamera2ndk.so", include_bytes!("../fixtures/zygote64/libs/libcamera2ndk.so")),
    ];
}

fn io_error(path: &Path, e: std::io::Error) -> ArtifactError {
    ArtifactError::Io { path: path.to_path_buf(), message: e.to_string() }
}

impl Artifacts {
    /// The zygote64 fixture set compiled into the library.
    pub fn bundled() -> Artifacts {
        let mut symbols = MemorySymbolReader::new();
        for (name, image) in bundled::LIBS {
            symbols.insert(name, image.to_vec());
        }
        Artifacts {
            maps: bundled::MAPS.to_string(),
            oatdumps: bundled::OATDUMPS.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
            symbols: Box::new(symbols),
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Artifacts, ArtifactError> {
        let maps_path = dir.join("maps.txt");
        let maps = fs::read_to_string(&maps_path).map_err(|e| io_error(&maps_path, e))?;
        let oat_dir = dir.join("oatdump");
        let mut names: Vec<PathBuf> = match fs::read_dir(&oat_dir) {
            Ok(entries) => {
                entries.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>().map_err(|e| io_error(&oat_dir, e))?
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_error(&oat_dir, e)),
        };
        names.retain(|p| p.extension().is_some_and(|x| x == "txt"));
        names.sort();
        let mut oatdumps = Vec::new();
        for p in names {
            let text = fs::read_to_string(&p).map_err(|e| io_error(&p, e))?;
            oatdumps.push((p.display().to_string(), text));
        }
        Ok(Artifacts { maps, oatdumps, symbols: Box::new(DirSymbolReader::new(dir.join("libs"))) })
    }

    pub fn oat_images(&self) -> Result<Vec<OatImage>, ArtifactError> {
        self.oatdumps
            .iter()
            .map(|(name, text)| {
                let path = oatdump_location(text).ok_or_else(|| ArtifactError::NoLocation(name.into()))?;
                let methods =
                    parse_oatdump(text).map_err(|source| ArtifactError::Oatdump { path: name.into(), source })?;
                Ok(OatImage { path, methods })
            })
            .collect()
    }

    /// Resolves every API and native hook in `config`.
    pub fn resolve(&self, config: &HooksConfig) -> Result<Resolution, ArtifactError> {
        let regions =
            parse_proc_maps(&self.maps).map_err(|source| ArtifactError::Maps { path: "maps.txt".into(), source })?;
        let images = executable_images(&regions);
        Ok(resolve_probes(config, &images, &self.oat_images()?, self.symbols.as_ref()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::ResolveError;
    use crate::config::default_multilayer_config;
    use crate::source::UserProbeTargets;

    #[test]
    fn bundled_default_config_resolves_cleanly() {
        let r = Artifacts::bundled().resolve(&default_multilayer_config()).unwrap();
        assert!(r.issues.is_empty(), "{:?}", r.issues);
        assert_eq!(r.probes.len(), 54);
        let targets = UserProbeTargets::bundled();
        assert_eq!(r.map.get(targets.libc_open).unwrap().display_name(), "libc.so!open");
        assert_eq!(r.map.get(targets.open_dex_file).unwrap().display_name(), "dalvik.system.DexFile.openDexFile");
    }

    #[test]
    fn fixture_directory_matches_bundled() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/zygote64");
        let cfg = default_multilayer_config();
        let a = Artifacts::from_dir(&dir).unwrap().resolve(&cfg).unwrap();
        let b = Artifacts::bundled().resolve(&cfg).unwrap();
        assert_eq!(a.map, b.map);
        assert!(Artifacts::from_dir(&dir.join("nope")).is_err());
    }

    #[test]
    fn shared_compiled_code_is_a_collision() {
        use crate::config::{FilterSpec, HookSpec};
        let cfg = HooksConfig {
            hooks: vec![
                HookSpec::api("android.app.Service", "onCreate"),
                HookSpec::api("android.app.Service", "onDestroy"),
            ],
            filter: FilterSpec::none(),
        };
        let r = Artifacts::bundled().resolve(&cfg).unwrap();
        assert!(matches!(r.issues.as_slice(), [ResolveError::AddressCollision { .. }]));
    }
}
