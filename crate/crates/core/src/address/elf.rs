//! Dynamic symbol lookup in shared objects.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use object::elf::PF_X;
use object::{Object, ObjectSegment, ObjectSymbol, SegmentFlags};
use thiserror::Error;

const PAGE_SIZE: u64 = 0x1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolRecord {
    pub symbol_name: String,
    /// Offset from the start of the library's executable mapping.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("not an ELF image")]
    NotAnElf,
    #[error("symbol not found: {0}")]
    SymbolNotFound(String),
    #[error("symbol {0} is not inside an executable segment")]
    NotExecutable(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Looks `symbol_name` up in the dynamic symbol table and converts its
/// virtual address into an offset within the executable mapping, the
/// mapping whose start `executable_images` reports as the image base.
pub fn read_symbol_offset(library_image: &[u8], symbol_name: &str) -> Result<SymbolRecord, SymbolError> {
    // ELF structures are read in place and must be 8-byte aligned
    let mut copy = Vec::new();
    let image = if library_image.as_ptr().align_offset(8) == 0 {
        library_image
    } else {
        copy.resize(library_image.len() + 8, 0);
        let start = copy.as_ptr().align_offset(8);
        copy[start..start + library_image.len()].copy_from_slice(library_image);
        &copy[start..start + library_image.len()]
    };
    let file = object::File::parse(image).map_err(|_| SymbolError::NotAnElf)?;
    if file.format() != object::BinaryFormat::Elf {
        return Err(SymbolError::NotAnElf);
    }
    let value = file
        .dynamic_symbols()
        .find(|s| s.is_definition() && s.name_bytes().ok() == Some(symbol_name.as_bytes()))
        .map(|s| s.address())
        .ok_or_else(|| SymbolError::SymbolNotFound(symbol_name.to_string()))?;

    let segment = file
        .segments()
        .find(|seg| {
            let executable = matches!(seg.flags(), SegmentFlags::Elf { p_flags } if p_flags & PF_X != 0);
            executable && value >= seg.address() && value < seg.address() + seg.size()
        })
        .ok_or_else(|| SymbolError::NotExecutable(symbol_name.to_string()))?;

    let mapping_start = segment.address() & !(PAGE_SIZE - 1);
    let offset = value - mapping_start;
    if offset == 0 {
        return Err(SymbolError::NotExecutable(symbol_name.to_string()));
    }
    Ok(SymbolRecord { symbol_name: symbol_name.to_string(), offset })
}

/// Source of library images for symbol resolution, keyed by the path the
/// library is mapped at.
pub trait SymbolReader {
    fn symbol_offset(&self, library_path: &str, symbol: &str) -> Result<SymbolRecord, SymbolError>;
}

/// Reads libraries from a local directory holding copies named by their
/// basename, e.g. `libs/libc.so` for `/apex/.../bionic/libc.so`.
#[derive(Debug, Clone)]
pub struct DirSymbolReader {
    root: PathBuf,
}

impl DirSymbolReader {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirSymbolReader { root: root.into() }
    }
}

impl SymbolReader for DirSymbolReader {
    fn symbol_offset(&self, library_path: &str, symbol: &str) -> Result<SymbolRecord, SymbolError> {
        let file = self.root.join(basename(library_path));
        let image = fs::read(&file)
            .map_err(|e| SymbolError::Io { path: file.display().to_string(), message: e.to_string() })?;
        read_symbol_offset(&image, symbol)
    }
}

/// In-memory library images keyed by basename.
#[derive(Debug, Clone, Default)]
pub struct MemorySymbolReader {
    images: HashMap<String, Vec<u8>>,
}

impl MemorySymbolReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, image: Vec<u8>) {
        self.images.insert(basename(name).to_string(), image);
    }
}

impl SymbolReader for MemorySymbolReader {
    fn symbol_offset(&self, library_path: &str, symbol: &str) -> Result<SymbolRecord, SymbolError> {
        let name = basename(library_path);
        let image = self.images.get(name).ok_or_else(|| SymbolError::Io {
            path: library_path.to_string(),
            message: "no such library image".into(),
        })?;
        read_symbol_offset(image, symbol)
    }
}

pub(crate) fn basename(path: &str) -> &str {
    Path::new(path).file_name().and_then(|n| n.to_str()).unwrap_or(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIBC: &[u8] = include_bytes!("../../fixtures/zygote64/libs/libc.so");

    #[test]
    fn finds_open() {
        assert_eq!(
            read_symbol_offset(LIBC, "open").unwrap(),
            SymbolRecord { symbol_name: "open".into(), offset: 0x1f40 }
        );
    }

    #[test]
    fn missing_and_undefined_symbols() {
        assert_eq!(read_symbol_offset(LIBC, "no_such_fn"), Err(SymbolError::SymbolNotFound("no_such_fn".into())));
        // imported, not defined here
        assert_eq!(
            read_symbol_offset(LIBC, "__cxa_finalize"),
            Err(SymbolError::SymbolNotFound("__cxa_finalize".into()))
        );
    }

    #[test]
    fn garbage_is_not_an_elf() {
        assert_eq!(read_symbol_offset(&[0xde, 0xad, 0xbe, 0xef], "open"), Err(SymbolError::NotAnElf));
        assert_eq!(read_symbol_offset(&[], "open"), Err(SymbolError::NotAnElf));
    }

    #[test]
    fn memory_reader_uses_basename() {
        let mut r = MemorySymbolReader::new();
        r.insert("libc.so", LIBC.to_vec());
        let rec = r.symbol_offset("/apex/com.android.runtime/lib64/bionic/libc.so", "openat").unwrap();
        assert_eq!(rec.offset, 0xe80);
        assert!(matches!(r.symbol_offset("/system/lib64/libm.so", "sin"), Err(SymbolError::Io { .. })));
    }
}
