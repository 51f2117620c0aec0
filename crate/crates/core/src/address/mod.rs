//! Attach-point resolution: memory maps, oatdump listings and ELF symbols.

pub mod elf;
pub mod maps;
pub mod oatdump;
pub mod resolve;

pub use crate::event::{decode_arg_types, encode_arg_types};
pub use elf::{read_symbol_offset, DirSymbolReader, MemorySymbolReader, SymbolError, SymbolReader, SymbolRecord};
pub use maps::{executable_images, parse_proc_maps, MalformedLine, MemoryRegion};
pub use oatdump::{oatdump_location, parse_oatdump, OatMethodRecord, OatdumpError};
pub use resolve::{
    resolve_probes, AddressEntry, AddressMap, OatImage, ProbeKind, Resolution, ResolveError, ResolvedProbe,
    UnresolvedReason,
};
