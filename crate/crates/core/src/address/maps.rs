//! `/proc/<pid>/maps` parsing.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryRegion {
    pub start: u64,
    pub end: u64,
    /// Four characters: `r`/`-`, `w`/`-`, `x`/`-`, `p`/`s`.
    pub perms: String,
    pub file_offset: u64,
    /// `major:minor`, hex as printed by the kernel.
    pub device: String,
    pub inode: u64,
    /// Backing file or pseudo-name; empty for anonymous mappings.
    pub path: String,
}

impl MemoryRegion {
    pub fn is_executable(&self) -> bool {
        self.perms.as_bytes()[2] == b'x'
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed maps line {line_no}: {reason}")]
pub struct MalformedLine {
    pub line_no: usize,
    pub reason: String,
}

/// Parses maps text, one region per line in file order. Line numbers in
/// errors are 1-based.
pub fn parse_proc_maps(text: &str) -> Result<Vec<MemoryRegion>, MalformedLine> {
    text.lines()
        .enumerate()
        .map(|(i, line)| parse_line(line).map_err(|reason| MalformedLine { line_no: i + 1, reason: reason.into() }))
        .collect()
}

fn parse_line(line: &str) -> Result<MemoryRegion, &'static str> {
    let mut rest = line;
    let mut field = |what: &'static str| -> Result<&str, &'static str> {
        let trimmed = rest.trim_start_matches([' ', '\t']);
        let end = trimmed.find([' ', '\t']).unwrap_or(trimmed.len());
        if end == 0 {
            return Err(what);
        }
        let (tok, tail) = trimmed.split_at(end);
        rest = tail;
        Ok(tok)
    };

    let range = field("missing address range")?;
    let perms = field("missing permissions")?;
    let offset = field("missing offset")?;
    let device = field("missing device")?;
    let inode = field("missing inode")?;

    let (start, end) = range.split_once('-').ok_or("missing address range")?;
    let start = u64::from_str_radix(start, 16).map_err(|_| "bad start address")?;
    let end = u64::from_str_radix(end, 16).map_err(|_| "bad end address")?;
    if start >= end {
        return Err("start address not below end address");
    }
    if !valid_perms(perms) {
        return Err("bad permissions");
    }
    let file_offset = u64::from_str_radix(offset, 16).map_err(|_| "bad offset")?;
    match device.split_once(':') {
        Some((maj, min))
            if !maj.is_empty() && !min.is_empty() && maj.bytes().chain(min.bytes()).all(|b| b.is_ascii_hexdigit()) => {}
        _ => return Err("bad device"),
    }
    let inode = inode.parse().map_err(|_| "bad inode")?;

    Ok(MemoryRegion {
        start,
        end,
        perms: perms.to_string(),
        file_offset,
        device: device.to_string(),
        inode,
        path: rest.trim().to_string(),
    })
}

fn valid_perms(p: &str) -> bool {
    let b = p.as_bytes();
    b.len() == 4
        && matches!(b[0], b'r' | b'-')
        && matches!(b[1], b'w' | b'-')
        && matches!(b[2], b'x' | b'-')
        && matches!(b[3], b'p' | b's')
}

/// Base address of every `.oat` and `.so` image with an executable mapping:
/// the start of its lowest executable region.
pub fn executable_images(regions: &[MemoryRegion]) -> BTreeMap<String, u64> {
    let mut images = BTreeMap::new();
    for r in regions {
        if !r.is_executable() || !(r.path.ends_with(".oat") || r.path.ends_with(".so")) {
            continue;
        }
        images.entry(r.path.clone()).and_modify(|base: &mut u64| *base = (*base).min(r.start)).or_insert(r.start);
    }
    images
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOOT_OAT: &str = "7000000000-7000004000 r-xp 00000000 fd:00 1234 /system/framework/arm64/boot.oat";

    #[test]
    fn parses_oat_line() {
        let r = &parse_proc_maps(BOOT_OAT).unwrap()[0];
        assert_eq!(r.start, 0x70_0000_0000);
        assert_eq!(r.end, 0x70_0000_4000);
        assert_eq!(r.perms, "r-xp");
        assert_eq!(r.file_offset, 0);
        assert_eq!(r.device, "fd:00");
        assert_eq!(r.inode, 1234);
        assert_eq!(r.path, "/system/framework/arm64/boot.oat");
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_proc_maps("").unwrap(), vec![]);
    }

    #[test]
    fn malformed_lines() {
        let err = parse_proc_maps("r-xp 00000000 fd:00 1234 /x.so").unwrap_err();
        assert_eq!(err.line_no, 1);
        let err = parse_proc_maps(&format!("{BOOT_OAT}\n7000-6000 r-xp 0 fd:00 1 /a.so")).unwrap_err();
        assert_eq!(err.line_no, 2);
        assert!(parse_proc_maps("1000-2000 rwxq 0 fd:00 1").is_err());
        assert!(parse_proc_maps("1000-2000 r-xp 0 fd00 1").is_err());
        assert!(parse_proc_maps("1000-2000 r-xp 0 fd:00").is_err());
        assert!(parse_proc_maps("1000-2000 r-xp 0 fd:00 12a").is_err());
    }

    #[test]
    fn paths_with_spaces_and_anonymous_regions() {
        let text = "12c00000-52c00000 rw-p 00000000 00:00 0   [anon:dalvik-main space (region space)]\n\
                    7b41000000-7b41001000 ---p 00000000 00:00 0 ";
        let regions = parse_proc_maps(text).unwrap();
        assert_eq!(regions[0].path, "[anon:dalvik-main space (region space)]");
        assert_eq!(regions[1].path, "");
    }

    #[test]
    fn base_is_lowest_executable_region() {
        let text = "1000-2000 r--p 00000000 07:08 9 /system/lib64/libx.so\n\
                    3000-5000 r-xp 00002000 07:08 9 /system/lib64/libx.so\n\
                    8000-9000 r-xp 00007000 07:08 9 /system/lib64/libx.so\n\
                    a000-b000 r-xp 00000000 00:05 3 /dev/ashmem\n\
                    c000-d000 r--p 00000000 fd:03 4 /system/framework/arm64/boot.oat";
        let images = executable_images(&parse_proc_maps(text).unwrap());
        assert_eq!(images.len(), 1);
        assert_eq!(images["/system/lib64/libx.so"], 0x3000);
    }

    #[test]
    fn single_oat_region() {
        let images = executable_images(&parse_proc_maps(BOOT_OAT).unwrap());
        assert_eq!(images["/system/framework/arm64/boot.oat"], 0x70_0000_0000);
    }
}
