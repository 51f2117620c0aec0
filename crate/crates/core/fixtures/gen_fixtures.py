#!/usr/bin/env python3
"""Regenerates the zygote64 address-resolution fixtures.

Writes a zygote64-style maps file, two oatdump excerpts, four tiny AArch64
ELF shared objects, and expected_addresses.tsv. The expected table is
computed here from the maps layout plus symbol offsets read back with
`readelf` (binutils), independent of the Rust resolver.
"""
import os
import re
import struct
import subprocess

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "zygote64")

BOOT_OAT = "/system/framework/arm64/boot.oat"
FRAMEWORK_OAT = "/system/framework/arm64/boot-framework.oat"

LIBS = {
    # maps path -> (r--p start, r-xp start, {symbol: st_value}, [undefined])
    "/apex/com.android.runtime/lib64/bionic/libc.so": (
        0x7B2C4A0000, 0x7B2C4A1000,
        {"read": 0x19C0, "write": 0x1A10, "openat": 0x1E80, "open": 0x2F40},
        ["__cxa_finalize"],
    ),
    "/apex/com.android.runtime/lib64/bionic/libdl.so": (
        0x7B2D100000, 0x7B2D101000,
        {"dlopen": 0x1100, "dlsym": 0x1180, "dlclose": 0x1200},
        [],
    ),
    "/system/lib64/libbinder_ndk.so": (
        0x7B30020000, 0x7B30021000,
        {"AIBinder_Class_define": 0x1B00, "AIBinder_new": 0x1C30},
        [],
    ),
    "/system/lib64/libcamera2ndk.so": (
        0x7B31E40000, 0x7B31E41000,
        {"ACameraManager_create": 0x2100, "ACameraManager_openCamera": 0x24D0},
        [],
    ),
}

# (oat path, class, return, method, params, code_offset)
METHODS = [
    # boot.oat: core libraries
    (BOOT_OAT, "dalvik.system.BaseDexClassLoader", "java.lang.Class", "findClass", ["java.lang.String"], 0x0001F3A0),
    (BOOT_OAT, "dalvik.system.BaseDexClassLoader", "java.net.URL", "findResource", ["java.lang.String"], 0x0001F5C0),
    (BOOT_OAT, "dalvik.system.BaseDexClassLoader", "java.util.Enumeration", "findResources", ["java.lang.String"], 0x0001F6E0),
    (BOOT_OAT, "dalvik.system.BaseDexClassLoader", "java.lang.String", "findLibrary", ["java.lang.String"], 0x0001F7F0),
    (BOOT_OAT, "dalvik.system.DexFile", "java.lang.Object", "openDexFile",
     ["java.lang.String", "java.lang.String", "int", "java.lang.ClassLoader", "dalvik.system.DexPathList$Element[]"], 0x00024B10),
    (BOOT_OAT, "java.lang.ClassLoader", "java.lang.Class", "loadClass", ["java.lang.String"], 0x0003A1C0),
    (BOOT_OAT, "java.lang.ClassLoader", "java.lang.Class", "loadClass", ["java.lang.String", "boolean"], 0x00000000),
    (BOOT_OAT, "java.lang.Thread", "void", "sleep", ["long"], 0x00051E40),
    (BOOT_OAT, "java.lang.reflect.Method", "java.lang.Object", "invoke", ["java.lang.Object", "java.lang.Object[]"], 0x00063A00),
    (BOOT_OAT, "java.lang.reflect.Proxy", "java.lang.Object", "newProxyInstance",
     ["java.lang.ClassLoader", "java.lang.Class[]", "java.lang.reflect.InvocationHandler"], 0x00064C80),
    # boot-framework.oat
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "void", "<init>", ["android.content.Context"], 0x00049F00),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "java.lang.String", "getImei", [], 0x0004A010),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "java.lang.String", "getSubscriberId", [], 0x0004A0B0),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "java.lang.String", "getLine1Number", [], 0x0004A150),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "java.lang.String", "getNetworkOperatorName", [], 0x0004A1D0),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "java.lang.String", "getNetworkCountryIso", [], 0x0004A240),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "void", "listen", ["android.telephony.PhoneStateListener", "int"], 0x0004A2C0),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "android.telephony.CellLocation", "getCellLocation", [], 0x0004A3A0),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "java.util.List", "getAllCellInfo", [], 0x0004A460),
    (FRAMEWORK_OAT, "android.telephony.TelephonyManager", "java.lang.String", "getDeviceId", [], 0x00000000),
    (FRAMEWORK_OAT, "android.os.Debug", "boolean", "isDebuggerConnected", [], 0x000812A0),
    (FRAMEWORK_OAT, "android.app.SharedPreferencesImpl$EditorImpl", "android.content.SharedPreferences$Editor", "putString", ["java.lang.String", "java.lang.String"], 0x000A0100),
    (FRAMEWORK_OAT, "android.app.SharedPreferencesImpl$EditorImpl", "android.content.SharedPreferences$Editor", "putBoolean", ["java.lang.String", "boolean"], 0x000A01C0),
    (FRAMEWORK_OAT, "android.app.SharedPreferencesImpl$EditorImpl", "android.content.SharedPreferences$Editor", "putInt", ["java.lang.String", "int"], 0x000A0280),
    (FRAMEWORK_OAT, "android.app.SharedPreferencesImpl$EditorImpl", "android.content.SharedPreferences$Editor", "putLong", ["java.lang.String", "long"], 0x000A0340),
    (FRAMEWORK_OAT, "android.app.SharedPreferencesImpl$EditorImpl", "android.content.SharedPreferences$Editor", "putFloat", ["java.lang.String", "float"], 0x000A0400),
    (FRAMEWORK_OAT, "android.app.ActivityThread", "void", "handleReceiver", ["android.app.ActivityThread$ReceiverData"], 0x000B7A40),
    (FRAMEWORK_OAT, "android.app.ApplicationPackageManager", "void", "setComponentEnabledSetting", ["android.content.ComponentName", "int", "int"], 0x000C3E00),
    (FRAMEWORK_OAT, "android.app.ApplicationPackageManager", "java.util.List", "getInstalledPackages", ["int"], 0x000C4120),
    (FRAMEWORK_OAT, "android.app.NotificationManager", "void", "notify", ["int", "android.app.Notification"], 0x000D0560),
    (FRAMEWORK_OAT, "android.util.Base64", "byte[]", "decode", ["java.lang.String", "int"], 0x000E2200),
    (FRAMEWORK_OAT, "android.util.Base64", "byte[]", "decode", ["byte[]", "int", "int", "int"], 0x00000000),
    (FRAMEWORK_OAT, "android.util.Base64", "byte[]", "encode", ["byte[]", "int"], 0x000E2380),
    (FRAMEWORK_OAT, "android.util.Base64", "java.lang.String", "encodeToString", ["byte[]", "int"], 0x000E2440),
    (FRAMEWORK_OAT, "android.content.ContentResolver", "android.database.Cursor", "query",
     ["android.net.Uri", "java.lang.String[]", "java.lang.String", "java.lang.String[]", "java.lang.String"], 0x000F1000),
    (FRAMEWORK_OAT, "android.content.ContentResolver", "void", "registerContentObserver",
     ["android.net.Uri", "boolean", "android.database.ContentObserver"], 0x000F1240),
    (FRAMEWORK_OAT, "android.content.ContentResolver", "android.net.Uri", "insert", ["android.net.Uri", "android.content.ContentValues"], 0x000F1380),
    (FRAMEWORK_OAT, "android.content.ContentResolver", "int", "delete", ["android.net.Uri", "java.lang.String", "java.lang.String[]"], 0x000F1500),
    (FRAMEWORK_OAT, "android.accounts.AccountManager", "android.accounts.Account[]", "getAccountsByType", ["java.lang.String"], 0x00102A00),
    (FRAMEWORK_OAT, "android.accounts.AccountManager", "android.accounts.Account[]", "getAccounts", [], 0x00102B40),
    (FRAMEWORK_OAT, "android.location.Location", "double", "getLatitude", [], 0x00110010),
    (FRAMEWORK_OAT, "android.location.Location", "double", "getLongitude", [], 0x00110030),
    (FRAMEWORK_OAT, "android.media.MediaRecorder", "void", "start", [], 0x0011C7E0),
    (FRAMEWORK_OAT, "android.app.ActivityManager", "java.util.List", "getRunningAppProcesses", [], 0x00127300),
    (FRAMEWORK_OAT, "android.app.ActivityManager", "java.util.List", "getRunningTasks", ["int"], 0x00127420),
    (FRAMEWORK_OAT, "android.content.ContextWrapper", "android.content.ComponentName", "startService", ["android.content.Intent"], 0x00131900),
    (FRAMEWORK_OAT, "android.content.ContextWrapper", "void", "startActivity", ["android.content.Intent"], 0x001319A0),
    (FRAMEWORK_OAT, "android.view.View", "void", "setOnClickListener", ["android.view.View$OnClickListener"], 0x0014E0C0),
    (FRAMEWORK_OAT, "android.os.PowerManager", "android.os.PowerManager$WakeLock", "newWakeLock", ["int", "java.lang.String"], 0x00159B60),
    (FRAMEWORK_OAT, "android.view.WindowManager", "void", "addView", ["android.view.View", "android.view.ViewGroup$LayoutParams"], 0x00163F20),
    (FRAMEWORK_OAT, "android.content.res.AssetManager", "java.io.InputStream", "open", ["java.lang.String"], 0x0016A400),
    (FRAMEWORK_OAT, "android.content.res.AssetManager", "android.content.res.AssetFileDescriptor", "openNonAssetFd", ["java.lang.String"], 0x0016A6A0),
    (FRAMEWORK_OAT, "android.app.ContextImpl", "java.lang.Object", "getSystemService", ["java.lang.String"], 0x00171C40),
    (FRAMEWORK_OAT, "android.app.usage.UsageStatsManager", "java.util.List", "queryUsageStats", ["int", "long", "long"], 0x0017E880),
    # two empty methods folded onto one compiled stub
    (FRAMEWORK_OAT, "android.app.Service", "void", "onCreate", [], 0x00185D00),
    (FRAMEWORK_OAT, "android.app.Service", "void", "onDestroy", [], 0x00185D00),
]

OAT_REGIONS = {
    # path -> (r--p start, r--p end, r-xp start, r-xp end, r-xp file offset, inode)
    BOOT_OAT: (0x70A1F000, 0x70C55000, 0x70C55000, 0x7113B000, 0x00236000, 1523),
    FRAMEWORK_OAT: (0x71200000, 0x71A00000, 0x71A00000, 0x73000000, 0x00800000, 1549),
}

PRIMS = {"boolean": "Z", "byte": "B", "char": "C", "short": "S", "int": "I",
         "long": "J", "float": "F", "double": "D", "void": "V"}


def descriptor(t):
    dims = 0
    while t.endswith("[]"):
        dims += 1
        t = t[:-2]
    base = PRIMS.get(t) or "L" + t.replace(".", "/") + ";"
    return "[" * dims + base


def write_maps():
    rows = [
        "5a1c3f4000-5a1c3f6000 r--p 00000000 fd:03 352         /system/bin/app_process64",
        "5a1c3f6000-5a1c3fa000 r-xp 00002000 fd:03 352         /system/bin/app_process64",
        "5a1c3fa000-5a1c3fc000 r--p 00006000 fd:03 352         /system/bin/app_process64",
        "12c00000-52c00000 rw-p 00000000 00:00 0              [anon:dalvik-main space (region space)]",
        "6f6c9000-6f9a4000 rw-p 00000000 00:00 0              [anon:dalvik-/system/framework/boot.art]",
    ]
    for path, (ro_s, ro_e, x_s, x_e, x_off, ino) in OAT_REGIONS.items():
        rows.append(f"{ro_s:08x}-{ro_e:08x} r--p 00000000 fd:03 {ino:<12d}/{path.lstrip('/')}")
        rows.append(f"{x_s:08x}-{x_e:08x} r-xp {x_off:08x} fd:03 {ino:<12d}/{path.lstrip('/')}")
        rows.append(f"{x_e:08x}-{x_e + 0x1000:08x} rw-p 00000000 00:00 0              [anon:.bss]")
    rows.append("73100000-73140000 r--s 00000000 fd:03 1550         /system/framework/boot-framework.vdex")
    ino = 2000
    for path, (ro, x, _syms, _und) in LIBS.items():
        ino += 17
        rows.append(f"{ro:010x}-{ro + 0x1000:010x} r--p 00000000 07:08 {ino:<12d}{path}")
        rows.append(f"{x:010x}-{x + 0x2000:010x} r-xp 00001000 07:08 {ino:<12d}{path}")
        rows.append(f"{x + 0x2000:010x}-{x + 0x3000:010x} r--p 00003000 07:08 {ino:<12d}{path}")
    rows += [
        "7b40000000-7b40200000 rw-s 00000000 00:05 10244      /dev/ashmem/dalvik-zygote space (deleted)",
        "7b41000000-7b41001000 ---p 00000000 00:00 0 ",
        "7fe3a9e000-7fe3abf000 rw-p 00000000 00:00 0          [stack]",
        "7fe3b7d000-7fe3b7e000 r-xp 00000000 00:00 0          [vdso]",
    ]
    with open(os.path.join(OUT, "maps.txt"), "w") as f:
        f.write("\n".join(rows) + "\n")


def write_oatdump(path, fname):
    out = ["MAGIC:", "oat", "183", "", "LOCATION:", path, "", "CHECKSUM:", "0x5e1f0c2a", "",
           "INSTRUCTION SET:", "Arm64", "", "OatDexFile:"]
    by_class = {}
    for (p, cls, ret, name, params, off) in METHODS:
        if p == path:
            by_class.setdefault(cls, []).append((ret, name, params, off))
    class_idx = 0
    dex_idx = 41000
    for cls, methods in by_class.items():
        compiled = all(m[3] for m in methods)
        status = "OatClassAllCompiled" if compiled else "OatClassSomeCompiled"
        out.append(f"{class_idx}: L{cls.replace('.', '/')}; (offset=0x{0x1200 + class_idx * 0x40:08x}) "
                   f"(type_idx={900 + class_idx}) (Initialized) ({status})")
        for i, (ret, name, params, off) in enumerate(methods):
            dex_idx += 7
            out.append(f"  {i}: {ret} {cls}.{name}({', '.join(params)}) (dex_method_idx={dex_idx})")
            out.append("    DEX CODE:")
            out.append("      0x0000: 1a00 3412                	| const-string v0, \"\" // string@4660")
            out.append("      0x0002: 1100                     	| return-object v0")
            out.append(f"    OatMethodOffsets (offset=0x{0x2000 + dex_idx:08x})")
            out.append(f"      code_offset: 0x{off:08x} ")
            if off:
                out.append(f"    OatQuickMethodHeader (offset=0x{off - 0x18:08x})")
                out.append(f"      vmap_table: (offset=0x{off - 0x20:08x})")
                out.append("        Optimized CodeInfo (number_of_dex_registers=3, number_of_stack_maps=1)")
                out.append("    QuickMethodFrameInfo")
                out.append("      frame_size_in_bytes: 32")
                out.append("      core_spill_mask: 0x40000000 (r30)")
                out.append("      fp_spill_mask: 0x00000000 ")
                out.append(f"    CODE: (code_offset=0x{off:08x} size=48)...")
                out.append(f"      0x{off:08x}: d1400bf0	sub x16, sp, #0x2000 (8192)")
                out.append(f"      0x{off + 4:08x}: b940021f	ldr wzr, [x16]")
            else:
                out.append("    OatQuickMethodHeader (offset=0x00000000)")
                out.append("    QuickMethodFrameInfo")
                out.append("      frame_size_in_bytes: 0")
                out.append("    CODE: (code_offset=0x00000000 size=0)")
                out.append("      NO CODE!")
        class_idx += 1
    with open(os.path.join(OUT, "oatdump", fname), "w") as f:
        f.write("\n".join(out) + "\n")


def elf_image(defined, undefined):
    strtab = b"\0"
    names = {}
    for n in list(undefined) + list(defined):
        names[n] = len(strtab)
        strtab += n.encode() + b"\0"
    syms = [struct.pack("<IBBHQQ", 0, 0, 0, 0, 0, 0)]
    for n in undefined:
        syms.append(struct.pack("<IBBHQQ", names[n], 0x12, 0, 0, 0, 0))
    for n, v in sorted(defined.items(), key=lambda kv: kv[1]):
        syms.append(struct.pack("<IBBHQQ", names[n], 0x12, 0, 3, v, 0x40))
    dynsym = b"".join(syms)
    dynsym_off = 0x40 + 2 * 56
    dynstr_off = dynsym_off + len(dynsym)
    ro_end = dynstr_off + len(strtab)
    text_off, text_size = 0x1000, 0x2000
    text = struct.pack("<I", 0xD503201F) * (text_size // 4)
    shstr = b"\0.dynsym\0.dynstr\0.text\0.shstrtab\0"
    shstr_off = text_off + text_size
    sh_off = (shstr_off + len(shstr) + 7) & ~7

    ehdr = struct.pack("<4sBBBBB7sHHIQQQIHHHHHH", b"\x7fELF", 2, 1, 1, 0, 0, b"\0" * 7,
                       3, 183, 1, 0, 0x40, sh_off, 0, 64, 56, 2, 64, 5, 4)
    ph = struct.pack("<IIQQQQQQ", 1, 4, 0, 0, 0, ro_end, ro_end, 0x1000)
    ph += struct.pack("<IIQQQQQQ", 1, 5, text_off, text_off, text_off, text_size, text_size, 0x1000)
    body = bytearray(ehdr + ph + dynsym + strtab)
    body += b"\0" * (text_off - len(body))
    body += text + shstr
    body += b"\0" * (sh_off - len(body))

    def sh(name, typ, flags, addr, off, size, link, info, align, entsize):
        return struct.pack("<IIQQQQIIQQ", name, typ, flags, addr, off, size, link, info, align, entsize)

    body += sh(0, 0, 0, 0, 0, 0, 0, 0, 0, 0)
    body += sh(shstr.index(b".dynsym"), 11, 2, dynsym_off, dynsym_off, len(dynsym), 2, 1, 8, 24)
    body += sh(shstr.index(b".dynstr"), 3, 2, dynstr_off, dynstr_off, len(strtab), 0, 0, 1, 0)
    body += sh(shstr.index(b".text"), 1, 6, text_off, text_off, text_size, 0, 0, 16, 0)
    body += sh(shstr.index(b".shstrtab"), 3, 0, 0, shstr_off, len(shstr), 0, 0, 1, 0)
    return bytes(body)


def readelf_offsets(path):
    """Symbol offsets relative to the executable PT_LOAD, as reported by readelf."""
    phdrs = subprocess.run(["readelf", "-lW", path], capture_output=True, text=True, check=True).stdout
    exec_vaddr = None
    for line in phdrs.splitlines():
        parts = line.split()
        if parts and parts[0] == "LOAD" and "E" in parts[6:-1]:
            exec_vaddr = int(parts[2], 16) & ~0xFFF
    syms = subprocess.run(["readelf", "--dyn-syms", "-W", path], capture_output=True, text=True, check=True).stdout
    out = {}
    for line in syms.splitlines():
        m = re.match(r"\s*\d+:\s+([0-9a-f]+)\s+\d+\s+FUNC\s+GLOBAL\s+DEFAULT\s+(\d+)\s+(\S+)", line)
        if m:
            out[m.group(3)] = int(m.group(1), 16) - exec_vaddr
    return out


def main():
    write_maps()
    write_oatdump(BOOT_OAT, "boot.oat.txt")
    write_oatdump(FRAMEWORK_OAT, "boot-framework.oat.txt")
    rows = ["# kind\tdisplay_name\timage\tbase\toffset\taddress"]
    seen = set()
    for (p, cls, _ret, name, _params, off) in METHODS:
        if off == 0 or cls == "android.app.Service":
            continue
        base = OAT_REGIONS[p][2]
        key = (cls, name)
        if key in seen:
            continue
        seen.add(key)
        rows.append(f"api\t{cls}.{name}\t{p}\t0x{base:x}\t0x{off:x}\t0x{base + off:x}")
    for path, (_ro, x, defined, undefined) in LIBS.items():
        lib = os.path.basename(path)
        fpath = os.path.join(OUT, "libs", lib)
        with open(fpath, "wb") as f:
            f.write(elf_image(defined, undefined))
        offsets = readelf_offsets(fpath)
        for sym in sorted(defined):
            rows.append(f"native\t{lib}!{sym}\t{path}\t0x{x:x}\t0x{offsets[sym]:x}\t0x{x + offsets[sym]:x}")
    with open(os.path.join(OUT, "expected_addresses.tsv"), "w") as f:
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
