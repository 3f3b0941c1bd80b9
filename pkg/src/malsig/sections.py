"""Minimal PE and ELF section-table parsing.

Only section names, file ranges and flags are extracted - enough to slice
a binary into its sections for per-section descriptors.  Parsing never
reads outside the input buffer: every offset is bounds-checked, and a
malformed table yields the valid prefix of entries plus a warning instead
of an exception.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EmptyInput, UnknownFormat

log = logging.getLogger(__name__)

PE_EXECUTABLE_FLAGS = 0x20000020  # IMAGE_SCN_MEM_EXECUTE | IMAGE_SCN_CNT_CODE
ELF_SHF_EXECINSTR = 0x4
ELF_SHT_NULL = 0
ELF_SHT_NOBITS = 8


@dataclass(frozen=True)
class SectionInfo:
    name: str
    file_offset: int
    file_size: int
    flags: int
    executable: bool


def parse_sections(raw: bytes) -> list[SectionInfo]:
    """Parse the section table of a PE or ELF image.

    Raises UnknownFormat when neither magic matches, so callers can fall
    back to whole-binary processing.
    """
    if len(raw) >= 2 and raw[:2] == b"MZ":
        return _parse_pe(raw)
    if len(raw) >= 4 and raw[:4] == b"\x7fELF":
        return _parse_elf(raw)
    raise UnknownFormat("input is neither PE (MZ) nor ELF")


def _u16(raw, off):
    return struct.unpack_from("<H", raw, off)[0]


def _u32(raw, off):
    return struct.unpack_from("<I", raw, off)[0]


def _parse_pe(raw: bytes) -> list[SectionInfo]:
    if len(raw) < 0x40:
        log.warning("PE: file too short for the DOS header")
        return []
    pe_off = _u32(raw, 0x3C)
    if pe_off + 24 > len(raw) or raw[pe_off : pe_off + 4] != b"PE\x00\x00":
        log.warning("PE: missing or out-of-range PE signature")
        return []
    n_sections = _u16(raw, pe_off + 6)
    opt_size = _u16(raw, pe_off + 20)
    table = pe_off + 24 + opt_size

    sections: list[SectionInfo] = []
    for i in range(n_sections):
        entry = table + i * 40
        if entry + 40 > len(raw):
            log.warning("PE: section table truncated after %d of %d entries", i, n_sections)
            break
        name = raw[entry : entry + 8].rstrip(b"\x00").decode("utf-8", "replace")
        raw_size = _u32(raw, entry + 16)
        raw_ptr = _u32(raw, entry + 20)
        flags = _u32(raw, entry + 36)
        if raw_ptr + raw_size > len(raw):
            log.warning("PE: section %r range [%d, %d) exceeds the file; stopping",
                        name, raw_ptr, raw_ptr + raw_size)
            break
        sections.append(
            SectionInfo(
                name=name,
                file_offset=raw_ptr,
                file_size=raw_size,
                flags=flags,
                executable=bool(flags & PE_EXECUTABLE_FLAGS),
            )
        )
    return sections


def _parse_elf(raw: bytes) -> list[SectionInfo]:
    if len(raw) < 6:
        log.warning("ELF: file too short for the identification bytes")
        return []
    ei_class = raw[4]
    ei_data = raw[5]
    if ei_class not in (1, 2) or ei_data not in (1, 2):
        log.warning("ELF: unsupported class/endianness (%d, %d)", ei_class, ei_data)
        return []
    endian = "<" if ei_data == 1 else ">"
    is64 = ei_class == 2

    def read(fmt, off):
        size = struct.calcsize(endian + fmt)
        if off + size > len(raw):
            raise _Truncated()
        return struct.unpack_from(endian + fmt, raw, off)[0]

    try:
        if is64:
            shoff = read("Q", 0x28)
            shentsize = read("H", 0x3A)
            shnum = read("H", 0x3C)
            shstrndx = read("H", 0x3E)
            min_entry = 64
        else:
            shoff = read("I", 0x20)
            shentsize = read("H", 0x2E)
            shnum = read("H", 0x30)
            shstrndx = read("H", 0x32)
            min_entry = 40
    except _Truncated:
        log.warning("ELF: header truncated")
        return []
    if shentsize < min_entry:
        log.warning("ELF: section entry size %d below the minimum %d", shentsize, min_entry)
        return []

    def entry_fields(base):
        if is64:
            name_idx = read("I", base)
            sh_type = read("I", base + 4)
            flags = read("Q", base + 8)
            offset = read("Q", base + 24)
            size = read("Q", base + 32)
        else:
            name_idx = read("I", base)
            sh_type = read("I", base + 4)
            flags = read("I", base + 8)
            offset = read("I", base + 16)
            size = read("I", base + 20)
        return name_idx, sh_type, flags, offset, size

    # string table for section names, when shstrndx is usable
    strtab = b""
    if 0 < shstrndx < shnum:
        try:
            _, st_type, _, st_off, st_size = entry_fields(shoff + shstrndx * shentsize)
            if st_type != ELF_SHT_NOBITS and st_off + st_size <= len(raw):
                strtab = raw[st_off : st_off + st_size]
        except _Truncated:
            pass

    def name_at(idx):
        if idx >= len(strtab):
            return ""
        end = strtab.find(b"\x00", idx)
        if end < 0:
            end = len(strtab)
        return strtab[idx:end].decode("utf-8", "replace")

    sections: list[SectionInfo] = []
    for i in range(shnum):
        base = shoff + i * shentsize
        try:
            name_idx, sh_type, flags, offset, size = entry_fields(base)
        except _Truncated:
            log.warning("ELF: section table truncated after %d of %d entries", i, shnum)
            break
        if sh_type == ELF_SHT_NULL:
            continue
        file_size = 0 if sh_type == ELF_SHT_NOBITS else size
        if offset + file_size > len(raw):
            log.warning("ELF: section %d range [%d, %d) exceeds the file; stopping",
                        i, offset, offset + file_size)
            break
        sections.append(
            SectionInfo(
                name=name_at(name_idx),
                file_offset=offset,
                file_size=file_size,
                flags=flags,
                executable=bool(flags & ELF_SHF_EXECINSTR),
            )
        )
    return sections


class _Truncated(Exception):
    pass


def section_bytes(raw: bytes, section: SectionInfo) -> bytes:
    return raw[section.file_offset : section.file_offset + section.file_size]


def rank_sections(sections: list[SectionInfo], n: int = 2) -> list[SectionInfo]:
    """Pick the top-n sections most likely to hold code.

    Executable-flagged sections win, largest first; remaining slots fall
    back to the largest non-executable sections.  Ties break on file
    offset, then name, so the ranking is deterministic.
    """
    nonempty = [s for s in sections if s.file_size > 0]
    order = lambda s: (-s.file_size, s.file_offset, s.name)
    executable = sorted((s for s in nonempty if s.executable), key=order)
    others = sorted((s for s in nonempty if not s.executable), key=order)
    return (executable + others)[:n]


@dataclass
class SectionAwareDescriptor:
    whole: np.ndarray
    section1: np.ndarray | None
    section2: np.ndarray | None
    section_names: list[str]


def section_aware_descriptor(
    raw: bytes,
    describe: Callable[[bytes], np.ndarray] | None = None,
    rank: Callable[[list[SectionInfo]], list[SectionInfo]] = rank_sections,
) -> SectionAwareDescriptor:
    """Whole-binary descriptor plus descriptors of the top two sections.

    Unparseable or sectionless inputs fall back to the whole-binary
    descriptor alone; this never raises on malformed section tables.
    """
    if len(raw) == 0:
        raise EmptyInput("cannot describe an empty binary")
    if describe is None:
        from .features import GistConfig, describe_bytes

        config = GistConfig()
        describe = lambda b: describe_bytes(b, config)

    whole = describe(raw)
    try:
        sections = parse_sections(raw)
    except UnknownFormat:
        sections = []
    top = rank(sections)

    descs: list[np.ndarray | None] = [None, None]
    names: list[str] = []
    for i, sec in enumerate(top[:2]):
        blob = section_bytes(raw, sec)
        if blob:
            descs[i] = describe(blob)
            names.append(sec.name)
    return SectionAwareDescriptor(
        whole=whole, section1=descs[0], section2=descs[1], section_names=names
    )
