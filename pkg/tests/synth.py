"""Synthetic fixtures: minimal PE/ELF images and mutation-based corpora."""

from __future__ import annotations

import struct

import numpy as np

PE_TEXT_FLAGS = 0x60000020  # CODE | EXECUTE | READ
PE_DATA_FLAGS = 0xC0000040  # INITIALIZED_DATA | READ | WRITE
PE_RSRC_FLAGS = 0x40000040  # INITIALIZED_DATA | READ

ELF_FLAGS_EXEC = 0x2 | 0x4  # ALLOC | EXECINSTR
ELF_FLAGS_DATA = 0x2 | 0x1  # ALLOC | WRITE


def make_pe(sections: list[tuple[str, bytes, int]]) -> bytes:
    """Build a minimal parseable PE: DOS stub, COFF header, section table."""
    e_lfanew = 0x40
    dos = b"MZ" + b"\x00" * (0x3C - 2) + struct.pack("<I", e_lfanew)
    coff = struct.pack("<HHIIIHH", 0x8664, len(sections), 0, 0, 0, 0, 0)
    table_off = e_lfanew + 4 + 20
    data_off = table_off + 40 * len(sections)

    entries = b""
    blobs = b""
    for name, data, characteristics in sections:
        entries += struct.pack(
            "<8sIIIIIIHHI",
            name.encode("ascii")[:8].ljust(8, b"\x00"),
            len(data),  # VirtualSize
            0x1000,  # VirtualAddress
            len(data),  # SizeOfRawData
            data_off + len(blobs),  # PointerToRawData
            0,
            0,
            0,
            0,
            characteristics,
        )
        blobs += data
    return dos + b"PE\x00\x00" + coff + entries + blobs


def make_elf(sections: list[tuple[str, bytes, int]], with_names: bool = True) -> bytes:
    """Build a minimal 64-bit little-endian ELF with a section header table.

    With ``with_names`` a .shstrtab section is appended (so the table has
    len(sections) + 1 entries); without it sections are nameless.
    """
    ehsize = 0x40
    shentsize = 64

    names = [name for name, _, _ in sections]
    if with_names:
        names = names + [".shstrtab"]
    strtab = b"\x00"
    name_offsets = []
    for name in names:
        name_offsets.append(len(strtab))
        strtab += name.encode("ascii") + b"\x00"

    blobs = b""
    offsets = []
    for _, data, _ in sections:
        offsets.append(ehsize + len(blobs))
        blobs += data
    strtab_off = ehsize + len(blobs)
    shoff = strtab_off + (len(strtab) if with_names else 0)
    shnum = len(sections) + (1 if with_names else 0)
    shstrndx = len(sections) if with_names else 0

    def shdr(name_idx, sh_type, flags, offset, size):
        return struct.pack(
            "<IIQQQQIIQQ", name_idx, sh_type, flags, 0, offset, size, 0, 0, 1, 0
        )

    table = b""
    for i, (_, data, flags) in enumerate(sections):
        name_idx = name_offsets[i] if with_names else 0
        table += shdr(name_idx, 1, flags, offsets[i], len(data))  # SHT_PROGBITS
    if with_names:
        table += shdr(name_offsets[-1], 3, 0, strtab_off, len(strtab))  # SHT_STRTAB

    ehdr = (
        b"\x7fELF\x02\x01\x01" + b"\x00" * 9
        + struct.pack(
            "<HHIQQQIHHHHHH",
            2,  # e_type: EXEC
            0x3E,  # e_machine: x86-64
            1,
            0,  # e_entry
            0,  # e_phoff
            shoff,
            0,  # e_flags
            ehsize,
            0,
            0,
            shentsize,
            shnum,
            shstrndx,
        )
    )
    assert len(ehdr) == ehsize
    body = blobs + (strtab if with_names else b"")
    return ehdr + body + table


def variant_corpus(
    n_families: int = 5,
    per_family: int = 100,
    length: int = 4096,
    mutation_frac: float = 0.02,
    seed: int = 0,
) -> list[tuple[str, bytes, str]]:
    """Families of byte-signal variants: one random template per family,
    each variant mutating a small random subset of its bytes."""
    rng = np.random.default_rng(seed)
    samples = []
    n_mut = max(1, int(mutation_frac * length))
    for f in range(n_families):
        template = rng.integers(0, 256, length, dtype=np.uint8)
        for v in range(per_family):
            data = template.copy()
            pos = rng.choice(length, n_mut, replace=False)
            data[pos] = rng.integers(0, 256, n_mut, dtype=np.uint8)
            samples.append((f"fam{f}-{v:03d}", data.tobytes(), f"fam{f}"))
    return samples
