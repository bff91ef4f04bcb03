#!/usr/bin/env python3
"""Regenerates src/unicode_tables.cpp from Python's unicodedata.

The emitted tables drive the NFC normalizer in src/unicode.cpp:
  * combining classes (nonzero only),
  * fully expanded canonical decompositions (Hangul excluded, it is algorithmic),
  * primary composites (canonical pairs that recompose under NFC).

Run from the repository root:  python3 scripts/gen_unicode_tables.py
"""

import sys
import unicodedata

HANGUL_S_BASE = 0xAC00
HANGUL_S_COUNT = 11172


def is_hangul_syllable(cp: int) -> bool:
    return HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT


def canonical_decomposition(cp: int):
    d = unicodedata.decomposition(chr(cp))
    if not d or d.startswith("<"):
        return None
    return [int(f, 16) for f in d.split()]


def full_decomposition(cp: int):
    out = []
    stack = [cp]
    while stack:
        c = stack.pop(0)
        d = canonical_decomposition(c)
        if d is None or is_hangul_syllable(c):
            out.append(c)
        else:
            stack = d + stack
    return out


def main():
    ccc_entries = []
    for cp in range(0x110000):
        c = unicodedata.combining(chr(cp))
        if c:
            ccc_entries.append((cp, c))

    decomp_entries = []
    pool = []
    for cp in range(0x110000):
        if is_hangul_syllable(cp):
            continue
        if canonical_decomposition(cp) is None:
            continue
        seq = full_decomposition(cp)
        decomp_entries.append((cp, len(pool), len(seq)))
        pool.extend(seq)

    # A pair (a, b) is a primary composite for c when c canonically decomposes
    # to exactly (a, b) and NFC recomposes it; the round trip through Python's
    # normalizer screens out every composition exclusion.
    compose_entries = []
    for cp in range(0x110000):
        if is_hangul_syllable(cp):
            continue
        d = canonical_decomposition(cp)
        if d is None or len(d) != 2:
            continue
        a, b = d
        if unicodedata.combining(chr(a)):
            continue
        if unicodedata.normalize("NFC", chr(a) + chr(b)) == chr(cp):
            compose_entries.append(((a << 32) | b, cp))
    compose_entries.sort()

    w = sys.stdout
    w.write("// Generated by scripts/gen_unicode_tables.py -- do not edit.\n")
    w.write(f"// Unicode data version {unicodedata.unidata_version}"
            f" (Python {sys.version.split()[0]} unicodedata).\n\n")
    w.write('#include "unicode_tables.hpp"\n\n')
    w.write("namespace memaudit::unicode_tables {\n\n")

    w.write(f"const CccEntry kCcc[{len(ccc_entries)}] = {{\n")
    for i in range(0, len(ccc_entries), 8):
        row = ", ".join(f"{{0x{cp:X}, {c}}}" for cp, c in ccc_entries[i:i + 8])
        w.write(f"    {row},\n")
    w.write("};\n")
    w.write(f"const std::size_t kCccCount = {len(ccc_entries)};\n\n")

    w.write(f"const char32_t kDecompPool[{len(pool)}] = {{\n")
    for i in range(0, len(pool), 10):
        row = ", ".join(f"0x{c:X}" for c in pool[i:i + 10])
        w.write(f"    {row},\n")
    w.write("};\n\n")

    w.write(f"const DecompEntry kDecomp[{len(decomp_entries)}] = {{\n")
    for i in range(0, len(decomp_entries), 6):
        row = ", ".join(f"{{0x{cp:X}, {off}, {n}}}" for cp, off, n in decomp_entries[i:i + 6])
        w.write(f"    {row},\n")
    w.write("};\n")
    w.write(f"const std::size_t kDecompCount = {len(decomp_entries)};\n\n")

    w.write(f"const ComposeEntry kCompose[{len(compose_entries)}] = {{\n")
    for i in range(0, len(compose_entries), 6):
        row = ", ".join(f"{{0x{key:X}ULL, 0x{cp:X}}}" for key, cp in compose_entries[i:i + 6])
        w.write(f"    {row},\n")
    w.write("};\n")
    w.write(f"const std::size_t kComposeCount = {len(compose_entries)};\n\n")

    w.write("}  // namespace memaudit::unicode_tables\n")


if __name__ == "__main__":
    main()
