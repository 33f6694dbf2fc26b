#!/usr/bin/env python3
"""Capture encoder golden bytes from GNU as.

Each case is encoded by nml and its listing is assembled by ``as``; the
bytes recorded are the assembler's, never ours.  Run after a deliberate
change to the encoder or the native pipeline, then review the diff.
"""
from __future__ import annotations

import argparse
import json
import re
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests" / "golden"))

from cases import FUNCTIONS, INSTRUCTIONS, assemble_case  # noqa: E402

from nml.toplevel.session import Session, SessionConfig  # noqa: E402

KINDS = {"R_X86_64_64": "Abs64", "R_X86_64_PLT32": "Rel32", "R_X86_64_PC32": "Rel32"}


def gnu_as(listing: str) -> tuple[bytes, list]:
    """Assemble ``listing``; returns .text bytes and [(offset, kind)] relocations."""
    with tempfile.TemporaryDirectory() as d:
        src, obj, binf = Path(d, "x.s"), Path(d, "x.o"), Path(d, "x.bin")
        src.write_text("\t.intel_syntax noprefix\n" + listing)
        subprocess.run(["as", "--64", "-o", str(obj), str(src)], check=True)
        subprocess.run(["objcopy", "-O", "binary", "--only-section=.text", str(obj), str(binf)],
                       check=True)
        dump = subprocess.run(["objdump", "-r", "-j", ".text", str(obj)], check=True,
                              capture_output=True, text=True).stdout
        relocs = []
        for line in dump.splitlines():
            mo = re.match(r"([0-9a-f]{16}) (R_X86_64_\w+)", line)
            if mo:
                relocs.append((int(mo.group(1), 16), KINDS[mo.group(2)]))
        return binf.read_bytes(), sorted(relocs)


def phrase_object(src: str):
    s = Session(SessionConfig(keep_objects=True, emit_asm=True))
    try:
        r = s.eval(src)
        if r.status != "ok":
            raise SystemExit(f"phrase failed: {src}\n{r.text}")
        return s.linked[-1][0]
    finally:
        s.close()


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "tests" / "golden" / "x86_encodings.json"))
    args = ap.parse_args()
    instrs = []
    for name, method, ops in INSTRUCTIONS:
        listing = assemble_case(method, ops).listing()
        code, _ = gnu_as(listing)
        instrs.append({"name": name, "method": method, "args": ops,
                       "asm": listing.strip(), "bytes": code.hex()})
    fns = []
    for name, src in FUNCTIONS:
        obj = phrase_object(src)
        text_listing = obj.listing.split("\t.data")[0]
        # nml exports every function, so calls between them stay relocations
        exported = re.findall(r"^(nml_\S+):", text_listing, re.M)
        text_listing = "".join(f"\t.globl {n}\n" for n in exported) + text_listing
        code, relocs = gnu_as(text_listing)
        fns.append({"name": name, "source": src, "bytes": code.hex(),
                    "relocs": [[off, kind] for off, kind in relocs]})
    Path(args.out).write_text(json.dumps({"instructions": instrs, "functions": fns}, indent=1) + "\n")
    print(f"wrote {len(instrs)} instructions and {len(fns)} functions to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
