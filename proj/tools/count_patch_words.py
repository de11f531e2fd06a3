#!/usr/bin/env python3
"""Count patch slot words in an assembly file without using the assembler.

Each patch-carrying instruction reserves k slot words (two groups for an
indirect call), and every function named in a .targets list gets one entry
group. Prints patch_words, baseline_code_bytes and code_size_overhead.
"""

import argparse
import math
import re
import sys

PRESET_PATCH_BITS = {
    # (mode ape: capacity bits, mode duplex: state width)
    "AEE": (168, 200),
    "IE": (16, 50),
    "AEE_LIGHT": (32, 64),
    "MICRO": (8, 50),
    "MICRO_N0": (18, 50),
}
ONE_GROUP = {"BPEQ", "BPNE", "BPLT", "BPGE", "JMPP", "CALLP", "XRET", "IRET"}
TWO_GROUPS = {"CALLRP"}
LABEL = re.compile(r"^\s*([A-Za-z_.$][\w.$]*)\s*:")


def count(text, k):
    in_data = False
    instr_words = 0
    groups = 0
    targets = set()
    for raw in text.splitlines():
        line = raw.split(";", 1)[0].strip()
        if line.lower().startswith(".targets"):
            rest = line[len(".targets"):]
            if ":" in rest:
                targets.update(f.strip() for f in rest.split(":", 1)[1].split(",") if f.strip())
            continue
        while True:
            m = LABEL.match(line)
            if not m:
                break
            line = line[m.end():].strip()
        if not line:
            continue
        head = line.split()[0].upper()
        if head == ".DATA":
            in_data = True
            continue
        if head == ".TEXT":
            in_data = False
            continue
        if head.startswith("."):
            if head == ".WORD" and not in_data:
                instr_words += len(line.split(None, 1)[1].split(","))
            elif head == ".ZERO" and not in_data:
                instr_words += (int(line.split()[1], 0) + 3) // 4
            elif head == ".ALIAS" and not in_data:
                instr_words += 1
            continue
        if in_data:
            continue
        instr_words += 1
        if head in ONE_GROUP:
            groups += 1
        elif head in TWO_GROUPS:
            groups += 2
    groups += len(targets)
    return groups * k, instr_words * 4


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("source")
    ap.add_argument("--preset", default="MICRO", choices=sorted(PRESET_PATCH_BITS))
    ap.add_argument("--mode", choices=["ape", "duplex"])
    ap.add_argument("--slot-words", type=int, help="override k")
    args = ap.parse_args()
    ape_bits, duplex_bits = PRESET_PATCH_BITS[args.preset]
    mode = args.mode or "ape"
    k = args.slot_words or math.ceil((ape_bits if mode == "ape" else duplex_bits) / 32)
    with open(args.source) as f:
        words, base = count(f.read(), k)
    print(f"patch_words={words}")
    print(f"baseline_code_bytes={base}")
    print(f"code_size_overhead={words * 4 / base if base else 0.0:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
