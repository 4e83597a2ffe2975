#!/usr/bin/env python3
"""Regenerate src/sobol_directions.inc from the Joe-Kuo (new-joe-kuo-6.21201)
direction numbers bundled with scipy."""
import os
import sys

import numpy as np
import scipy.stats

DIMS = int(sys.argv[1]) if len(sys.argv) > 1 else 256

path = os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz")
data = np.load(path)
poly = data["poly"][:DIMS]
vinit = data["vinit"][:DIMS]
width = vinit.shape[1]

out = [
    "// Generated by tools/gen_sobol_table.py. Do not edit.",
    "// Joe-Kuo direction numbers (new-joe-kuo-6.21201): primitive polynomial",
    "// (with leading and trailing terms) and initial m values per dimension.",
    f"inline constexpr int kSobolMaxDims = {DIMS};",
    f"inline constexpr int kSobolInitWidth = {width};",
    f"inline constexpr std::uint32_t kSobolPoly[{DIMS}] = {{",
]
for i in range(0, DIMS, 12):
    out.append("    " + ", ".join(str(int(p)) for p in poly[i:i + 12]) + ",")
out.append("};")
out.append(f"inline constexpr std::uint32_t kSobolInit[{DIMS}][{width}] = {{")
for row in vinit:
    out.append("    {" + ", ".join(str(int(v)) for v in row) + "},")
out.append("};")
sys.stdout.write("\n".join(out) + "\n")
