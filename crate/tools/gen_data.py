#!/usr/bin/env python3
"""Regenerate the static tables under crates/core/data/.

Requires: mendeleev, periodictable, spglib (build-time only; the Rust crate
reads the generated text files and has no Python dependency).

    python3 tools/gen_data.py
"""
import math
import os
import sys
from fractions import Fraction

import periodictable
import spglib
from mendeleev.fetch import fetch_table

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "crates", "core", "data")

# Cromer-Mann coefficients (International Tables Vol. C, Table 6.1.1.4),
# stored as a1 b1 a2 b2 a3 b3 a4 b4 c.
CM_SOURCE = os.path.join(ROOT, "tools", "cromer_mann.txt")

METAL_SERIES = {
    "Alkali metals",
    "Alkaline earth metals",
    "Poor metals",
    "Transition metals",
    "Lanthanides",
    "Actinides",
}


def load_cromer_mann():
    out = {}
    with open(CM_SOURCE) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            out[parts[0]] = [float(v) for v in parts[1:]]
    return out


def cm_ok(z, coeffs):
    a = coeffs[0:8:2]
    b = coeffs[1:8:2]
    c = coeffs[8]
    f0 = sum(a) + c
    if abs(f0 - z) / z > 0.01:
        return False
    prev = f0
    for k in range(1, 601):
        s2 = (k * 0.05 / (4 * math.pi)) ** 2
        f = sum(ai * math.exp(-bi * s2) for ai, bi in zip(a, b)) + c
        if f > prev + 1e-12:
            return False
        prev = f
    return True


def fmt(v, digits):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.{digits}f}"


def write_elements():
    table = fetch_table("elements")
    series = fetch_table("series").set_index("id")["name"].to_dict()
    cm = load_cromer_mann()
    rows = []
    for _, e in table.sort_values("atomic_number").iterrows():
        z = int(e.atomic_number)
        if z > 103:
            break
        sym = e.symbol
        radius = None if math.isnan(e.atomic_radius) else e.atomic_radius / 100.0
        ea = e.electron_affinity
        metal = series.get(e.series_id) in METAL_SERIES
        el = periodictable.elements[z]
        b_c = el.neutron.b_c
        coeffs = cm.get(sym)
        if coeffs is not None and not cm_ok(z, coeffs):
            coeffs = None
        cols = [
            sym,
            str(z),
            fmt(radius, 2),
            fmt(float(e.atomic_weight), 6),
            fmt(ea, 6),
            "1" if metal else "0",
            fmt(b_c, 4),
        ]
        cols += [repr(v) for v in coeffs] if coeffs else ["-"] * 9
        rows.append("\t".join(cols))
    with open(os.path.join(DATA, "elements.tsv"), "w") as fh:
        fh.write("# Per-element constants, one element per line, tab separated.\n")
        fh.write("# Columns: symbol, Z, Slater crystal radius (A), atomic weight (amu),\n")
        fh.write("#   electron affinity (eV), metal flag (1/0), coherent neutron\n")
        fh.write("#   scattering length (fm), Cromer-Mann a1 b1 a2 b2 a3 b3 a4 b4 c.\n")
        fh.write("# '-' marks a missing value.\n")
        fh.write("# Sources: Slater (1964) radii, weights and electron affinities via the\n")
        fh.write("#   mendeleev package; neutron lengths via periodictable; Cromer-Mann\n")
        fh.write("#   coefficients from International Tables Vol. C Table 6.1.1.4.\n")
        for r in rows:
            fh.write(r + "\n")


def frac_str(v):
    f = Fraction(v).limit_denominator(12)
    return "" if f == 0 else f"{f.numerator}/{f.denominator}"


def op_to_xyz(rot, trans):
    axes = "xyz"
    parts = []
    for i in range(3):
        term = ""
        for j in range(3):
            c = int(rot[i][j])
            if c == 0:
                continue
            sign = "-" if c < 0 else ("+" if term else "")
            mag = "" if abs(c) == 1 else str(abs(c))
            term += f"{sign}{mag}{axes[j]}"
        t = float(trans[i]) % 1.0
        if abs(t - 1.0) < 1e-9:
            t = 0.0
        ts = frac_str(t)
        if ts:
            term += "+" + ts
        parts.append(term)
    return ",".join(parts)


def write_spacegroups():
    seen = set()
    with open(os.path.join(DATA, "spacegroups.txt"), "w") as fh:
        fh.write("# Symmetry operations for the 230 space groups in their default setting\n")
        fh.write("# (first Hall setting: origin choice 1, hexagonal axes for R groups).\n")
        fh.write("# 'group <number> <Hermann-Mauguin symbol> <n_ops>' followed by n_ops\n")
        fh.write("# lines of coordinate triplets, centring translations included.\n")
        for hall in range(1, 531):
            t = spglib.get_spacegroup_type(hall)
            if t.number in seen:
                continue
            seen.add(t.number)
            sym = spglib.get_symmetry_from_database(hall)
            ops = [op_to_xyz(r, tr) for r, tr in zip(sym["rotations"], sym["translations"])]
            symbol = t.international_short.replace("_", "")
            fh.write(f"group {t.number} {symbol} {len(ops)}\n")
            for op in ops:
                fh.write(op + "\n")
    assert len(seen) == 230


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    write_elements()
    write_spacegroups()
    sys.exit(0)
