"""Golden featurization fixtures derived from hand-listed molecule facts.

Nothing here parses SMILES or SDF: every atom property, bond, and
coordinate is written out below, and the features are assembled from the
atom/bond/neighbourhood tables and the closed-form distance expansion.
Values are written with repr() so they parse back to the same doubles.

    python3 tests/oracles/make_golden.py tests/data/golden
"""

import math
import sys
from collections import deque
from pathlib import Path

ELEMENTS = ["B", "N", "C", "O", "F", "P", "S", "Cl", "Br", "I", "Dummy", "Other"]
CUTOFF = 20.0
N_EMB = 32
P = 6


def envelope(t):
    if t >= 1.0:
        return 0.0
    pp = float(P)
    a = (pp + 1) * (pp + 2) / 2
    b = pp * (pp + 2)
    c = pp * (pp + 1) / 2
    return 1 - a * t**pp + b * t ** (pp + 1) - c * t ** (pp + 2)


def sin_pi(y):
    if y == math.floor(y):
        return 0.0
    return math.sin(math.pi * y)


def radial(d):
    c = CUTOFF
    pref = math.sqrt(2.0 / c)
    t = d / c
    u = envelope(t)
    out = []
    for k in range(N_EMB):
        n = float(k + 1)
        e = pref * (n * math.pi / c) if d < 1e-9 else pref * sin_pi(n * t) / d
        out.append(e * u)
    return out


# (element, heavy neighbours, H count, charge, in_ring, aromatic)
# bonds: (i, j, order, aromatic, conjugated, in_ring)
MOLECULES = {
    "co2_smiles": dict(
        atoms=[("C", 2, 0, 0, 0, 0), ("O", 1, 0, 0, 0, 0), ("O", 1, 0, 0, 0, 0)],
        bonds=[(0, 1, 2.0, 0, 1, 0), (0, 2, 2.0, 0, 1, 0)],
        coords=None,
    ),
    "co2_sdf": dict(
        atoms=[("O", 1, 0, 0, 0, 0), ("C", 2, 0, 0, 0, 0), ("O", 1, 0, 0, 0, 0)],
        bonds=[(0, 1, 2.0, 0, 1, 0), (1, 2, 2.0, 0, 1, 0)],
        coords=[(-1.16, 0.0, 0.0), (0.0, 0.0, 0.0), (1.16, 0.0, 0.0)],
    ),
    "benzene_smiles": dict(
        atoms=[("C", 2, 1, 0, 1, 1)] * 6,
        bonds=[(i, (i + 1) % 6, 1.5, 1, 1, 1) for i in range(6)],
        coords=None,
    ),
    "benzene_sdf": dict(
        atoms=[("C", 2, 1, 0, 1, 1)] * 6,
        bonds=[(i, (i + 1) % 6, 1.5, 1, 1, 1) for i in range(6)],
        coords=[(1.39, 0.0, 0.0), (0.695, 1.2038, 0.0), (-0.695, 1.2038, 0.0),
                (-1.39, 0.0, 0.0), (-0.695, -1.2038, 0.0), (0.695, -1.2038, 0.0)],
    ),
    "ethanol_smiles": dict(
        atoms=[("C", 1, 3, 0, 0, 0), ("C", 2, 2, 0, 0, 0), ("O", 1, 1, 0, 0, 0)],
        bonds=[(0, 1, 1.0, 0, 0, 0), (1, 2, 1.0, 0, 0, 0)],
        coords=None,
    ),
    "ethanol_sdf": dict(
        atoms=[("C", 1, 3, 0, 0, 0), ("C", 2, 2, 0, 0, 0), ("O", 1, 1, 0, 0, 0)],
        bonds=[(0, 1, 1.0, 0, 0, 0), (1, 2, 1.0, 0, 0, 0)],
        coords=[(-1.271, -0.235, 0.0), (0.0, 0.593, 0.0), (1.155, -0.242, 0.0)],
    ),
}


def atom_row(elem, deg, h, charge, ring, arom):
    row = [0.0] * 36
    row[ELEMENTS.index(elem)] = 1.0
    row[12 + min(deg, 5)] = 1.0
    row[18 + min(h, 4)] = 1.0
    row[23 + charge + 5] = 1.0
    row[34] = float(ring)
    row[35] = float(arom)
    return row


def hops(n, bonds):
    adj = [[] for _ in range(n)]
    for i, j, *_ in bonds:
        adj[i].append(j)
        adj[j].append(i)
    out = [[-1] * n for _ in range(n)]
    for s in range(n):
        out[s][s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if out[s][v] < 0:
                    out[s][v] = out[s][u] + 1
                    q.append(v)
    return out


def featurize(spec):
    real = len(spec["atoms"])
    n = real + 1  # dummy appended
    atoms = [atom_row(*a) for a in spec["atoms"]] + [atom_row("Dummy", 0, 0, 0, 0, 0)]
    h = hops(real, spec["bonds"])
    bond_at = {}
    for i, j, order, arom, conj, ring in spec["bonds"]:
        f = [0.0] * 7
        f[[1.0, 1.5, 2.0, 3.0].index(order)] = 1.0
        f[4], f[5], f[6] = float(arom), float(conj), float(ring)
        bond_at[(i, j)] = bond_at[(j, i)] = f
    rel = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                code = 0
            elif i == real or j == real:
                code = 5
            else:
                hop = h[i][j]
                code = 4 if hop < 0 or hop >= 4 else hop
            onehot = [0.0] * 6
            onehot[code] = 1.0
            bond = bond_at.get((i, j), [0.0] * 7)
            if i == j:
                d = 0.0
            elif spec["coords"] is None or i == real or j == real:
                d = CUTOFF
            else:
                p, q = spec["coords"][i], spec["coords"][j]
                dx, dy, dz = p[0] - q[0], p[1] - q[1], p[2] - q[2]
                d = math.sqrt(dx * dx + dy * dy + dz * dz)
            rel[(i, j)] = onehot + bond + radial(d)
    return n, atoms, rel


def write(path, n, atoms, rel):
    with open(path, "w") as f:
        f.write(f"atoms {n} 36\n")
        for row in atoms:
            f.write(" ".join(repr(v) for v in row) + "\n")
        f.write(f"relation {n} 45\n")
        for i in range(n):
            for j in range(n):
                f.write(f"{i} {j} " + " ".join(repr(v) for v in rel[(i, j)]) + "\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "golden")
    out.mkdir(parents=True, exist_ok=True)
    for name, spec in MOLECULES.items():
        write(out / f"{name}.txt", *featurize(spec))


if __name__ == "__main__":
    main()
