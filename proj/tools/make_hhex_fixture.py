"""Writes data/hhex_d3.json: a bulk heavy-hexagon patch with the seven CR layers P0..P6.

Rows y of flags f(y,x) and data d(y,x) alternate along a line; ancilla a(y,x) joins f(y,x)
(its first flag) to f(y+1,x) (its second flag) whenever x+y is even.
"""
import json
import sys

NY, NX = 5, 6
ALPHA = -330e6
J = 3.8e6

qubits, couplings, roles = [], [], {}


def add_qubit(name, role, freq):
    qubits.append({"id": name, "frequency": freq, "anharmonicity": ALPHA, "levels": 5})
    roles[name] = role


def f(y, x):
    return f"F{y}_{x}" if 0 <= x < NX and 0 <= y < NY else None


def d(y, x):
    return f"D{y}_{x}" if 0 <= x < NX - 1 and 0 <= y < NY else None


def a(y, x):
    return f"A{y}_{x}" if (x + y) % 2 == 0 and 0 <= y < NY - 1 and 0 <= x < NX else None


for y in range(NY):
    for x in range(NX):
        add_qubit(f(y, x), "flag", 5.10e9 + 1e6 * (y * NX + x) % 7e6)
        if d(y, x):
            add_qubit(d(y, x), "data", 5.00e9 + 1e6 * (y * NX + x) % 5e6)
            couplings += [{"a": f(y, x), "b": d(y, x), "strength": J},
                          {"a": d(y, x), "b": f(y, x + 1), "strength": J}]
for y in range(NY - 1):
    for x in range(NX):
        if a(y, x):
            add_qubit(a(y, x), "ancilla", 5.20e9 + 1e6 * (y * NX + x) % 3e6)
            couplings += [{"a": f(y, x), "b": a(y, x), "strength": J},
                          {"a": a(y, x), "b": f(y + 1, x), "strength": J}]

layers = [[] for _ in range(7)]


def pair(i, c, t):
    if c and t:
        layers[i].append([c, t])


for y in range(NY - 1):
    for x in range(NX):
        anc = a(y, x)
        if not anc:
            continue
        top, bottom = f(y, x), f(y + 1, x)
        pair(0, anc, top)
        pair(1, anc, bottom)
        pair(1, top, d(y, x))
        pair(2, top, d(y, x - 1))
        pair(2, bottom, d(y + 1, x - 1))
        pair(3, anc, top)
        pair(3, bottom, d(y + 1, x))
        pair(4, anc, bottom)
for y in range(NY):
    for x in range(NX):
        pair(5, d(y, x - 1), f(y, x))
        pair(6, d(y, x), f(y, x))

yc = 2
centers = {
    "S_D": d(yc, [x for x in range(1, NX - 2) if (x + yc) % 2 == 1][-1]),
    "S_A": a(1, 3),
    "S_F": f(yc, [x for x in range(2, NX - 2) if (x + yc) % 2 == 1][-1]),
}

doc = {
    "note": "bulk heavy-hexagon patch; P0..P6 follow the syndrome-extraction layers",
    "qubits": qubits,
    "couplings": couplings,
    "drives": [],
    "roles": roles,
    "schedules": [{"name": f"P{i}", "cr_pairs": p} for i, p in enumerate(layers)],
    "centers": centers,
}
out = sys.argv[1] if len(sys.argv) > 1 else "data/hhex_d3.json"
with open(out, "w") as fh:
    json.dump(doc, fh, indent=1)
    fh.write("\n")
