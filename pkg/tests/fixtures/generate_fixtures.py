"""Regenerate ``derived_values.csv`` from the dense-matrix oracle.

Run from the repository root:  python tests/fixtures/generate_fixtures.py

Each case is described by a canonical JSON string; its SHA-256 prefix is the
``inputs_hash`` column, so a test can confirm it is checking the value that
was computed for exactly the inputs it builds.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from surfnoise import oracle
from surfnoise.noise_models import NoiseModel, make_channel
from surfnoise.surface_code import build_rotated_layout

HERE = Path(__file__).parent
OUT = HERE / "derived_values.csv"


def _syndrome(seed: int, g: int = 8) -> list[int]:
    rng = np.random.default_rng(seed)
    return [int(v) for v in rng.choice([1, -1], size=g)]


def cases() -> list[dict]:
    out = []
    allplus = [1] * 8
    for kind, params in [
        ("amplitude_damping", [0.1]),
        ("amplitude_damping", [0.3]),
        ("phase_damping", [0.2]),
        ("systematic_rotation", [0.25 * math.pi]),
        ("generalized_amplitude_damping", [0.2, 0.7]),
        ("ad_plus_dephase", [0.3, 0.1]),
        ("pauli", [0.1, 0.0, 0.0]),
        ("pauli", [0.05, 0.02, 0.08]),
    ]:
        for state in ("mixed_L", "zero_L", "plus_L"):
            out.append({"op": "likelihood", "d": 3, "channel": kind, "params": params,
                        "state": state, "m": allplus})
            for s in (1, 2):
                out.append({"op": "likelihood", "d": 3, "channel": kind, "params": params,
                            "state": state, "m": _syndrome(100 * s + len(out))})
    for s in (7, 8, 9):
        out.append({"op": "choi_trace", "d": 3, "channel": "amplitude_damping", "params": [0.3],
                    "m": _syndrome(s)})
        out.append({"op": "choi_fidelity_I", "d": 3, "channel": "amplitude_damping",
                    "params": [0.3], "m": _syndrome(s)})
    out.append({"op": "dephase_offdiag", "p": 0.19, "rho01": 0.5})
    return out


def case_id(c: dict) -> str:
    if c["op"] == "dephase_offdiag":
        return f"dephase_offdiag_p{c['p']}"
    m = "".join("+" if v > 0 else "-" for v in c["m"])
    p = "_".join(f"{v:.4g}" for v in c["params"])
    state = c.get("state", "ref")
    return f"{c['op']}_d{c['d']}_{c['channel']}_{p}_{state}_{m}"


def inputs_hash(c: dict) -> str:
    return hashlib.sha256(json.dumps(c, sort_keys=True).encode()).hexdigest()[:16]


def model(c: dict) -> NoiseModel:
    return NoiseModel.uniform(c["channel"], c["d"] ** 2, *c["params"])


def evaluate(c: dict) -> tuple[float, float]:
    """Oracle value and comparison tolerance (relative for likelihoods)."""
    if c["op"] == "dephase_offdiag":
        ch = make_channel("phase_damping", c["p"])
        rho = np.array([[0.5, c["rho01"]], [c["rho01"], 0.5]])
        return float(np.real(ch.apply(rho)[0, 1])), 1e-12
    lay = build_rotated_layout(c["d"])
    nm = model(c)
    if c["op"] == "likelihood":
        return oracle.oracle_likelihood(lay, c["m"], nm, c["state"]), 1e-10
    from surfnoise.decoders import pure_error_lookup

    k = oracle.oracle_conditional_choi(lay, c["m"], nm, pure_error_lookup(lay, c["m"]))
    if c["op"] == "choi_trace":
        return float(np.real(np.trace(k))), 1e-10
    omega = np.array([1, 0, 0, 1]) / np.sqrt(2)
    return float(np.real(omega @ k @ omega)), 1e-10


def main() -> None:
    rows = []
    for c in cases():
        value, tol = evaluate(c)
        rows.append([case_id(c), inputs_hash(c), f"{value:.17g}", f"{tol:g}"])
    with open(OUT, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "inputs_hash", "value", "tolerance"])
        w.writerows(rows)
    print(f"wrote {len(rows)} cases to {OUT}")


if __name__ == "__main__":
    main()
