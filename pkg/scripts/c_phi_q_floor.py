"""Uniform positivity of C_{phi_q, q} over q in {1.1, ..., 2.0}.

Writes the golden report consumed by the acceptance suite.  The floor is the
largest multiple of 0.05 strictly below every computed value; it is an
implementation-derived number, not a claim about the unnamed constant of
the underlying theorem.
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np

from isocap import orlicz as orl
from isocap import transitions as tr

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "tests" / "golden" / "c_phi_q_floor.json"


def compute(qs) -> dict:
    rows = []
    for q in qs:
        N = orl.phi_q(q)
        rows.append({"q": round(float(q), 10),
                     "C_capacity_route": tr.converse_constant_C(N, q),
                     "C_chain": tr.semigroup_chain_constants(N, q).C,
                     "B_forward": tr.forward_constant_B(N, q)})
    values = [r["C_capacity_route"] for r in rows]
    floor = math.floor(min(values) / 0.05) * 0.05
    if floor >= min(values):
        floor -= 0.05
    return {"schema": "isocap-golden/1", "quantity": "C_{phi_q,q} with c2 = 1",
            "c2": 1.0, "floor": round(floor, 10), "min_value": min(values), "rows": rows}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args(argv)
    report = compute(np.round(np.arange(1.1, 2.0001, 0.1), 10))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(report, indent=2) + "\n")
    for r in report["rows"]:
        print(f"q={r['q']:.1f}  C={r['C_capacity_route']:.6f}  C_chain={r['C_chain']:.3e}  "
              f"B={r['B_forward']:.6f}")
    print(f"floor {report['floor']}  (min {report['min_value']:.6f})  -> {args.out}")


if __name__ == "__main__":
    main()
