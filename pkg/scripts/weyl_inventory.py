"""Node inventory and chiralities of the lattice models over a mass sweep.

For every m the full Brillouin zone is scanned, each node classified, and
the total charge and the node count on the (0, 0) column reported.
"""

import argparse
import json

import numpy as np

from nhbands.models import LatticeModel
from nhbands.nodes import classify_all, find_nodes


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--variant", choices=["main", "supp"], default="supp")
    p.add_argument("--masses", type=float, nargs="+", default=[-0.5, 0.25, 2.0])
    p.add_argument("--coarse", type=int, default=32)
    p.add_argument("--probe-radius", type=float, default=0.3)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    for m in args.masses:
        model = LatticeModel(m, args.variant)
        nodes = classify_all(model, find_nodes(model, coarse=args.coarse, threads=args.threads),
                             args.probe_radius, threads=args.threads)
        on_column = sum(1 for n in nodes if np.allclose(n.position[:2], 0.0, atol=1e-6))
        charge = sum(n.chirality or 0 for n in nodes)
        print(json.dumps({"m": m, "count": len(nodes), "gamma_column": on_column,
                          "total_charge": charge, "nodes": [n.to_json() for n in nodes]}))


if __name__ == "__main__":
    main()
