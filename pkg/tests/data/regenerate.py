"""Rebuild the frozen oracle fixtures in this directory.

The model parameters come from a plain numpy Generator (not the package
RNG); probabilities come from the pure-Python oracle in tests/oracles.py.
"""
import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402


def main():
    rng = np.random.default_rng(20240607)
    W = rng.normal(0.0, 1.0, (6, 4)).round(6).tolist()
    a = rng.normal(0.0, 0.5, 6).round(6).tolist()
    b = rng.normal(0.0, 0.5, 4).round(6).tolist()
    configs, probs = oracles.visible_table(W, a, b)
    clamp = {0: 1, 2: 0, 4: 1}
    free, comps, cond = oracles.conditional_table(W, a, b, clamp)
    doc = {
        "W": W, "a": a, "b": b,
        "configs": [list(c) for c in configs],
        "probs": probs,
        "clamp": {str(k): v for k, v in clamp.items()},
        "free": free,
        "completions": [list(c) for c in comps],
        "conditional": cond,
    }
    (HERE / "rbm_6x4.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
