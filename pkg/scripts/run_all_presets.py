#!/usr/bin/env python3
"""Run every preset experiment and collect the reports under one directory.

Usage:
    python scripts/run_all_presets.py [--out results] [--fast] [--threads K]

--fast shrinks restart/sample counts so the whole batch finishes in about a
minute; drop it to reproduce the full-scale numbers.
"""

import argparse
import json
from pathlib import Path

from momentlab.config import ExperimentConfig
from momentlab.presets import PRESETS
from momentlab.runner import run

FAST_OVERRIDES = {
    "thm1-gl": {"restarts": 20, "mixing_seeds": [11]},
    "thm2-so": {"restarts": 20, "mixing_seeds": [21]},
    "cor-deepnet": {"restarts": 20, "mixing_seeds": [31]},
    "cor-sparse": {"restarts": 20, "mixing_seeds": [41]},
    "ctrl-torus": {"restarts": 10},
    "ctrl-sparse-shift": {"restarts": 30},
    "lemma-codim-gl": {"pairs": 5},
    "prop-codim-so": {"pairs": 5},
    "lemma-codim-gl-blocks": {"pairs": 5},
    "lemma-codim-so-blocks": {"pairs": 5},
    "mra-cyclic-n4": {"sigma_list": [0.5, 1.0], "seeds": [0, 1, 2], "n_cap": 100000},
    "cor-sphere-so3": {"n": 20000, "repeats": 1},
    "appendixB-blockscalar": {"n": 20000},
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--fast", action="store_true")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    root = Path(args.out)
    for name, preset in PRESETS.items():
        params = dict(preset.config.parameters)
        if args.fast:
            params.update(FAST_OVERRIDES.get(name, {}))
        cfg = ExperimentConfig(command=preset.config.command, parameters=params)
        report = run(cfg, out_dir=root / name, threads=args.threads)
        summary = {
            k: v for k, v in report.results.items() if not isinstance(v, (list, dict))
        }
        print(f"{name}: {json.dumps(summary, sort_keys=True, default=str)}")


if __name__ == "__main__":
    main()
