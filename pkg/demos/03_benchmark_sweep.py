"""Run the shipped rank-2 sweep presets and print the comparison table.

Equivalent to:

    softdeflate sweep presets/n1000_k2_completion.cfg \
                      presets/n1000_k2_svd.cfg \
                      presets/n1000_k2_fw.cfg --out results.csv

but trimmed to 3 seeds so it finishes in ~10 seconds.  The resulting CSV
feeds the plots package (see plots/README.md) for the two-panel figure.
"""

import dataclasses
import pathlib
from collections import defaultdict

import numpy as np

from softdeflate.experiments import load_config, rows_to_csv, sweep

preset_dir = pathlib.Path(__file__).resolve().parent.parent / "presets"
configs = [
    dataclasses.replace(load_config(preset_dir / name), seeds=(0, 1, 2))
    for name in ("n1000_k2_completion.cfg", "n1000_k2_svd.cfg", "n1000_k2_fw.cfg")
]
rows = sweep(configs)

out = pathlib.Path(__file__).resolve().parent / "sweep_results.csv"
out.write_text(rows_to_csv(rows))
print(f"wrote {len(rows)} rows to {out}\n")

table = defaultdict(dict)
for row in rows:
    table[row.m].setdefault(row.algorithm, []).append(row.fro_err)
print(f"{'m':>8}  " + "".join(f"{alg:>14}" for alg in ("soft_deflate", "naive_svd", "frank_wolfe")))
for m in sorted(table):
    means = [np.mean(table[m].get(alg, [np.nan])) for alg in ("soft_deflate", "naive_svd", "frank_wolfe")]
    print(f"{m:>8}  " + "".join(f"{v:>14.3e}" for v in means))
