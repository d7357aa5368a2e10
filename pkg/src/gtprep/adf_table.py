"""Monte Carlo critical values for the quadratic-trend Dickey-Fuller t-statistic.

Regenerate the shipped table with::

    python -m gtprep.adf_table --reps 50000 --seed 20240501

Each replication is a driftless Gaussian random walk; the statistic is the
t-ratio on the lagged level in ``dy_t = mu + a t + b t^2 + g y_{t-1} + e_t``
with ``n`` regression observations. Replications are drawn in chunks from
spawned child seeds, so results do not depend on how chunks are scheduled.
"""

from __future__ import annotations

import argparse
import csv
from importlib import resources

import numpy as np

SIZES = (100, 250, 500)
LEVELS = (0.01, 0.05, 0.10)
DEFAULT_SEED = 20240501
TABLE_NAME = "adf_quadratic_critical_values.csv"


def _chunk_stats(n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    e = rng.standard_normal((reps, n + 1))
    y = np.cumsum(e, axis=1)
    dy = np.diff(y, axis=1)
    lag = y[:, :-1]
    tt = np.arange(1, n + 1) / n
    Z = np.column_stack([np.ones(n), tt, tt ** 2])
    P = np.linalg.solve(Z.T @ Z, Z.T)  # (3, n)
    lag_r = lag - (lag @ P.T) @ Z.T
    dy_r = dy - (dy @ P.T) @ Z.T
    sxx = np.einsum("ij,ij->i", lag_r, lag_r)
    g = np.einsum("ij,ij->i", lag_r, dy_r) / sxx
    resid = dy_r - g[:, None] * lag_r
    s2 = np.einsum("ij,ij->i", resid, resid) / (n - 4)
    return g / np.sqrt(s2 / sxx)


def simulate(n: int, reps: int, seed: int, chunk: int = 2500) -> np.ndarray:
    children = np.random.SeedSequence([seed, n]).spawn(-(-reps // chunk))
    out = []
    left = reps
    for ss in children:
        m = min(chunk, left)
        out.append(_chunk_stats(n, m, np.random.default_rng(ss)))
        left -= m
    return np.concatenate(out)


def generate(reps: int = 50_000, seed: int = DEFAULT_SEED, sizes=SIZES) -> list[dict]:
    rows = []
    for n in sizes:
        stats = simulate(n, reps, seed)
        q = np.quantile(stats, LEVELS)
        rows.append({"n": n, "cv_1pct": q[0], "cv_5pct": q[1], "cv_10pct": q[2],
                     "reps": reps, "seed": seed})
    return rows


def load_table() -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Shipped table as ``{level: (sizes, critical values)}``."""
    text = resources.files("gtprep.data").joinpath(TABLE_NAME).read_text()
    rows = [r for r in csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))]
    sizes = np.array([float(r["n"]) for r in rows])
    return {
        0.01: (sizes, np.array([float(r["cv_1pct"]) for r in rows])),
        0.05: (sizes, np.array([float(r["cv_5pct"]) for r in rows])),
        0.10: (sizes, np.array([float(r["cv_10pct"]) for r in rows])),
    }


def interpolate(sizes: np.ndarray, values: np.ndarray, n: float) -> float:
    """Critical value at sample size ``n``.

    Polynomial in 1/n through the tabulated points; below the smallest size
    the two smallest points are extended linearly in 1/n.
    """
    inv = 1.0 / np.asarray(sizes, dtype=float)
    if n < sizes.min():
        order = np.argsort(sizes)[:2]
        slope = (values[order[1]] - values[order[0]]) / (inv[order[1]] - inv[order[0]])
        return float(values[order[0]] + slope * (1.0 / n - inv[order[0]]))
    coefs = np.polyfit(inv, values, deg=len(sizes) - 1)
    return float(np.polyval(coefs, 1.0 / n))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=50_000)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", default=None, help="output path (default: package data)")
    args = parser.parse_args(argv)
    rows = generate(args.reps, args.seed)
    path = args.out or str(resources.files("gtprep.data").joinpath(TABLE_NAME))
    with open(path, "w", newline="") as fh:
        fh.write(f"# generated by: python -m gtprep.adf_table --reps {args.reps} --seed {args.seed}\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.5f}" if isinstance(v, float) else v) for k, v in r.items()})


if __name__ == "__main__":
    main()
