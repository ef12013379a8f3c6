"""Write the synthetic Fabry-Perot fringe corpus used by the CLI tests.

Each scan is the Airy transmission of a lossy cavity,
T = (1 - R)^2 A / ((1 - R A)^2 + 4 R A sin^2(phi / 2)), A = 10^(-alpha L / 10),
sampled at 50 points per fringe over three fringes. Every scan gets a JSON
sidecar with its length and facet reflectivity; truth.csv lists the
injected losses.
"""

import json
import math
import pathlib
import sys

REFLECTIVITIES = [0.10, 0.1406, 0.18]
LOSSES_DB_PER_CM = [0.05, 0.1, 0.2, 0.5]
LENGTHS_CM = [1.0, 2.0, 4.0]
SAMPLES_PER_FRINGE = 50
FRINGES = 3


def airy(phi, r, a):
    return (1 - r) ** 2 * a / ((1 - r * a) ** 2 + 4 * r * a * math.sin(phi / 2) ** 2)


def write_scan(directory, name, axis, power, meta):
    lines = ["axis,power"] + [f"{x!r},{p!r}" for x, p in zip(axis, power)]
    (directory / f"{name}.csv").write_text("\n".join(lines) + "\n")
    (directory / f"{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def main(root):
    good = root / "fringes"
    bad = root / "fringes_bad"
    good.mkdir(parents=True, exist_ok=True)
    bad.mkdir(parents=True, exist_ok=True)
    n = SAMPLES_PER_FRINGE * FRINGES + 1
    truth = ["waveguide_id,reflectivity,length_cm,loss_db_per_cm"]
    case = 0
    for r in REFLECTIVITIES:
        for alpha in LOSSES_DB_PER_CM:
            for length in LENGTHS_CM:
                name = f"wg{case:02d}"
                # Temperature-like axis with a case-dependent phase origin.
                phase0 = 0.37 + 0.11 * case
                axis = [0.01 * i for i in range(n)]
                a = 10 ** (-alpha * length / 10)
                power = [airy(phase0 + 2 * math.pi * i / SAMPLES_PER_FRINGE, r, a) for i in range(n)]
                write_scan(good, name, axis, power, {"length_cm": length, "reflectivity": r})
                truth.append(f"{name},{r},{length},{alpha}")
                case += 1
    (good / "truth.csv").write_text("\n".join(truth) + "\n")

    axis = [0.01 * i for i in range(n)]
    write_scan(bad, "flat", axis, [1.0] * n, {"length_cm": 4.0, "reflectivity": 0.1406})
    a = 10 ** (-0.2 * 4.0 / 10)
    power = [airy(2 * math.pi * i / SAMPLES_PER_FRINGE, 0.1406, a) for i in range(n)]
    write_scan(bad, "ok", axis, power, {"length_cm": 4.0, "reflectivity": 0.1406})
    write_scan(bad, "gain", axis, power, {"length_cm": 4.0, "reflectivity": 0.05})


if __name__ == "__main__":
    main(pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "crates/cli/tests/data"))
