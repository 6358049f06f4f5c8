"""The six case studies, built and solved directly.

Each problem ships with a typed parameter schema, an instance builder and
an independent oracle. This script walks all six with their canonical
fixture parameters and prints what a user would care about.

Run from the repository root:  python demos/demo_01_six_problems.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from energy_concierge.problems import (
    ProblemKind,
    build_instance,
    derived_outputs,
    fixture_params,
    oracle,
)
from energy_concierge.solver import solve_instance

for kind in ProblemKind:
    params = fixture_params(kind)
    instance = build_instance(kind, params)
    solution = solve_instance(instance)
    reference = oracle(kind, params)

    print(f"=== {kind.value}")
    print(f"objective: {solution.objective:.6g}   (oracle: {reference.objective:.6g})")
    for label, value, unit in derived_outputs(kind, params, solution):
        print(f"  {label} = {value:.6g} {unit}")
    print()

# The EV schedule shape is worth a look: the four expensive evening hours
# stay empty and the cheap night hours carry the full 70 kWh.
ev = solve_instance(build_instance(ProblemKind.EV_CHARGING, fixture_params(ProblemKind.EV_CHARGING)))
print("EV schedule (kW per hour, 6 PM to 6 AM):")
print([round(v, 2) for v in ev.vector("x", 12)])
