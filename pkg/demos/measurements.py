"""Qubit and qutrit measurement pairs: dimension measure, weight, robustness.

Run with ``python3 demos/measurements.py``.
"""

import math

import numpy as np

from dimenq.measurements import (
    PovmSet,
    dimension_measure_curve_from_constructions,
    dimension_measure_qubit,
    dimension_measure_upper_bound,
    heuristic_mub_construction,
    incompatibility_weight,
    joint_measurability,
    mub_pair,
)

# The sharp X/Z pair carries one full bit; below visibility 1/sqrt(2) it is
# jointly measurable and the measure vanishes.
for p in (1.0, 0.85, 1 / math.sqrt(2), 0.6):
    m = mub_pair(2, p)
    jm = joint_measurability(m)
    print(f"qubit MUB p={p:.4f}: D={dimension_measure_qubit(m).value:.6f}  JM={jm.jointly_measurable}")

# The incompatibility weight bounds the measure from above. A sharp
# projector paired with a weak rank-one effect along another axis has weight
# one, while its measure only reaches the weak effect's strength.
a, b = np.array([1, 0]), np.array([math.cos(0.75), math.sin(0.75)])
eff = []
for v, eta in ((a, 1.0), (b, 0.4)):
    e = eta * np.outer(v, v)
    eff.append([e, np.eye(2) - e])
m = PovmSet(np.array(eff, dtype=complex))
print(f"one-sided pair: D={dimension_measure_qubit(m).value:.6f}  weight={incompatibility_weight(m).value:.6f}")

# In d = 5 the SDP bound sits below the curve built from the k = 1 construction.
h = heuristic_mub_construction(5, 1)
print(f"d=5 k=1 construction visibility {h.p_k:.6f}")
for p in (0.75, 0.85, 0.95):
    sdp = dimension_measure_upper_bound(mub_pair(5, p)).value
    print(f"  p={p}: SDP bound {sdp:.6f}  construction curve {dimension_measure_curve_from_constructions(5, p):.6f}")
