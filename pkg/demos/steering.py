"""Schmidt measure of steering assemblages and the loose log2(d) bound.

Run with ``python3 demos/steering.py``.
"""

import math

import numpy as np

from dimenq import linalg as la
from dimenq.measurements import mub_pair
from dimenq.states import DensityMatrix
from dimenq.steering import (
    from_state_and_povms,
    gap_example,
    schmidt_measure_pgm_bound,
    schmidt_measure_qubit_assemblage,
    schmidt_measure_upper_bound,
)

# Alice measures X/Z of visibility p on her half of a Bell pair; Bob's
# conditional states form the assemblage.
bell = DensityMatrix((2, 2), la.proj(la.max_entangled(2)))
for p in (1.0, 0.9, 0.75, 0.7):
    s = from_state_and_povms(bell, mub_pair(2, p))
    rep = schmidt_measure_pgm_bound(s)
    print(f"Bell, p={p}: S={schmidt_measure_qubit_assemblage(s).value:.6f}  PGM bound {rep.d_m_pgm_bound:.6f}  holds {rep.holds}")

# Every component of this assemblage lives on a qubit subspace, so its true
# measure is one bit, yet the SDP bound reaches log2(d).
for d in (3, 5):
    g = gap_example(d)
    bound = schmidt_measure_upper_bound(g.assemblage).value
    print(f"gap example d={d}: bound {bound:.6f} = log2 d {math.log2(d):.6f}, true value {g.true_value}, "
          f"{len(g.decomposition)} qubit components, residual {g.residual:.0e}")

# At d = 2 the same construction is unsteerable.
print(f"gap example d=2: bound {schmidt_measure_upper_bound(gap_example(2).assemblage).value:.6f}")
print("sigma[.|1] at d=2:\n", np.round(gap_example(2).assemblage.elements[1].real, 6))
