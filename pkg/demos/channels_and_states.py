"""Average Kraus dimensionality of a few qubit channels, and the Werner line.

Run with ``python3 demos/channels_and_states.py``.
"""

import numpy as np

from dimenq.channels import dimension_measure, is_entanglement_breaking, named_channel
from dimenq.states import schmidt_measure_2xn, werner

# The depolarizing channel keeps one coherent Kraus branch until it becomes
# entanglement breaking at p = 2/3; the measure falls linearly to zero there.
print("depolarizing: p, D, 1 - 3p/2")
for p in np.linspace(0, 1, 7):
    res = dimension_measure(named_channel("depolarizing", p))
    print(f"  {p:.3f}  {res.value:.6f}  {max(1 - 1.5 * p, 0):.6f}")

# Amplitude damping stays at one bit for every gamma < 1 and drops to zero
# only at gamma = 1, so the measure is not continuous in the channel.
print("amplitude damping: gamma, D")
for g in (0.5, 0.99, 0.999, 1.0):
    print(f"  {g:<6} {dimension_measure(named_channel('amplitude_damping', g)).value:.6f}")

# The 2 -> 3 erasure channel: with probability q the qubit is replaced by a flag.
print("erasure: q, D")
for q in (0.0, 0.5, 1.0):
    ch = named_channel("erasure", q)
    print(f"  {q:<4} {dimension_measure(ch).value:.6f}  entanglement breaking: {is_entanglement_breaking(ch)}")

# Werner states: the entangled weight above 1/3 is (3 lam - 1)/2.
print("werner: lambda, S, (3 lam - 1)/2")
for lam in (0.2, 1 / 3, 0.6, 1.0):
    print(f"  {lam:.3f}  {schmidt_measure_2xn(werner(lam)).value:.6f}  {max((3 * lam - 1) / 2, 0):.6f}")
