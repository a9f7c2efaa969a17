"""Average dimensionality measures for quantum channels, measurements and steering assemblages."""

from .channels import Channel, ChoiMatrix, choi_of, dimension_measure, kraus_from_choi, named_channel
from .conic import SdpProblem, SdpSolution, SolverError, check_certificate, solve
from .measurements import (
    PovmSet,
    PseudoMeasurement,
    dimension_measure_qubit,
    dimension_measure_upper_bound,
    incompatibility_weight,
    joint_measurability,
    mub_pair,
)
from .states import DensityMatrix, schmidt_measure_2xn
from .steering import Assemblage, gap_example, schmidt_measure_upper_bound

__version__ = "0.1.0"
