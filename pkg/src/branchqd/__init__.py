"""Branching states, geometric quantum states and discord diagnostics for
system-environment pure states."""

from .qstate import DensityMatrix, PureState, SubsystemLayout, normalize, partial_trace, von_neumann_entropy
from .geometry import GeometricState, PointerBasis, extract_geometric_state
from .infotheory import DiscordConfig, discord, holevo, mutual_information
from .models import CMaybeSpec, analytic_cmaybe_state, build_cmaybe_state
from .branching import branch_decompose, closest_branching_candidate, ghz_fidelity, theorem_check

__version__ = "0.1.0"
