"""qclab: desk-scale numerics for quasi-classical field limits.

Builds effective particle operators from microscopic field states on truncated
Fock spaces and certifies their small-eps convergence: characteristic
functionals, weak potential pairings, recovery/lower-bound form probes, and
strong/norm resolvent comparisons, together with the Lorentz-space inequality
suites the estimates rest on.
"""

__version__ = "0.1.0"

from . import fock, harness, lorentz, operators, potentials, report  # noqa: F401
