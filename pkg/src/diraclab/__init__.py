"""diraclab: numerical laboratory for gapped Dirac-type Hamiltonians with
Anderson-type random perturbations.

Verifies, at desk scale, the checkable statements about these models: gap
structure, eigenvalue-counting (Wegner) estimates, resolvent off-diagonal
decay, eigenfunction localization, initial-scale probabilities, scale
recursion, and transport moments.
"""

__version__ = "0.1.0"
