"""Exception hierarchy shared by every fairshare module.

Input errors map to CLI exit code 2, solver errors to exit code 3.
"""


class FairshareError(Exception):
    """Base class for all fairshare errors"""


class InputError(FairshareError, ValueError):
    """Invalid problem, option or instance supplied by the caller"""


class SolverError(FairshareError, RuntimeError):
    """A numerical route could not produce an answer"""


# Geometry
class NonConvexInput(InputError):
    pass


class DisagreementOutside(InputError):
    pass


class DegenerateSet(InputError):
    pass


class UnknownPreset(InputError):
    pass


class NotNormalized(InputError):
    pass


class DegenerateNormalization(SolverError):
    """No normalized form exists: one player has no room above the disagreement point"""


# Solutions / solver options
class InvalidP(InputError):
    pass


class UnknownSolver(InputError):
    pass


class UnknownVariant(InputError):
    pass


class InvalidConfig(InputError):
    pass


class ProblemFileError(InputError):
    pass


# Harmonic
class NoConvergence(SolverError):
    pass


class DiskOutsideDomain(InputError):
    pass


# Monte Carlo
class MaxMovesExceeded(SolverError):
    pass


class BoundaryStart(InputError):
    pass


# Analysis
class DiskOutsideFeasible(InputError):
    pass


class MalformedInstance(InputError):
    pass
