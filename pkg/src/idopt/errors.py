"""Exception types raised across the package."""


class IdoptError(Exception):
    """Base class for all idopt errors."""


class CyclicGraph(IdoptError):
    pass


class OverlappingSets(IdoptError):
    pass


class NotDecisionVertex(IdoptError):
    pass


class InvalidInstance(IdoptError):
    """Instance data violates a structural or numerical invariant."""


class NotTopological(IdoptError):
    pass


class InvalidSeed(IdoptError):
    pass


class NotSoluble(IdoptError):
    pass


class IncompletePolicy(IdoptError):
    pass


class TooManyPolicies(IdoptError):
    pass


class InfeasibleModel(IdoptError):
    pass


class UnboundedModel(IdoptError):
    pass


class SolverProcessFailed(IdoptError):
    pass


class SolutionParseError(IdoptError):
    pass


class FractionalSolution(IdoptError):
    pass
