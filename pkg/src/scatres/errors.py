"""Exception hierarchy shared by all scatres modules."""


class ScatresError(Exception):
    """Base class for all scatres errors."""


class ConfigError(ScatresError):
    """Invalid run configuration. Carries field-level diagnostics."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ParameterError(ScatresError):
    """Arguments outside an operation's admissible range."""


class DomainError(ScatresError):
    """Phase point outside the operation's domain (e.g. inside an obstacle)."""


class TangencyError(ScatresError):
    """Grazing obstacle hit where the bounce map degenerates."""

    def __init__(self, message, time):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class EnergyDriftError(ScatresError):
    """Integrated trajectory violated the energy-drift bound."""


class EscapeError(ScatresError):
    """Orbit left the interaction region before the requested event."""


class ConstructionError(ScatresError):
    """A geometric object (chart, projector) could not be built as required."""


class ConsistencyError(ScatresError):
    """An internal cross-check failed (winding sums, block disjointness, ...)."""


class TwistError(ScatresError):
    """Mixed second derivative of a generating function fell below the floor."""


class AliasingError(ScatresError):
    """Quadrature grid too coarse for the oscillatory kernel."""

    def __init__(self, message, required_nodes):
        super().__init__(f"{message}; at least {required_nodes} nodes required")
        self.required_nodes = required_nodes


class ModelError(ScatresError):
    """Symbolic model unusable for the requested discretization."""


class BracketError(ScatresError):
    """Root bracketing failed (no sign change in the search interval)."""


class BudgetError(ScatresError):
    """Enumeration or sampling exceeded its configured budget."""


class BoundaryAmbiguityError(ScatresError):
    """A determinant zero sits on the search-domain boundary after retries."""


class ResolutionError(ScatresError):
    """Semiclassical parameter too large for the requested construction."""


class AssemblyError(ScatresError):
    """Block-operator assembly received incompatible pieces."""
