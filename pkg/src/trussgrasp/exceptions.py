"""Exception hierarchy.

Each pipeline error carries the stage it belongs to so batch drivers can
tally failures per stage without inspecting messages.
"""


class TrussError(Exception):
    """Base class for all errors raised by trussgrasp."""

    stage = None


class DegenerateInput(TrussError, ValueError):
    stage = "segmentation"


class EmptyForeground(TrussError, ValueError):
    stage = "segmentation"


class NoTomatoes(TrussError, ValueError):
    stage = "tomato"


class EmptyStem(TrussError, ValueError):
    stage = "peduncle"


class NoStem(TrussError, ValueError):
    stage = "peduncle"


class DegenerateEdge(TrussError, ValueError):
    stage = "peduncle"


class NoValidGrasp(TrussError):
    stage = "planning"


class OutOfWorkspace(TrussError):
    stage = "planning"


class SpecViolation(TrussError, ValueError):
    """A synthetic truss description violates its own invariants."""


class ConfigError(TrussError, ValueError):
    """Invalid or unknown configuration keys."""


class ManifestError(TrussError, ValueError):
    """Corpus manifest or ground-truth sidecar does not match the schema."""
