"""Exception hierarchy shared across the toolchain."""


class FlowCompileError(Exception):
    """Base class for all toolchain errors."""


# --- flowgraph ---

class GraphSyntaxError(FlowCompileError):
    """Malformed flowgraph document; carries a position when available."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} (at {position})")
        self.position = position


class GraphReferenceError(FlowCompileError):
    """An edge names a node that does not exist."""

    def __init__(self, node_id, message=None):
        super().__init__(message or f"edge references unknown node {node_id!r}")
        self.node_id = node_id


class StructureError(FlowCompileError):
    """The document parsed but violates a graph invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v.code}:{v.element}" for v in self.violations))


# --- pathkit ---

class PathExplosion(FlowCompileError):
    """Acyclic path count exceeds the configured cap; sample instead."""


class DeadEnd(FlowCompileError):
    """Random walk stuck at a non-terminal node with no admissible edge."""

    def __init__(self, node_id):
        super().__init__(f"walk stuck at non-terminal node {node_id!r}")
        self.node_id = node_id


# --- scenario ---

class EmptyDomain(FlowCompileError):
    """A scenario variable has an empty domain."""


class UnboundPlaceholder(FlowCompileError):
    """A template placeholder has no binding."""

    def __init__(self, name):
        super().__init__(f"unbound placeholder {{{{{name}}}}}")
        self.name = name


# --- llmgate ---

class TransportError(FlowCompileError):
    """Transient provider failures exhausted all retries."""


class AuthError(FlowCompileError):
    """Non-retryable authentication / authorization failure."""


class MalformedResponse(FlowCompileError):
    """Provider returned an unparseable body."""

    def __init__(self, message, raw_body=""):
        super().__init__(message)
        self.raw_body = raw_body


# --- orchestrator / runtime ---

class TemplateError(FlowCompileError):
    """Node template could not be rendered for the active scenario."""


class RoutingFailure(FlowCompileError):
    """Classifier failed to pick an edge after all retries."""

    def __init__(self, hub, raw):
        super().__init__(f"routing failed at hub {hub!r}")
        self.hub = hub
        self.raw = raw


# --- judge ---

class JudgeParseError(FlowCompileError):
    """Judge reply could not be parsed into a scorecard."""

    def __init__(self, raw):
        super().__init__("unparseable judge reply")
        self.raw = raw


# --- stats ---

class KeyMismatch(FlowCompileError):
    """Paired comparison received scorecard sets with different key sets."""


class DegenerateVariance(FlowCompileError):
    """Pooled SD is zero but the means differ; effect size undefined."""


# --- costmodel ---

class NonPositiveSaving(FlowCompileError):
    """Break-even is undefined when per-conversation saving is <= 0."""


# --- convgen ---

class GraphMismatch(FlowCompileError):
    """Datasets built from different graphs cannot be merged."""
