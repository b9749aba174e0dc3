from typing import Optional, Sequence, Tuple


class CanonException(Exception):
    """Base exception for all daecanon errors"""

    def __init__(self, code: str = None, message: str = None):
        self.code = code
        self.message = message
        # Pipeline stages completed before the failure, when raised by run_pipeline
        self.partial = None
        super().__init__(self.message)


class ConfigurationError(CanonException):
    def __init__(self, message: str):
        super().__init__(code="configuration", message=message)


class ProblemFileError(CanonException):
    def __init__(self, message: str):
        super().__init__(code="problem_file", message=message)


class ExpressionSyntaxError(CanonException):
    """Raised by the expression parser; `position` is a 0-based character offset."""

    def __init__(self, source: str, position: int, message: str):
        self.source = source
        self.position = position
        super().__init__(
            code="syntax",
            message=f"{message} at position {position} in {source!r}",
        )


class UnboundIdentifierError(CanonException):
    def __init__(self, name: str, source: str = None):
        self.name = name
        where = f" in {source!r}" if source else ""
        super().__init__(code="unbound", message=f"Unbound identifier {name!r}{where}")


class DerivativeOrderError(CanonException):
    def __init__(self, order: int, limit: int):
        self.order = order
        self.limit = limit
        super().__init__(
            code="derivative_order",
            message=f"derivative of order {order} requested, configured maximum is {limit}",
        )


class BindingConflictError(CanonException):
    def __init__(self, name: str, left: float, right: float):
        super().__init__(
            code="bindings",
            message=f"parameter {name!r} bound to both {left} and {right}",
        )


class ShapeMismatchError(CanonException):
    def __init__(self, operation: str, left: Tuple[int, int], right: Tuple[int, int]):
        self.left = left
        self.right = right
        super().__init__(
            code="shape",
            message=f"Shape mismatch in {operation}: {left} vs {right}",
        )


class SingularAtSampleError(CanonException):
    """A matrix function lost rank at a validation sample inside the interval."""

    def __init__(self, t: float, what: str = "matrix"):
        self.t = t
        super().__init__(code="singular", message=f"{what} is singular at t={t:.12g}")


class EvaluationDomainError(CanonException):
    def __init__(self, t: float, message: str = "non-finite value"):
        self.t = t
        super().__init__(code="domain", message=f"Evaluation failed at t={t:.12g}: {message}")


class ExpressionGrowthError(CanonException):
    def __init__(self, nodes: int, limit: int, where: str = ""):
        self.nodes = nodes
        self.limit = limit
        super().__init__(
            code="growth",
            message=f"Expression size {nodes} exceeds the hard limit {limit} {where}".strip(),
        )


class NotSUTError(CanonException):
    """Matrix is not strictly block upper triangular for the given partition."""

    def __init__(self, message: str, block: Optional[Tuple[int, int]] = None):
        self.block = block
        super().__init__(code="not_sut", message=message)


class NotSUTColumnError(NotSUTError):
    pass


class NotSUTRowError(NotSUTError):
    pass


class NeedsSmoothFactorizationError(CanonException):
    def __init__(self, message: str, block: Optional[Tuple[int, int]] = None):
        self.block = block
        super().__init__(code="needs_smooth_factorization", message=message)


class NotNilpotentError(CanonException):
    def __init__(self, message: str = "matrix is not nilpotent"):
        super().__init__(code="not_nilpotent", message=message)


class PartitionMissingError(CanonException):
    def __init__(self, message: str = "pair carries no (d, a) partition"):
        super().__init__(code="partition_missing", message=message)


class DiagonalBlockSingularError(CanonException):
    def __init__(self, block: int, t: float, stage: str = ""):
        self.block = block
        self.t = t
        super().__init__(
            code="diagonal_block_singular",
            message=f"{stage} diagonal block {block} of F22 is singular at t={t:.12g}".strip(),
        )


class PreconditionError(CanonException):
    """A stage received a pair without the structure it requires."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(code="precondition", message=f"{stage}: {message}")


class RecursionFailedError(CanonException):
    def __init__(self, message: str):
        super().__init__(code="recursion_failed", message=message)


class RankDropError(CanonException):
    def __init__(self, message: str, t: Optional[float] = None):
        self.t = t
        super().__init__(code="rank_drop", message=message)


class BasisUnavailableError(CanonException):
    def __init__(self, message: str):
        super().__init__(code="basis_unavailable", message=message)


class SingularMassError(CanonException):
    def __init__(self, t: float):
        self.t = t
        super().__init__(code="singular_mass", message=f"mass matrix is singular at t={t:.12g}")


class InvalidPermutationError(CanonException):
    def __init__(self, permutation: Sequence[int], m: int):
        self.permutation = list(permutation)
        super().__init__(
            code="invalid_permutation",
            message=f"{list(permutation)} is not a permutation of range({m})",
        )


class StageMissingError(CanonException):
    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(code="stage_missing", message=f"pipeline result has no {stage} stage")


class CharacteristicsMismatchError(CanonException):
    def __init__(self, message: str):
        super().__init__(code="characteristics_mismatch", message=message)


class VerificationError(CanonException):
    """A computed stage does not reproduce its input under the stage transform."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(code="verification", message=f"{stage}: {message}")


class IntegrationError(CanonException):
    def __init__(self, message: str):
        super().__init__(code="integration", message=message)


# Exceptions the CLI reports as input errors (exit code 2)
INPUT_ERRORS = (
    ProblemFileError,
    ConfigurationError,
    ExpressionSyntaxError,
    UnboundIdentifierError,
    InvalidPermutationError,
)
