"""
Error Hierarchy

Every failure the toolkit reports on purpose derives from EvidentialError.
Each class carries the process exit code main.py uses for it:

- 2: usage / configuration problems
- 3: unreadable or malformed input data (IDX, risk matrices, checkpoints)
- 4: numerical failures (NaN/Inf, failed gradient checks)

Library precondition violations (bad shapes, overlapping label sets, frozen
parameter contracts) are ValueErrors as well, so callers can catch them the
usual way.
"""


class EvidentialError(Exception):
    """Base class for every error raised on purpose by the toolkit."""
    exit_code = 1


class ConfigError(EvidentialError):
    """Invalid or incomplete run configuration."""
    exit_code = 2


class DataError(EvidentialError):
    """Input data could not be read or is malformed."""
    exit_code = 3


class IdxFormatError(DataError):
    """IDX file with a wrong magic number, mismatched counts or truncated payload."""


class RiskMatrixError(DataError, ValueError):
    """Risk matrix with negative entries, a non-zero diagonal or a bad shape."""


class CheckpointError(DataError):
    """Checkpoint file that cannot be loaded."""


class CheckpointMagicError(CheckpointError):
    """File does not start with the checkpoint magic bytes."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written with an unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint ends before all declared records were read."""


class CheckpointShapeError(CheckpointError):
    """Checkpoint tensors do not match the expected model shape."""


class NumericalError(EvidentialError):
    """Non-finite values or failed gradient checks."""
    exit_code = 4


class ShapeError(EvidentialError, ValueError):
    """Operands with incompatible shapes."""
    exit_code = 4


class DirichletError(EvidentialError, ValueError):
    """Invalid Dirichlet parameters or operation arguments."""
    exit_code = 4


class MetricsError(EvidentialError, ValueError):
    """Metric called on empty or out-of-range inputs."""
    exit_code = 4


class ContractError(EvidentialError, ValueError):
    """Training contract violated (mode mismatch, unfrozen backbone, overlapping labels)."""
    exit_code = 2
