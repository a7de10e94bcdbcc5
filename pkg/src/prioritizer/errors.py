"""Exception taxonomy shared across the package.

Every error raised on a user-facing path derives from :class:`PrioritizerError`
and carries a short machine-readable ``category``; the CLI prints failures as
one line in the form ``<category>: <message>``.
"""


class PrioritizerError(Exception):
    category = "error"


class FormatError(PrioritizerError):
    """A binary file violates the NNWB/TBIN format (magic, dtype, truncation)."""

    category = "format"


class SchemaError(PrioritizerError):
    """A model manifest violates the JSON schema or a structural constraint."""

    category = "schema"


class MissingWeightError(SchemaError):
    """A layer references a tensor name absent from the weights blob."""

    category = "missing-weight"


class ShapeError(PrioritizerError):
    """Tensor shapes or layer shape chains do not line up."""

    category = "shape"


class NonFiniteError(PrioritizerError):
    """NaN or Inf encountered where finite values are required."""

    category = "non-finite"


class DataError(PrioritizerError):
    """Inputs are structurally valid but unusable for the requested operation."""

    category = "data"


class UsageError(PrioritizerError):
    """Command-line arguments are missing, inconsistent, or out of range."""

    category = "usage"
