"""Exception types shared across the toolkit.

Everything user-facing derives from :class:`ToolkitError` so the CLI can map
data and validation problems to a single exit code.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors caused by bad inputs or state."""


class RecordValidationError(ToolkitError):
    """A prediction record (or record file) violates the format contract."""


class FeatureMaskError(ToolkitError):
    """An ablation mask names unknown groups or empties the feature vector."""


class MissingFieldError(ToolkitError):
    """A record lacks an optional field required by the requested method."""


class DegenerateLabelsError(ToolkitError):
    """Training labels contain a single class."""


class CatalogMismatchError(ToolkitError):
    """A feature vector does not match the catalog a model was trained on."""


class ForestFormatError(ToolkitError):
    """A persisted forest file is malformed or has the wrong version."""
