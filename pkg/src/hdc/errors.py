"""Exception hierarchy shared across the engine.

Grouped so the CLI and the HTTP service can map failures to exit codes /
status codes uniformly: configuration problems vs. bad data vs. scorer
transport faults.
"""


class HdcError(Exception):
    """Base class for all engine errors."""


class TreeError(HdcError):
    """Base class for label-tree problems."""


class TreeParseError(TreeError):
    """The tree source is not well-formed in its declared format."""


class TreeStructureError(TreeError):
    """The parsed tree violates a structural invariant (cycle, multiple
    roots, duplicate sibling labels, empty tree, ...)."""


class UnknownNodeError(TreeError):
    """A node id or label does not exist in the tree."""


class PromptError(HdcError):
    """A prompt template has zero or multiple placeholders."""


class ScorerError(HdcError):
    """Base class for scorer failures."""


class ReplayKeyError(ScorerError):
    """A replay scorer was asked for an (image, label, sample) key that is
    not in its matrix."""


class RemoteScorerError(ScorerError):
    """Transport failure, protocol violation, or server-reported fault from
    a remote scorer."""


class ScorerFailure(ScorerError):
    """Wraps a scorer error with the offending (image, label, sample)."""

    def __init__(self, image_id, label, sample, cause):
        self.image_id = image_id
        self.label = label
        self.sample = sample
        self.cause = cause
        super().__init__(
            f"scorer failed for image={image_id!r} label={label!r} "
            f"t={getattr(sample, 't', None)} noise_id={getattr(sample, 'noise_id', None)}: {cause}"
        )


class ConfigError(HdcError):
    """An experiment configuration is invalid or references missing files."""


class DatasetMismatchError(HdcError):
    """Two reports being compared were produced from different datasets."""
