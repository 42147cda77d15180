"""Exception and warning types shared across the toolkit."""

from __future__ import annotations


class SoupkitError(Exception):
    """Base class for every error raised by this package."""


class InvalidTensor(SoupkitError):
    """A tensor value is not finite, or a tensor definition is malformed."""


class BadMagic(SoupkitError):
    """A file does not start with the expected magic bytes."""


class UnsupportedVersion(SoupkitError):
    """A file declares a format version this build does not read."""


class HeaderMismatch(SoupkitError):
    """A file header disagrees with the bytes that follow it."""


class ShapeMismatch(SoupkitError):
    """Two tensor collections or a tensor and a batch are not compatible."""


class BadWeights(SoupkitError):
    """Mixture weights violate the convex-combination invariants."""


class Unsupported(SoupkitError):
    """A requested combination of arguments is outside the supported range."""


class Diverged(SoupkitError):
    """An objective became non-finite during optimization."""


class BatchTooSmall(SoupkitError):
    """A batch has too few rows for the requested neighbor count."""


class TooFewRefs(SoupkitError):
    """A reference set has too few rows for the requested neighbor count."""


class LengthMismatch(SoupkitError):
    """Two sequences that must align have different lengths."""


class NotSquare(SoupkitError):
    """Flattened inputs do not form square images."""


class IncompleteGrid(SoupkitError):
    """Simplex metric rows do not cover a full grid plus its corners."""


class MissingRows(SoupkitError):
    """A report was asked for rows that the metrics do not contain."""


class ExperimentFailed(SoupkitError):
    """One or more jobs of an experiment failed; partial results were kept."""


class EmptySplitWarning(UserWarning):
    """A deterministic split produced an empty side."""
