"""Exception types shared across the pipeline.

Every error raised by leafsift derives from :class:`LeafsiftError` so callers
can catch the whole family with one clause.  Subclasses are deliberately thin;
the message carries the detail.
"""


class LeafsiftError(Exception):
    """Base class for all leafsift errors."""


# --- imaging ---------------------------------------------------------------

class MalformedFile(LeafsiftError):
    """Input bytes do not form a valid image file."""


class DimensionTooSmall(LeafsiftError):
    """Image smaller than the operation's minimum size."""


class DimensionMismatch(LeafsiftError):
    """Two rasters that must share dimensions do not."""


# --- dataset ---------------------------------------------------------------

class EmptyDataset(LeafsiftError):
    """Dataset root contains no class directories or no images."""


class UnreadableEntry(LeafsiftError):
    """A directory entry could not be read while scanning."""


# --- neural runtime --------------------------------------------------------

class ShapeMismatch(LeafsiftError):
    """Tensor shapes incompatible with the requested operation."""


class MissingWeight(LeafsiftError):
    """WeightStore lacks a parameter the network requires."""


class UnknownArchitecture(LeafsiftError):
    """Architecture name not in the built-in catalog."""


class UnsupportedLayerForTraining(LeafsiftError):
    """Network contains a layer the trainer cannot differentiate."""


# --- weight files ----------------------------------------------------------

class BadMagic(LeafsiftError):
    """Weight file does not start with the LFWT magic."""


class Truncated(LeafsiftError):
    """Weight file ends before the declared payload."""


class ShapeMismatchWithSpec(LeafsiftError):
    """Stored tensor shape disagrees with the network definition."""


# --- metrics ---------------------------------------------------------------

class LabelOutOfRange(LeafsiftError):
    """A label falls outside [0, K)."""


class LengthMismatch(LeafsiftError):
    """Paired label sequences differ in length."""


class EmptyMatrix(LeafsiftError):
    """Confusion matrix has zero total count."""


class DegenerateClass(LeafsiftError):
    """ROC requested for a class with no positives or no negatives."""


class InconsistentDimensions(LeafsiftError):
    """Report inputs disagree on the number of classes."""
