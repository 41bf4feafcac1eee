"""Exception types raised by charflow operations."""


class CharflowError(Exception):
    """Base class for all charflow errors."""


class AmbiguousProjection(CharflowError):
    """Side classification refused: nearest stop-set point is a node or non-unique."""


class OutOfDomain(CharflowError):
    """Time value outside the admissible range [0, 1] beyond tolerance."""


class NearStopSet(CharflowError):
    """Evaluation or integration requested too close to the stop set."""


class DegenerateField(CharflowError):
    """A sampled gradient magnitude was not strictly positive."""


class NotCausal(CharflowError):
    """Transport field violates the causality condition at some sample."""


class StepLimit(CharflowError):
    """Characteristic integration exceeded the step budget."""


class LeftDomain(CharflowError):
    """Characteristic iterate escaped the domain bounding box."""


class LevelNotFound(CharflowError):
    """A requested level line of the time function could not be traced."""


class NodeProximity(CharflowError):
    """A stop-set sample fell inside the node exclusion radius."""


class MissingAux(CharflowError):
    """Auxiliary L1 field norms are required but were not supplied."""


class EmptyMask(CharflowError):
    """Raster mask contains no inside pixels."""


class DisconnectedMask(CharflowError):
    """Raster mask has more than one connected inside region."""


class MaskMismatch(CharflowError):
    """Image and mask dimensions differ, or the mask touches the image border."""


class UnreadableImage(CharflowError):
    """File is not a PGM (P2/P5) or PPM (P6) image charflow can parse."""
