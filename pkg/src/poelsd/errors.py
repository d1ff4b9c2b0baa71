class ImageFormatError(ValueError):
    """Unreadable, multi-channel or out-of-range image input."""


class DegenerateFitError(ValueError):
    """A region whose pixels do not define a line (zero weight or coincident points)."""
