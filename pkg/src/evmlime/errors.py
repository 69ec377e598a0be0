"""Exception hierarchy.

Every error raised on bad input derives from :class:`DataError` so the CLI
can map it to exit code 2 in one place.
"""


class DataError(ValueError):
    """Base class for errors caused by malformed or unsuitable input data."""


class NonHexCharacter(DataError):
    pass


class OddNibbleCount(DataError):
    pass


class EmptyDataset(DataError):
    pass


class MissingLabelColumn(DataError):
    pass


class NonNumericCell(DataError):
    pass


class RaggedRow(DataError):
    pass


class MissingFile(DataError):
    pass


class SingleClassDataset(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class TooFewSamples(DataError):
    pass


class EmptyInput(DataError):
    pass


class MissingFeature(DataError):
    pass


class NonBinaryFeature(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SingularSystem(DataError):
    pass
