"""Shared exception types."""


class FundcascadeError(Exception):
    """Base class for all simulator errors."""


class InvalidConfig(FundcascadeError):
    """A population or plan configuration violates its invariants."""


class ConfigError(FundcascadeError):
    """An experiment config file could not be read, parsed, or validated."""


class CrossedBook(FundcascadeError):
    """A limit order would cross the opposite side at placement.

    Quote anchoring makes this unreachable in a well-sequenced simulation,
    so raising it signals an engine bug rather than bad user input.
    """


class BookExhausted(FundcascadeError):
    """A market order asked for more size than rests on the opposite side.

    The dominant fund is assumed unable to swallow a whole side of the book;
    runs that hit this abort and report it.
    """


class NonTermination(FundcascadeError):
    """The intra-period trigger cascade exceeded the configured wave cap."""


class InsufficientDepth(FundcascadeError):
    """A closed-form evaluation indexed past the end of an activation ladder."""
