"""Exception hierarchy shared by every pipeline stage."""


class TECError(Exception):
    """Base class for all errors raised by the tec package."""


class FormatError(TECError):
    """An input file does not follow its documented format."""


class VocabularyError(TECError):
    """An entity is missing from a store, or vocabularies do not overlap."""


class ConfigError(TECError):
    """A configuration value is out of its allowed range."""


class ModelError(TECError):
    """A persisted topic model is unreadable or internally inconsistent."""
