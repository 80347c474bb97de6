"""Sentence-level information types for product reviews, scored by repeated
yes/no queries to an instruction-tuned language model."""
from .errors import ConfigError, DataError, InfoTypesError
from .typology import GROUP_NAMES, TYPE_NAMES, InfoType

__version__ = "0.1.0"
