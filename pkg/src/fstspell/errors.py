"""Exception hierarchy shared by all fstspell modules.

The CLI maps DataError to exit code 1 and ConfigError to exit code 2;
everything else is a bug and surfaces as a traceback.
"""


class FstSpellError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FstSpellError):
    """Bad configuration: mismatched symbol tables, missing resources, empty pools."""


class DataError(FstSpellError):
    """Malformed input data: bad training pairs, ragged lists, unparseable files."""


class SymbolTableMismatchError(ConfigError):
    """Composition operands whose shared symbol tables disagree."""


class CyclicInputError(FstSpellError):
    """An operation that requires an acyclic FST received a cyclic one."""


class DivergenceError(FstSpellError):
    """An epsilon cycle whose path sum does not converge."""


class BudgetExceededError(FstSpellError):
    """Determinization expanded past the configured subset-state budget."""


class MalformedPathError(DataError):
    """A wordpiece path that does not start with a word-initial piece."""


class InventoryError(DataError):
    """A phoneme that is not present in the loaded inventory."""


class EmptyContextError(ConfigError):
    """No contextual entity could be mapped to phonemes."""
