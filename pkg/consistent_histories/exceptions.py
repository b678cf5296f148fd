"""Consistent Histories Exceptions"""


class HermiticityError(Exception):
    """Exception for an operator that should be Hermitian but is not"""
    pass


class DimensionMismatchError(ValueError):
    """Error indicating operators or specs whose subsystem dimensions disagree"""
    pass


class SubsystemSelectorError(IndexError):
    """Exception for a subsystem selector that is out of range or repeats an index"""
    pass


class InvalidStateError(Exception):
    """For density matrices that are not PSD or not unit trace beyond tolerance"""
    pass


class FamilyDefinitionError(Exception):
    """Error raised when a history family is malformed (partition, branch map or basis unitary)"""
    pass


class HistoryLabelError(ValueError):
    """Error raised for a history label that cannot be parsed or is out of range for its family"""
    pass


class ConfigError(Exception):
    """Error raised for unreadable, incomplete or inconsistent run configuration"""
    pass


class VerificationError(Exception):
    """Exception raised when a property suite fails"""

    def __init__(self, *args, invariant: str = None):
        """
        Parameters
        ----------
        invariant : str, Optional
            Name of the first invariant that failed
        """
        super().__init__(*args)
        self.invariant = invariant
