"""Exception and warning types raised across the audit toolkit."""


class BiasAuditError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class SchemaMismatch(BiasAuditError):
    pass


class ParseError(BiasAuditError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class UnknownAttribute(BiasAuditError):
    pass


class NonCategoricalAttribute(BiasAuditError):
    pass


class InvalidGroupKey(BiasAuditError):
    pass


class ProfileError(BiasAuditError):
    """Malformed audit profile document."""


class ProfileMismatch(BiasAuditError):
    """Profile refers to attributes the dataset does not have (or with the wrong type)."""


class EmptyColumn(BiasAuditError):
    pass


class EmptyDataset(BiasAuditError):
    pass


class SpaceTooLarge(BiasAuditError):
    pass


class EmptyGroup(BiasAuditError):
    pass


class MissingPredictionColumn(BiasAuditError):
    pass


class InsufficientGroups(BiasAuditError):
    pass


class NoCompleteRows(BiasAuditError):
    pass


class OutcomeNotBinary(BiasAuditError):
    pass


class SingleClassTarget(BiasAuditError):
    pass


class InvalidSplit(BiasAuditError):
    pass


class SampleTooSmall(BiasAuditError):
    pass


class NonFiniteValue(BiasAuditError):
    pass


class DegenerateSupport(BiasAuditError):
    pass


class EmptyCell(BiasAuditError):
    """A (group, label) combination has no rows, so its reweighing weight is undefined."""


class InvalidImputation(BiasAuditError):
    pass


class AllMissingAttribute(BiasAuditError):
    pass


class InsufficientDonors(BiasAuditError):
    pass


class InvalidK(BiasAuditError):
    pass


class DatasetTooSmall(BiasAuditError):
    pass


class InvalidSpec(BiasAuditError):
    pass


class InvalidPlan(BiasAuditError):
    pass


class NonConvergenceWarning(UserWarning):
    pass


class StratumTooSmallWarning(UserWarning):
    pass
