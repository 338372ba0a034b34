"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) so that the service
layer can persist and surface it verbatim. Row-level errors also carry the
1-based line number of the offending CSV row (the header is line 1).
"""

from __future__ import annotations


class RadbenchError(Exception):
    """Base class for all domain errors."""

    def __init__(self, message: str = "", *, row: int | None = None, detail: str | None = None):
        self.row = row
        self.detail = detail
        text = message or self.__class__.__name__
        if row is not None:
            text = f"row {row}: {text}"
        super().__init__(text)

    @property
    def code(self) -> str:
        return self.__class__.__name__

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        if self.row is not None:
            out["row"] = self.row
        if self.detail is not None:
            out["detail"] = self.detail
        submission_id = getattr(self, "submission_id", None)
        if submission_id is not None:
            out["submission_id"] = submission_id
        return out


# taxonomy
class UnknownCountry(RadbenchError):
    pass


class AgeOutOfRange(RadbenchError):
    pass


class TaxonomyError(RadbenchError):
    pass


# cohort
class MissingColumn(RadbenchError):
    pass


class DuplicateCaseId(RadbenchError):
    pass


class BadAge(RadbenchError):
    pass


class BadSex(RadbenchError):
    pass


class UnknownLabel(RadbenchError):
    pass


class MalformedRow(RadbenchError):
    pass


class NegativeAge(RadbenchError):
    pass


class IllegalTransition(RadbenchError):
    pass


class NotPanelMember(RadbenchError):
    pass


class NotApproved(RadbenchError):
    pass


class EmptySet(RadbenchError):
    pass


class ReviewLocked(RadbenchError):
    pass


class BadVocabulary(RadbenchError):
    pass


# metrics
class LengthMismatch(RadbenchError):
    pass


class EmptyInput(RadbenchError):
    pass


class SingleClass(RadbenchError):
    pass


class AllUndefined(RadbenchError):
    pass


# submission
class SubmissionError(RadbenchError):
    """Base for everything parse_submission can raise."""


class MissingCase(SubmissionError):
    pass


class UnknownCase(SubmissionError):
    pass


class DuplicateCase(SubmissionError):
    pass


class BlankClass(SubmissionError):
    pass


class BadProbability(SubmissionError):
    pass


class ProbabilitySumViolation(SubmissionError):
    pass


class PartialProbabilityColumns(SubmissionError):
    pass


class ArgmaxMismatch(SubmissionError):
    pass


class BadHeader(SubmissionError):
    pass


class BadOrigin(RadbenchError):
    pass


# baseline
class NoRadiologistsAnywhere(RadbenchError):
    pass


class VersionMismatch(RadbenchError):
    pass


class DuplicateRead(RadbenchError):
    pass


# platform
class NotVerified(RadbenchError):
    pass


class NotFound(RadbenchError):
    pass


class NotScored(RadbenchError):
    pass


class DuplicateCondition(RadbenchError):
    pass


class Unauthorized(RadbenchError):
    pass


class Forbidden(RadbenchError):
    pass
