"""Exception hierarchy shared by all pipeline stages."""


class EkdeError(Exception):
    """Base class for every error raised by this package."""


class UnreadableFile(EkdeError):
    pass


class UnsupportedFormat(EkdeError):
    pass


class EmptyImage(EkdeError):
    pass


class MalformedRow(EkdeError):
    pass


class EmptyManifest(EkdeError):
    pass


class DegenerateSample(EkdeError):
    """Sample spread is zero, so the bandwidth rule yields h == 0."""


class UnsortedQueries(EkdeError):
    pass


class AllCasesFailed(EkdeError):
    pass


class SingleClassData(EkdeError):
    pass


class SingularCovariance(EkdeError):
    pass


class SingularInformation(EkdeError):
    pass


class Diverged(EkdeError):
    """IRLS produced non-finite coefficients, usually from separable data with no ridge."""


class SchemaMismatch(EkdeError):
    pass


class LengthMismatch(EkdeError):
    pass


class EmptyInput(EkdeError):
    pass


class TooFewCases(EkdeError):
    pass
