"""Exception hierarchy shared across the package."""


class AtmocatError(Exception):
    """Base class for every error raised deliberately by this package."""


# crawling
class MalformedUrl(AtmocatError, ValueError):
    pass


class TaskNotRunning(AtmocatError):
    pass


class TransportError(AtmocatError):
    """Transient network failure raised by an HTTP transport."""


class TransportTimeout(TransportError):
    pass


class FetchFailed(AtmocatError):
    pass


# capabilities parsing
class CapabilitiesError(AtmocatError):
    pass


class MalformedXml(CapabilitiesError):
    pass


class NotCapabilities(CapabilitiesError):
    pass


class UnsupportedVersion(CapabilitiesError):
    pass


# semantic filter
class EmptyVocabulary(AtmocatError):
    pass


# catalogue store
class StorageFailure(AtmocatError):
    pass


class DuplicateUser(AtmocatError):
    pass


class InvalidEmail(AtmocatError, ValueError):
    pass


class UnknownUser(AtmocatError, KeyError):
    pass


class UnknownWorkspace(AtmocatError, KeyError):
    pass


class UnknownLayer(AtmocatError, KeyError):
    pass


class UnknownService(AtmocatError, KeyError):
    pass


class DisplayOrderConflict(AtmocatError):
    pass


class LinkNotFound(AtmocatError):
    pass


class LinkExists(AtmocatError):
    pass


class LayerInUse(AtmocatError):
    pass


class MalformedDocument(AtmocatError, ValueError):
    pass


# query
class CqlSyntaxError(AtmocatError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class InvalidQuery(AtmocatError, ValueError):
    def __init__(self, message, locator=None):
        super().__init__(message)
        self.locator = locator


# scoring
class NoSamples(AtmocatError):
    pass


class InvalidWeights(AtmocatError, ValueError):
    pass


# statistics / workflows
class InvalidK(AtmocatError, ValueError):
    pass


class NoPlan(AtmocatError):
    pass


# configuration
class ConfigError(AtmocatError):
    pass
