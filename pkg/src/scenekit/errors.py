"""Exception hierarchy shared across scenekit modules."""


class ScenekitError(Exception):
    """Base class for all domain errors raised by scenekit."""


class EmptyScenario(ScenekitError):
    pass


class DegeneratePolyline(ScenekitError):
    pass


class OutOfRange(ScenekitError):
    pass


class MissingDirection(ScenekitError):
    pass


class EmptyMap(ScenekitError):
    pass


class InvalidSchedule(ScenekitError):
    pass


class ShapeMismatch(ScenekitError):
    pass


class EmptyGraph(ScenekitError):
    pass


class HorizonTooShort(ScenekitError):
    pass


class ParseError(ScenekitError):
    pass


class SchemaVersionMismatch(ParseError):
    pass
