from __future__ import annotations

from typing import Any, List, Sequence


class DrlabException(Exception):
    """Base class of every exception raised by drlab."""


class ScenarioValidationException(DrlabException):
    """
    Exception raised when a scenario breaks one or more of its invariants.

    The individual violations are kept on the `violations` attribute.
    """

    def __init__(self, *, violations: Sequence[Any]) -> None:
        """
        :param violations: The violations reported by `validate_scenario`.
        """
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"Scenario has {len(self.violations)} violation(s):\n{lines}")


class RegistryException(DrlabException):
    """
    Exception raised for errors related to a named registry.

    This exception is raised when attempting to register a name that already exists
    or when trying to use a name that hasn't been registered.
    """

    def __init__(self, *, kind: str, name: str, registered: bool) -> None:
        """
        :param kind: What the registry holds, e.g. "extractor".
        :param name: The name causing the exception.
        :param registered: Whether the name is already registered or not.
        """
        if registered is True:
            message = f"{kind.capitalize()} with name {name!r} is already registered."
        else:
            message = f"{kind.capitalize()} with name {name!r} has not been registered."
        super().__init__(message)


class UnsupportedTypeException(DrlabException):
    """
    Exception raised when a config field carries a type hint the compile layer cannot handle.
    """

    def __init__(
        self, *, type_hint_repr: str, parent_type_repr: str | None = None, supported_repr: str
    ) -> None:
        """
        :param type_hint_repr: String representation of the unsupported type hint.
        :param parent_type_repr: String representation of the parent type, if applicable.
        :param supported_repr: String representation of the supported types or type hints.
        """
        message = f"{type_hint_repr!r} typehint is not supported"
        if parent_type_repr:
            message += f" as {parent_type_repr!r} type"

        super().__init__(f"{message}. Supported: {supported_repr}")


class TypeMismatchException(DrlabException):
    """
    Exception raised when a raw config value has an unexpected type.

    Examples:
        - For a float field, expected_type_repr is 'float'
        - For a tuple or list field, expected_type_repr is 'list'
        - For a nested config section, expected_type_repr is 'dict'
    """

    def __init__(
        self,
        *,
        expected_type_repr: str,
        target_type_repr: str | None = None,
        received_type_repr: str,
        label: str | None = None,
    ) -> None:
        """
        :param expected_type_repr: String representation of the expected raw type.
        :param target_type_repr: String representation of the target type being compiled.
        :param received_type_repr: String representation of the actually received type.
        :param label: Dotted path of the field, when known.
        """
        message = f"Expected value of type {expected_type_repr!r}"
        if target_type_repr:
            message += f" for {target_type_repr!r} deserialization"
        if label:
            message += f" at {label!r}"
        super().__init__(f"{message}, but received value of type {received_type_repr!r} instead.")


class RequiredParameterException(DrlabException):
    """
    Exception raised when a required config field is missing.
    """

    def __init__(self, *, label: str, type_base: str, type_name: str) -> None:
        """
        :param label: The name of the missing field.
        :param type_base: The base type (e.g. "NamedTuple") that requires the field.
        :param type_name: The name of the object that requires the field.
        """
        super().__init__(f"{type_name!r} {type_base} required field {label!r} missing.")


class InvalidArgumentException(DrlabException):
    """
    Exception raised when a value of the correct type is not one of the allowed values.
    """

    def __init__(self, *, arg: Any, type_base: str, valid_args: List[Any]) -> None:
        """
        :param arg: The invalid argument that was provided.
        :param type_base: The base type or category of the argument (e.g. "literal").
        :param valid_args: A list of valid arguments for the given context.
        """
        super().__init__(
            f"{arg!r} is not a valid {type_base} member. Valid arguments: {valid_args!r}"
        )


class CalendarRangeException(DrlabException):
    """Exception raised when a calendar component falls outside its encoding range."""

    def __init__(self, *, component: str, value: int, upper: int) -> None:
        """
        :param component: Calendar component name (hour, week or month).
        :param value: The offending value.
        :param upper: Largest accepted value; the lower bound is always 0.
        """
        super().__init__(f"{component} must lie in [0, {upper}], got {value!r}.")


class SeriesCoverageException(DrlabException):
    """Exception raised when the market series cannot supply an observation window."""

    def __init__(self, *, needed: int, available: int) -> None:
        """
        :param needed: Market index the window requires.
        :param available: Length of the market series.
        """
        super().__init__(
            f"Observation window needs market index {needed}, but the series has only "
            f"{available} samples."
        )


class EpisodeFinishedException(DrlabException):
    """Exception raised when stepping an environment whose episode is already over."""

    def __init__(self, *, t: int, horizon: int) -> None:
        super().__init__(f"Episode finished: period {t} is not below horizon {horizon}. Call reset.")


class SeriesFormatException(DrlabException):
    """
    Exception raised for malformed series files or invalid series transforms.
    """

    def __init__(self, *, source: str, reason: str, row: int | None = None) -> None:
        """
        :param source: File path or series name.
        :param reason: What is wrong.
        :param row: Line number in the file (the header is line 1), when the problem is tied to one row.
        """
        where = f"{source} (row {row})" if row is not None else source
        super().__init__(f"{where}: {reason}")


class ShapeMismatchException(DrlabException):
    """Exception raised when an array reaching a layer has the wrong shape."""

    def __init__(self, *, where: str, expected: Any, received: Any) -> None:
        """
        :param where: Layer or parameter name.
        :param expected: Expected shape or size.
        :param received: Received shape or size.
        """
        super().__init__(f"{where}: expected shape {expected!r}, received {received!r}.")


class MissingForwardCacheException(DrlabException):
    """Exception raised when backward is requested before a forward pass."""

    def __init__(self, *, network: str) -> None:
        super().__init__(f"{network}: backward called without a cached forward pass.")


class ArchiveVersionException(DrlabException):
    """Exception raised when a parameter archive has an unknown version tag."""

    def __init__(self, *, path: str, found: str, expected: str) -> None:
        super().__init__(f"{path}: archive version {found!r} is not supported (expected {expected!r}).")


class InsufficientBufferException(DrlabException):
    """Exception raised when a training step is requested with too few stored transitions."""

    def __init__(self, *, size: int, batch: int) -> None:
        super().__init__(f"Replay buffer holds {size} transitions, a batch needs {batch}.")


class OracleGuardException(DrlabException):
    """
    Exception raised when an oracle search would exceed its size guard.
    """

    def __init__(self, *, what: str, size: float, limit: float) -> None:
        """
        :param what: The quantity being guarded (e.g. "action sequences").
        :param size: The requested size.
        :param limit: The guard.
        """
        super().__init__(f"Oracle guard exceeded: {size:.4g} {what} > limit {limit:.4g}.")
