from __future__ import annotations

import typing as t

from . import exceptions

__all__ = ("Registry",)

T = t.TypeVar("T")


class Registry(t.Generic[T]):
    """
    A small registry of named factories, e.g. the feature extractor kinds an agent can be built with.

    ```python
    extractors = Registry("extractor")

    @extractors.register("mbtf")
    class MBTFExtractor: ...

    extractors["mbtf"]  # -> MBTFExtractor
    ```
    """

    def __init__(self, kind: str, *, override: bool = False) -> None:
        """
        Create a new registry.

        :param kind: What the registry holds; used in error messages.
        :param override: When set to True, allows a new entry to replace a previously registered one.
        """
        self.kind = kind
        self._override = override
        self.__entries: t.Dict[str, T] = {}

    def __repr__(self) -> str:
        return f"Registry(kind={self.kind!r}, names={list(self.__entries)!r})"

    def __len__(self) -> int:
        return len(self.__entries)

    def __contains__(self, value: str) -> bool:
        return value in self.__entries

    def __iter__(self) -> t.Iterator[str]:
        return iter(self.__entries)

    def __register(self, obj: T, name: str) -> None:
        entry = self.__entries.get(name)
        if (entry is not None and entry is not obj) and not self._override:
            raise exceptions.RegistryException(kind=self.kind, name=name, registered=True)
        self.__entries[name] = obj

    def __setitem__(self, key: str, value: T) -> None:
        self.__register(value, key)

    def __getitem__(self, key: str) -> T:
        if (entry := self.__entries.get(key)) is None:
            raise exceptions.RegistryException(kind=self.kind, name=key, registered=False)
        return entry

    def register(self, name: str) -> t.Callable[[T], T]:
        """
        Decorator registering an object under `name`.

        :param name: Name to register the object under.
        """

        def decorator(obj: T) -> T:
            self.__register(obj, name)
            return obj

        return decorator

    def names(self) -> t.List[str]:
        """Registered names, in registration order."""
        return list(self.__entries)
