from __future__ import annotations

import sys
import typing as t

from pydantic import BaseModel

from . import exceptions

NoneType = type(None)

"""
A mapping of supported scalar and container types to their document type names.
"""
_SUPPORTED_TYPE_MAP = {
    str: "string",
    int: "integer",
    float: "number",
    bool: "boolean",
    list: "array",
    tuple: "array",
    dict: "object",
    t.List: "array",
    t.Tuple: "array",
    t.Dict: "object",
    # objects with properties
    t.NamedTuple: "object",
    BaseModel: "object",
    # enums
    t.Literal: "string",
}


def get_type_repr(__type: t.Any) -> str:
    """
    Get a string representation of a type.

    :param __type: The type to represent.
    """
    if isinstance(__type, tuple):
        return " | ".join(get_type_repr(_t) for _t in __type)
    get_name = lambda _t: getattr(_t, "__name__", repr(_t))

    module = getattr(__type, "__module__", "builtins")
    if module == "builtins":
        return get_name(__type)
    return f"{module}.{get_name(__type).split('.')[-1]}"


_SUPPORTED_TYPES_REPR = " | ".join(get_type_repr(_t) for _t in _SUPPORTED_TYPE_MAP)


def check_subclass(__obj: t.Any, cls: t.Any) -> bool:
    """
    Check if an object is a subclass of a given class.

    :param __obj: The object to check.
    :param cls: The class to check against.
    """
    return isinstance(__obj, type) and isinstance(cls, type) and issubclass(__obj, cls)


if sys.version_info >= (3, 10):
    from types import UnionType

    def is_union_type(__annotation: t.Any) -> bool:
        """
        Check if the given annotation is a Union type.

        :param __annotation: The type annotation to check.
        """
        return __annotation in (t.Union, UnionType)
else:

    def is_union_type(__annotation: t.Any) -> bool:
        """
        Check if the given annotation is a Union type.

        :param __annotation: The type annotation to check.
        """
        return __annotation is t.Union


class AnnotationInfo(t.NamedTuple):
    base_type: t.Any
    args: t.List[t.Any]
    is_optional: bool


def extract_annotation_info(__annotation: t.Any) -> AnnotationInfo:
    """
    Extract info from an already resolved annotation.

    :param __annotation: The annotation to extract info from.
    :raises exceptions.UnsupportedTypeException: If the union or literal form is not supported.
    """
    is_optional = False
    base_type = t.get_origin(__annotation) or __annotation
    args = list(t.get_args(__annotation))

    if is_union_type(base_type):  # extract base type and set is_optional to True
        if len(args) != 2 or NoneType not in args:
            raise exceptions.UnsupportedTypeException(
                type_hint_repr=repr(__annotation),
                parent_type_repr="Union",
                supported_repr="'typing.Optional[<type>]', 'typing.Union[<type>, None]', '<type> | None'",
            )
        is_optional = True
        base_type, args, _ = extract_annotation_info(args[1 if args.index(NoneType) == 0 else 0])

    if base_type is t.Literal:
        arg_types = list({type(e) for e in args})
        if len(arg_types) != 1:
            raise exceptions.UnsupportedTypeException(
                type_hint_repr=repr(__annotation),
                parent_type_repr="Literal",
                supported_repr="args must be of same type",
            )
        if (arg_type := arg_types[0]) not in (str, int, float, bool):
            raise exceptions.UnsupportedTypeException(
                type_hint_repr=get_type_repr(arg_type),
                parent_type_repr="Literal",
                supported_repr="'str', 'int', 'float', 'bool'",
            )
    elif base_type in (tuple, t.Tuple) and args and args[-1] is Ellipsis:
        args = args[:1]  # Tuple[T, ...] is a homogeneous sequence of T

    return AnnotationInfo(base_type=base_type, args=args, is_optional=is_optional)


def field_hints(__cls: type) -> t.Dict[str, t.Any]:
    """
    Resolve the field annotations of a NamedTuple or pydantic model.

    Postponed (string) annotations are evaluated in the defining module; pydantic models
    report the annotations pydantic already resolved.

    :param __cls: The class to inspect.
    """
    if is_pydantic_model(__cls):
        return {k: f.annotation for k, f in __cls.model_fields.items()}
    return t.get_type_hints(__cls)


def is_pydantic_model(__obj: t.Any) -> bool:
    """
    Check if an object is a Pydantic model class.

    :param __obj: The object to check.
    """
    return check_subclass(__obj, BaseModel)


def is_namedtuple(__obj: t.Any) -> bool:
    """
    Check if an object is a `NamedTuple` class.

    :param __obj: The object to check.
    """
    return (
        isinstance(__obj, type)
        and issubclass(__obj, tuple)
        and isinstance(getattr(__obj, "_fields", None), tuple)
        and isinstance(getattr(__obj, "_field_defaults", None), dict)
        and all(isinstance(f, str) for f in __obj._fields)
    )


NamedTuple = t.TypeVar("NamedTuple", bound=t.Tuple[t.Any, ...])
PydanticModel = t.TypeVar("PydanticModel", bound=BaseModel)


class FieldSchema(t.TypedDict, total=False):
    type: str
    description: str
    default: t.Any
    enum: t.Sequence[t.Any]
    items: "FieldSchema"
    properties: t.Mapping[str, "FieldSchema"]
    required: t.Sequence[str]
