"""
Compile raw configuration documents (parsed YAML/JSON) into typed config objects.

Every field is coerced according to its type hint; nested sections become nested
NamedTuples or pydantic models.
"""

from __future__ import annotations

import json
import typing as t

from . import _types as ts
from . import exceptions

__all__ = "compile_value", "compile_object"


def _join(label: str, key: t.Any) -> str:
    if isinstance(key, int):
        return f"{label}[{key}]"
    return f"{label}.{key}" if label else str(key)


def compile_pydantic_object(
    __model: type[ts.PydanticModel], arguments: t.Mapping[str, t.Any], label: str = ""
) -> ts.PydanticModel:
    """
    Compile a Pydantic model object with the given arguments.

    Field constraints declared on the model are enforced by pydantic itself.

    :param __model: The Pydantic model to compile.
    :param arguments: The raw field values.
    :param label: Dotted path of the section, for error messages.

    :raises exceptions.RequiredParameterException: If a required field is missing
    """
    name, fields = __model.__name__, {}
    hints = ts.field_hints(__model)
    for key, field in __model.model_fields.items():
        annot_info = ts.extract_annotation_info(hints.get(key, field.annotation))
        value, is_optional = compile_value(annot_info, arguments.get(key), _join(label, key))
        if value is None:
            if not is_optional and field.is_required():
                raise exceptions.RequiredParameterException(
                    label=key, type_base="pydantic model", type_name=name
                )
            continue
        fields[key] = value

    return __model(**fields)


def compile_namedtuple_object(
    __nt: type[ts.NamedTuple], arguments: t.Any, label: str = ""
) -> ts.NamedTuple:
    """
    Compile a NamedTuple object with the given arguments.

    Arguments may be a mapping of field names or a positional sequence.

    :param __nt: The NamedTuple to compile.
    :param arguments: The raw field values.
    :param label: Dotted path of the section, for error messages.

    :raises exceptions.RequiredParameterException: If a required field is missing
    """
    name, fields = __nt.__name__, {}
    if isinstance(arguments, (list, tuple)):
        arguments = dict(zip(__nt._fields, arguments))

    for key, annotation in ts.field_hints(__nt).items():
        annot_info = ts.extract_annotation_info(annotation)
        value, is_optional = compile_value(annot_info, arguments.get(key), _join(label, key))
        if value is None:
            if key in __nt._field_defaults:
                value = __nt._field_defaults[key]
            elif not is_optional:
                raise exceptions.RequiredParameterException(
                    label=key, type_base="NamedTuple", type_name=name
                )
        fields[key] = value

    return __nt(**fields)


def _get_obj_compiler(__obj: t.Any):
    if ts.is_pydantic_model(__obj):
        return compile_pydantic_object
    elif ts.is_namedtuple(__obj):
        return compile_namedtuple_object
    return None


def compile_value(  # noqa: C901
    __info: ts.AnnotationInfo, raw_value: t.Optional[t.Any], label: str = ""
) -> t.Tuple[t.Optional[t.Any], bool]:
    """
    Compile the raw value based on the given annotation info.

    :param __info: The annotation info to use for compiling.
    :param raw_value: The raw value to compile.
    :param label: Dotted path of the value, for error messages.

    :raises exceptions.TypeMismatchException: If the raw value doesn't match the expected type
    :raises exceptions.InvalidArgumentException: If the argument is invalid for Literal types
    :raises exceptions.UnsupportedTypeException: If the type is not supported
    """
    _type, args, is_optional = __info

    if raw_value is None:
        return None, is_optional

    type_repr = ts.get_type_repr(_type)
    raw_value_type = ts.get_type_repr(type(raw_value))

    def validate(e_type: t.Any, t_type_repr: str | None = type_repr):
        nonlocal raw_value
        exc = exceptions.TypeMismatchException(
            expected_type_repr=ts.get_type_repr(e_type),
            target_type_repr=t_type_repr,
            received_type_repr=raw_value_type,
            label=label or None,
        )
        if isinstance(raw_value, bool) and e_type in (int, float):
            raise exc
        if isinstance(raw_value, e_type):
            return
        if e_type is float and isinstance(raw_value, int):
            raw_value = float(raw_value)
            return
        if e_type not in (str, float, int):
            raise exc
        try:
            raw_value = e_type(raw_value)
        except (TypeError, ValueError) as err:
            raise exc from err

    if _type is t.Literal:
        validate(type(args[0]))
        if raw_value not in args:
            raise exceptions.InvalidArgumentException(
                arg=raw_value, type_base="Literal", valid_args=args
            )
        return raw_value, is_optional

    if _type in (list, tuple, t.List, t.Tuple):
        validate((list, tuple), t_type_repr=type_repr)
        cast = list if _type in (list, t.List) else tuple
        if not args:
            return cast(raw_value), is_optional
        arg_info = ts.extract_annotation_info(args[0])
        return (
            cast(compile_value(arg_info, v, _join(label, i))[0] for i, v in enumerate(raw_value)),
            is_optional,
        )

    if _type in (dict, t.Dict):
        validate(dict, t_type_repr=None)
        return dict(raw_value), is_optional

    if _type in ts._SUPPORTED_TYPE_MAP:
        validate(_type, t_type_repr=None)
        return raw_value, is_optional

    if (compile_fn := _get_obj_compiler(_type)) is not None:
        if ts.is_namedtuple(_type):
            validate((dict, list, tuple))
        else:
            validate(dict)
        return compile_fn(_type, raw_value, label), is_optional

    raise exceptions.UnsupportedTypeException(
        type_hint_repr=type_repr, supported_repr=ts._SUPPORTED_TYPES_REPR
    )


def compile_object(__obj: t.Any, *, arguments: t.Optional[str | t.Mapping[str, t.Any]]):
    """
    Compile a config class with the given arguments.

    :param __obj: The NamedTuple or pydantic model class to build.
    :param arguments: The raw document, as a JSON string or an already parsed mapping.

    :raises ValueError: If the arguments are not a valid JSON object or if the class is not supported
    """
    if isinstance(arguments, str):
        try:
            arguments = json.loads(arguments)
        except json.JSONDecodeError as err:
            raise ValueError("arguments is not a valid JSON object") from err

    if (compile_fn := _get_obj_compiler(__obj)) is None:
        raise ValueError("Config compilation failed, given object is not supported")

    if not isinstance(arguments, (dict, list, tuple)):
        raise exceptions.TypeMismatchException(
            expected_type_repr="dict",
            target_type_repr=ts.get_type_repr(__obj),
            received_type_repr=ts.get_type_repr(type(arguments)),
        )
    return compile_fn(__obj, arguments)
