"""
Marshal typed config objects into plain documents and field schemas.
"""

from __future__ import annotations

import typing as t

import numpy as np
from docstring_parser import Docstring, parse_from_object

from . import _types as ts
from . import exceptions

__all__ = "marshal_annotation", "marshal_schema", "marshal_value"


def build_description(docstring: Docstring) -> t.Optional[str]:
    """
    Build description from docstring.

    :param docstring: A Docstring object.
    """
    ret = []
    if docstring.short_description:
        ret.append(docstring.short_description)
        if docstring.blank_after_short_description:
            ret.append("")
    if docstring.long_description:
        ret.append(docstring.long_description)

    return "\n".join(ret) if ret else None


def map_param_to_description(docstring: Docstring) -> t.Dict[str, str]:
    """
    Map fields to their descriptions from a docstring.

    :param docstring: A Docstring object.
    """
    description_map = {}
    for param in docstring.params:
        if param.description:
            description_map[param.arg_name] = param.description
    return description_map


class FieldMetadata(t.NamedTuple):
    label: str
    schema: ts.FieldSchema
    required: bool


def marshal_fields(__fields: t.Iterable[FieldMetadata]) -> ts.FieldSchema:
    """
    Marshal field metadata into an object schema.

    :param __fields: An iterable of FieldMetadata objects.
    """
    properties, required_props = {}, []
    for label, schema, required in __fields:
        properties[label] = schema
        if required:
            required_props.append(label)

    return {"type": "object", "properties": properties, "required": required_props}


def generate_namedtuple_metadata(__nt: type, description_map: t.Dict[str, str]):
    """
    Generate field metadata for a NamedTuple.

    :param __nt: The NamedTuple to generate metadata for.
    :param description_map: A dictionary mapping field names to descriptions.
    """
    for label, annotation in ts.field_hints(__nt).items():
        schema, is_optional = marshal_annotation(ts.extract_annotation_info(annotation))
        if label in description_map:
            schema["description"] = description_map[label]
        has_default = label in __nt._field_defaults
        if has_default:
            schema["default"] = marshal_value(__nt._field_defaults[label])

        yield FieldMetadata(label=label, schema=schema, required=not (is_optional or has_default))


def generate_pydantic_metadata(__model: type, description_map: t.Dict[str, str]):
    """
    Generate field metadata for a Pydantic model.

    :param __model: The Pydantic model to generate metadata for.
    :param description_map: A dictionary mapping field names to descriptions.
    """
    hints = ts.field_hints(__model)
    for label, field in __model.model_fields.items():
        schema, is_optional = marshal_annotation(
            ts.extract_annotation_info(hints.get(label, field.annotation))
        )
        if description := field.description or description_map.get(label):
            schema["description"] = description
        if not field.is_required():
            schema["default"] = marshal_value(field.default)

        yield FieldMetadata(
            label=label, schema=schema, required=bool(not is_optional and field.is_required())
        )


def _get_field_generator(__obj: t.Any):
    if ts.is_pydantic_model(__obj):
        return generate_pydantic_metadata
    elif ts.is_namedtuple(__obj):
        return generate_namedtuple_metadata
    return None


def marshal_annotation(__info: ts.AnnotationInfo) -> t.Tuple[ts.FieldSchema, bool]:
    """
    Marshal the annotation info to a field schema.

    :param __info: The annotation info to marshal.

    :raises exceptions.UnsupportedTypeException: If the type is not supported
    """
    _type, args, is_optional = __info

    if _type is t.Literal:
        return {"type": ts._SUPPORTED_TYPE_MAP[type(args[0])], "enum": list(args)}, is_optional

    if _type in (list, tuple, t.List, t.Tuple):
        schema: ts.FieldSchema = {"type": "array"}
        if args:
            schema["items"] = marshal_annotation(ts.extract_annotation_info(args[0]))[0]
        return schema, is_optional

    if (tvalue := ts._SUPPORTED_TYPE_MAP.get(_type)) is not None:
        return {"type": tvalue}, is_optional

    if _get_field_generator(_type) is not None:
        return marshal_schema(_type), is_optional

    raise exceptions.UnsupportedTypeException(
        type_hint_repr=ts.get_type_repr(_type), supported_repr=ts._SUPPORTED_TYPES_REPR
    )


def marshal_schema(__obj: t.Any) -> ts.FieldSchema:
    """
    Marshal a config class into a documented schema.

    Descriptions come from `:param name:` entries in the class docstring.

    :param __obj: The NamedTuple or pydantic model class.

    :raises ValueError: If the class is not supported for schema generation
    """
    if (generate_fn := _get_field_generator(__obj)) is None:
        raise ValueError("Schema generation failed, given object is not supported.")

    docstring = parse_from_object(__obj)
    schema = marshal_fields(generate_fn(__obj, map_param_to_description(docstring)))
    if description := build_description(docstring):
        schema["description"] = description
    return schema


def marshal_value(__value: t.Any) -> t.Any:
    """
    Convert a config value into plain YAML/JSON-safe data.

    NamedTuples and pydantic models become mappings, tuples and arrays become lists,
    numpy scalars become Python numbers.

    :param __value: The value to convert.
    """
    if ts.is_namedtuple(type(__value)):
        return {k: marshal_value(v) for k, v in zip(__value._fields, __value)}
    if ts.is_pydantic_model(type(__value)):
        return {k: marshal_value(v) for k, v in __value.model_dump().items()}
    if isinstance(__value, dict):
        return {str(k): marshal_value(v) for k, v in __value.items()}
    if isinstance(__value, (list, tuple, np.ndarray)):
        return [marshal_value(v) for v in __value]
    if isinstance(__value, np.generic):
        return __value.item()
    return __value
