"""
A small schema system for the JSON documents moeScaling reads and writes (model configs, law stores, fit reports, plan results).
Schemas are declared as classes with Field attributes, the same way for every document, and can both emit a JSON Schema and strictly validate a payload.
"""
from moeScaling.errors import SchemaError

validFieldTypes = ["string", "number", "integer", "boolean", "array", "object"]


class Field:
    """
    This class represents a field in a JSON schema.

    Attributes:
        description (str): The description of the field.
        field_type (str): The type of the field. By default it is "string". Other possible types: ['string', 'number', 'integer', 'boolean', 'array', 'object'].
        optional (bool): Whether the field may be absent (or null). By default it is False.
        enum (list): The list of possible values for the field. By default it is None.
        children ($schemaBaseModel): The children schema for the field. By default it is None.
        array_type (str): The item type of an array of scalars. By default it is None.
        key (str): The JSON key when it differs from the attribute name (e.g. "lambda").
    """

    def __init__(self, description=None, field_type="string", optional=False, enum=None, children=None, array_type=None, key=None):
        self.description = description
        self.field_type = field_type
        self.optional = optional
        self.enum = enum
        self.children = children
        self.array_type = array_type
        self.key = key
        if field_type not in validFieldTypes:
            raise TypeError(f"Field type must be one of: {validFieldTypes}")
        if field_type == "array" and not children and not array_type:
            raise TypeError("Array type must have either children or array_type")
        if field_type == "array" and children and array_type:
            raise TypeError("Cannot have both children and array_type")
        if field_type == "object" and not children:
            raise TypeError("Object type must have children")
        if field_type == "object" and array_type:
            raise TypeError("Object type cannot have array_type")


def _matches_type(value, field_type):
    # bool is an int subclass; never accept it as a number
    if field_type == "boolean":
        return isinstance(value, bool)
    if field_type == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if field_type == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if field_type == "string":
        return isinstance(value, str)
    if field_type == "array":
        return isinstance(value, list)
    if field_type == "object":
        return isinstance(value, dict)
    return False


class schemaBaseModel:
    """
    This class represents a base model for JSON documents. Subclasses declare Field attributes.
    Unknown keys are always rejected.
    """

    @classmethod
    def fields(cls):
        output = {}
        for attr_name, attr_value in cls.__dict__.items():
            if isinstance(attr_value, Field):
                output[attr_value.key or attr_name] = attr_value
        return output

    @classmethod
    def generate_json_schema(cls):
        schema = {
            "title": cls.__name__,
            "description": cls.__doc__.strip() if cls.__doc__ else "",
            "type": "object",
            "properties": {},
            "additionalProperties": False,
            "required": []
        }

        for name, field in cls.fields().items():
            property_schema = {
                "type": field.field_type
            }
            if field.description:
                property_schema["description"] = field.description
            if field.enum:
                property_schema["enum"] = field.enum

            if field.field_type == "array":
                if field.children:
                    if not (isinstance(field.children, type) and issubclass(field.children, schemaBaseModel)):
                        raise ValueError("Children attribute must be a subclass of schemaBaseModel")
                    property_schema["items"] = field.children.generate_json_schema()
                else:
                    property_schema["items"] = {"type": field.array_type}
            elif field.field_type == "object":
                if not (isinstance(field.children, type) and issubclass(field.children, schemaBaseModel)):
                    raise ValueError("Object children must be a subclass of schemaBaseModel")
                property_schema = field.children.generate_json_schema()
                if field.description:
                    property_schema["description"] = field.description

            if field.optional:
                property_schema["type"] = [property_schema["type"], "null"]
            else:
                schema["required"].append(name)

            schema["properties"][name] = property_schema

        return schema

    @classmethod
    def validate(cls, payload, path=None):
        """
        Check payload against the schema and return it unchanged.

        Raises:
            SchemaError: on unknown keys, missing required keys, wrong types or values outside enum.
        """
        where = path or cls.__name__
        if not isinstance(payload, dict):
            raise SchemaError(f"{where}: expected an object, got {type(payload).__name__}")

        fields = cls.fields()
        unknown = [key for key in payload if key not in fields]
        if unknown:
            raise SchemaError(f"{where}: unknown field(s) {sorted(unknown)}")

        for name, field in fields.items():
            if name not in payload or payload[name] is None:
                if field.optional:
                    continue
                raise SchemaError(f"{where}: missing required field '{name}'")
            value = payload[name]
            if not _matches_type(value, field.field_type):
                raise SchemaError(f"{where}.{name}: expected {field.field_type}, got {type(value).__name__}")
            if field.enum and value not in field.enum:
                raise SchemaError(f"{where}.{name}: {value!r} is not one of {field.enum}")

            if field.field_type == "object":
                field.children.validate(value, path=f"{where}.{name}")
            elif field.field_type == "array":
                for i, item in enumerate(value):
                    if field.children:
                        field.children.validate(item, path=f"{where}.{name}[{i}]")
                    elif not _matches_type(item, field.array_type):
                        raise SchemaError(f"{where}.{name}[{i}]: expected {field.array_type}, got {type(item).__name__}")

        return payload
