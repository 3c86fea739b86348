import pytest

from moeScaling.errors import SchemaError
from moeScaling.json_schema import Field, schemaBaseModel
from moeScaling.schemas import ModelConfigSchema, AllocationLawSchema, LawStoreSchema
from moeScaling.planner import default_law_store
from conftest import make_config


class PointSchema(schemaBaseModel):
    """A point"""
    x = Field(field_type="number")
    label = Field(field_type="string", optional=True, enum=["a", "b"])


class ShapeSchema(schemaBaseModel):
    """A shape"""
    name = Field(description="Shape name")
    closed = Field(field_type="boolean")
    points = Field(field_type="array", children=PointSchema)
    tags = Field(field_type="array", array_type="string", optional=True)
    lam = Field(field_type="number", key="lambda", optional=True)


def test_generate_json_schema():
    schema = ShapeSchema.generate_json_schema()
    assert schema["title"] == "ShapeSchema"
    assert schema["description"] == "A shape"
    assert schema["additionalProperties"] is False
    assert schema["required"] == ["name", "closed", "points"]
    assert schema["properties"]["points"]["items"]["properties"]["x"] == {"type": "number"}
    assert schema["properties"]["tags"] == {"type": ["array", "null"], "items": {"type": "string"}}
    assert "lambda" in schema["properties"]


def test_validate_accepts_good_payloads():
    payload = {"name": "tri", "closed": True, "points": [{"x": 1}, {"x": 2.5, "label": "a"}], "lambda": 0.1}
    assert ShapeSchema.validate(payload) is payload
    ModelConfigSchema.validate(make_config().to_dict())
    LawStoreSchema.validate(default_law_store().to_dict())


@pytest.mark.parametrize("payload", [
    {"name": "tri", "closed": True, "points": [], "extra": 1},
    {"name": "tri", "points": []},
    {"name": 3, "closed": True, "points": []},
    {"name": "tri", "closed": 1, "points": []},
    {"name": "tri", "closed": True, "points": [{"x": True}]},
    {"name": "tri", "closed": True, "points": [{"x": 1, "label": "c"}]},
    {"name": "tri", "closed": True, "points": [], "tags": ["a", 2]},
    {"name": "tri", "closed": True, "points": {}},
])
def test_validate_rejects(payload):
    with pytest.raises(SchemaError):
        ShapeSchema.validate(payload)


def test_document_schemas():
    with pytest.raises(SchemaError):
        AllocationLawSchema.validate({"alpha_r": 1.0, "beta_r": 0.1, "provenance": "guess"})
    with pytest.raises(SchemaError):
        ModelConfigSchema.validate(dict(make_config().to_dict(), d_hidden=4.0))


def test_bad_field_declarations():
    with pytest.raises(TypeError):
        Field(field_type="tuple")
    with pytest.raises(TypeError):
        Field(field_type="array")
    with pytest.raises(TypeError):
        Field(field_type="object")
