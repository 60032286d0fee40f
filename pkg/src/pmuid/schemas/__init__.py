"""JSON schemas for every document the CLI reads or writes."""

import json
from functools import lru_cache
from importlib import resources

import jsonschema
from referencing import Registry, Resource

from ..errors import ValidationError

NAMES = (
    "matrix", "pilots", "certificate", "id", "model", "truth", "manifest",
    "report", "ranking", "svd", "recertify", "benchmark",
)


@lru_cache(maxsize=None)
def load(name):
    text = resources.files(__package__).joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _registry():
    return Registry().with_resources(
        (f"{n}.schema.json", Resource.from_contents(load(n))) for n in NAMES
    )


def validate(doc, name):
    """Raise ``ValidationError`` naming the offending field path."""
    validator = jsonschema.Draft202012Validator(load(name), registry=_registry())
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ValidationError(f"{name} document invalid at field '{path}': {err.message}")
    return doc
