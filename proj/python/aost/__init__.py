"""Python bindings for the aost library."""

from ._aost import (
    ShapeError,
    ValidationError,
    __version__,
    fid,
    image_distance,
    main,
    render,
    schema,
    total_distance,
)

__all__ = [
    "ShapeError",
    "ValidationError",
    "__version__",
    "fid",
    "image_distance",
    "main",
    "render",
    "schema",
    "total_distance",
]
