"""Model specification documents, archives and CSV tables."""

from .archive import (
    FORMAT_VERSION,
    ModelArchive,
    archive_fit,
    load_archive,
    restore_fit,
    save_archive,
)
from .spec import (
    ModelSpec,
    build_constraints,
    build_hyperspec,
    build_model,
    load_spec,
    resolve_spec,
)
from .tables import read_table, write_atomic, write_table

__all__ = [
    "FORMAT_VERSION",
    "ModelArchive",
    "ModelSpec",
    "archive_fit",
    "build_constraints",
    "build_hyperspec",
    "build_model",
    "load_archive",
    "load_spec",
    "read_table",
    "resolve_spec",
    "restore_fit",
    "save_archive",
    "write_atomic",
    "write_table",
]
