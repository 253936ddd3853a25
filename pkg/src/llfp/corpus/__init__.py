"""The bundled case studies, as parsed source files."""

from __future__ import annotations

from importlib import resources

from ..parser import SourceFile, parse_file

NAMES = ("lambda_v", "imp_hoare", "fitch", "monads")


def corpus_text(name: str) -> str:
    return resources.files(__package__).joinpath(f"{name}.llfp").read_text()


def corpus_path(name: str):
    return resources.files(__package__).joinpath(f"{name}.llfp")


def load_corpus() -> dict[str, SourceFile]:
    return {name: parse_file(corpus_text(name)) for name in NAMES}
