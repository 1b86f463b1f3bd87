"""Sphinx documentation generation configuration."""

import enum
import types
import inspect
import pathlib
import datetime
import importlib.metadata

import platont

project = "platont"
copyright = f"{datetime.date.today().year}, PlatoNT developers"
author = "PlatoNT developers"
release = importlib.metadata.version("platont")  # full version
version = ".".join(release.split(".")[:2])  # short X.Y version

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "sphinx.ext.autosummary",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
]

html_theme = "furo"

autosummary_generate = False
intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
}


def _object_kind(export) -> str:
    if isinstance(export, type):
        return "exception" if issubclass(export, Exception) else "class"
    if isinstance(export, types.FunctionType):
        return "function"
    return "data"


def _module_rst(module_name: str, module, exports) -> str:
    title = " ".join(w.capitalize() for w in module_name.strip("_").split("_"))
    lines = [
        title,
        "=" * len(title),
        "",
        module.__doc__,
        "",
        ".. currentmodule:: platont",
        "",
        ".. autosummary::",
        "   :nosignatures:",
        "",
    ]
    lines += [f"   {n}" for n, _ in exports]

    for name, export in exports:
        kind = _object_kind(export)
        lines += ["", f".. auto{kind}:: {name}"]
        if kind == "class":
            if not issubclass(export, enum.Enum):
                lines += ["   :inherited-members:"]
            lines += ["   :members:", "   :undoc-members:"]
        elif kind == "exception":
            lines += ["   :members:"]
        lines += [""]
    return "\n".join(lines)


def _write_if_changed(path: pathlib.Path, text: str) -> None:
    if not path.is_file() or path.read_text() != text:
        path.write_text(text)


def _generate_api_docs() -> None:
    source_dir = pathlib.Path(__file__).parent
    exports = inspect.getmembers(
        platont, lambda x: not isinstance(x, types.ModuleType)
    )
    modules = inspect.getmembers(platont, lambda x: isinstance(x, types.ModuleType))

    references = []
    for module_name, module in modules:
        module_exports = [
            (name, export)
            for name, export in exports
            if getattr(export, "__module__", None) == module.__name__
        ]
        if not module_exports:
            continue
        reference = f"platont.{module_name}"
        references.append(reference)
        _write_if_changed(
            source_dir / f"{reference}.rst",
            _module_rst(module_name, module, module_exports),
        )

    lines = [
        "platont",
        "=======",
        "",
        ".. automodule:: platont",
        "",
        ".. toctree::",
        "   :maxdepth: 1",
        "",
    ]
    lines += [f"   {n}" for n in references]
    lines += [""]
    _write_if_changed(source_dir / "platont.rst", "\n".join(lines))


_generate_api_docs()
