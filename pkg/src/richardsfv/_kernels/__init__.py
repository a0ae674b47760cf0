"""Kernel backend selection.

The compiled Cython extension is preferred when present; the numpy
implementation is the fallback and the semantic reference. Set
RICHARDSFV_BACKEND=python or =compiled to force a choice (forcing
"compiled" raises if the extension is missing). Both backends expose the
same functions and must agree to floating-point roundoff; the test
suite and the ``richardsfv bench`` command compare them.
"""

import os

from . import _pure

_FUNCS = ("vgm_curves", "unconf_curves", "continuation_apply",
          "face_system", "scatter_faces")

_choice = os.environ.get("RICHARDSFV_BACKEND", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise ValueError(
        f"RICHARDSFV_BACKEND={_choice!r} (expected auto, python or compiled)")

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _fast as _impl
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "RICHARDSFV_BACKEND=compiled but the _fast extension is "
                "not built; reinstall the package with a C compiler")
        _impl = None

if _impl is None:
    _impl = _pure
    BACKEND = "python"
else:
    BACKEND = "compiled"

vgm_curves = _impl.vgm_curves
unconf_curves = _impl.unconf_curves
continuation_apply = _impl.continuation_apply
face_system = _impl.face_system
scatter_faces = _impl.scatter_faces


def get_backend(name=None):
    """Return the backend module for ``name`` (default: the active one).

    Used by the benchmark command to time both implementations side by
    side regardless of which one import selected.
    """
    if name in (None, BACKEND):
        return _impl
    if name == "python":
        return _pure
    if name == "compiled":
        from . import _fast
        return _fast
    raise ValueError(f"unknown backend {name!r}")
