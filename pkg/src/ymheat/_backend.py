"""Select the compiled core or the numpy fallback.

Set ``YMHEAT_PURE_PYTHON=1`` to force the fallback even when the extension
is built.
"""

import os

from . import _pycore

BACKEND = "python"
core = _pycore

if os.environ.get("YMHEAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as core  # noqa: F811
    except ImportError:
        pass
    else:
        BACKEND = "cython"

__all__ = ["BACKEND", "core"]
