"""Kernel backend selection.

The compiled extension is preferred when importable.  Set
``BERNPACK_BACKEND=pure`` to force the numpy fallback, or ``compiled`` to make
a missing extension a hard error.
"""

from __future__ import annotations

import os

__all__ = ["kernels", "BACKEND"]

_choice = os.environ.get("BERNPACK_BACKEND", "auto").lower()
if _choice not in {"auto", "pure", "compiled"}:
    raise ImportError(
        f"BERNPACK_BACKEND must be 'auto', 'pure' or 'compiled', got {_choice!r}"
    )

if _choice == "pure":
    from . import _kernels_py as kernels

    BACKEND = "pure"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        BACKEND = "pure"
