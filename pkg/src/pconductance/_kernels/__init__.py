"""Hot kernels with a compiled core and a pure-numpy fallback.

The Cython extension is preferred when it imported successfully; set the
environment variable ``PCONDUCTANCE_PURE_PYTHON=1`` to force the fallback
(used by the backend benchmark and for debugging).
"""

import os

if os.environ.get("PCONDUCTANCE_PURE_PYTHON", "") == "1":
    from . import _pyimpl as _impl
else:
    try:
        from . import _cyimpl as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pyimpl as _impl

BACKEND = _impl.BACKEND

edge_grad = _impl.edge_grad
edge_div = _impl.edge_div
laplacian_apply = _impl.laplacian_apply
edge_laplacian_apply = _impl.edge_laplacian_apply
prox_power = _impl.prox_power
