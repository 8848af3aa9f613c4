"""Kernel backend selection.

The compiled Cython extension ``_accel`` is preferred; the pure Python
twin ``_pyref`` is used when the extension was not built or when
``VENTLAB_PURE_PYTHON=1`` is set.  Both expose the same five functions;
their results are bit-identical up to floating point associativity.
"""

import os

from . import _pyref

if os.environ.get("VENTLAB_PURE_PYTHON", "") == "1":
    _impl = _pyref
else:
    try:
        from . import _accel as _impl
    except ImportError:
        _impl = _pyref

IMPLEMENTATION = _impl.IMPLEMENTATION
csr_matvec = _impl.csr_matvec
ic_symbolic = _impl.ic_symbolic
ic_numeric = _impl.ic_numeric
solve_lower = _impl.solve_lower
solve_lower_transpose = _impl.solve_lower_transpose
