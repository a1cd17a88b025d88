"""Kernel backend selection.

The compiled extension is used when it imported cleanly and the environment
variable ``STOCLOT_PURE_PYTHON`` is unset; otherwise the pure-Python
reference implementation takes over.  Both expose the same functions with
identical semantics (see _pykernels for the contract), so the choice affects
speed only.
"""

import os

from . import _pykernels

if os.environ.get("STOCLOT_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.IMPL

SNAP = _pykernels.SNAP
SUM_TOL = _pykernels.SUM_TOL
STATUS_OK = _pykernels.STATUS_OK
STATUS_NO_DIRECTION = _pykernels.STATUS_NO_DIRECTION
STATUS_INVARIANT = _pykernels.STATUS_INVARIANT
STATUS_UNIFORMS = _pykernels.STATUS_UNIFORMS

depround_batch = _impl.depround_batch
iter_round_batch = _impl.iter_round_batch
pareto3_prune = _impl.pareto3_prune

pure = _pykernels
