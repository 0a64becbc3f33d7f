"""Backend selection for the hot kernels.

The compiled extension is preferred; the pure-Python module is a
drop-in replacement producing identical output from the same seed.
Set CONDLAW_BACKEND=python (or cython) to force a choice.
"""

import os

from . import _pykernels

_choice = os.environ.get("CONDLAW_BACKEND", "").strip().lower()

if _choice == "python":
    _impl = _pykernels
elif _choice == "cython":
    from . import _ckernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.backend_name()
PROGENY_CAP_DEFAULT = _impl.PROGENY_CAP_DEFAULT

backend_name = _impl.backend_name
sample_borel_batch = _impl.sample_borel_batch
sample_displacements_for_sizes = _impl.sample_displacements_for_sizes
sample_pair_batch = _impl.sample_pair_batch
insert_displacements = _impl.insert_displacements
enumerate_displacement_counts = _impl.enumerate_displacement_counts
