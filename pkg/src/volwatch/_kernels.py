"""Backend selection for the recursion kernels.

Prefers the compiled extension; falls back to the pure-Python implementation.
Set ``VOLWATCH_PURE_PYTHON=1`` to force the fallback (used by the kernel
agreement tests and the benchmark).
"""

import os

if os.environ.get("VOLWATCH_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        from . import _kernels_py as _impl

        BACKEND = "python"

simulate_log_variance = _impl.simulate_log_variance
nll_grad = _impl.nll_grad
score_filter = _impl.score_filter
sim_score_filter = _impl.sim_score_filter
