"""Backend selection: compiled kernel when available, Python otherwise.

The compiled extension is built at install time; if the build was skipped
(no compiler) the import fails and the pure-Python stepper takes over.  Set
``AFFINELAB_FORCE_PYTHON_BACKEND=1`` to force the fallback, e.g. for the
backend benchmark or equivalence debugging.  Both backends are
bit-compatible; the choice only affects throughput.
"""

from __future__ import annotations

import os

from . import _python_backend

__all__ = ["get_backend", "active_backend_name", "compiled_available"]

try:
    from .._kernels import _sde_kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

compiled_available = _compiled is not None


class _CompiledAdapter:
    """Wraps the extension so both backends expose run_path/run_pair alike."""

    NAME = "compiled"

    def _kernel_model(self, model):
        # cached on the model itself so the binding cannot outlive it
        km = getattr(model, "_kernel_tables", None)
        if km is None:
            km = _compiled.KernelModel(model)
            model._kernel_tables = km
        return km

    def run_path(self, model, x0, h, n_steps, streams, rec_steps, out, jump_log=None):
        if jump_log is not None:
            return _python_backend.run_path(
                model, x0, h, n_steps, streams, rec_steps, out, jump_log
            )
        return _compiled.run_path(
            self._kernel_model(model), x0, h, n_steps, streams, rec_steps, out
        )

    def run_pair(self, model, x0a, x0b, h, n_steps, streams, rec_steps, out_a, out_b):
        return _compiled.run_pair(
            self._kernel_model(model), x0a, x0b, h, n_steps, streams, rec_steps, out_a, out_b
        )


def get_backend(name: str | None = None):
    """Resolve a backend by name ('compiled', 'python', or None for auto)."""
    if name is None:
        forced = os.environ.get("AFFINELAB_FORCE_PYTHON_BACKEND", "")
        name = "python" if forced not in ("", "0") else ("compiled" if compiled_available else "python")
    if name == "python":
        return _python_backend
    if name == "compiled":
        if not compiled_available:
            raise RuntimeError("compiled kernel is not available; rebuild the extension")
        return _CompiledAdapter()
    raise ValueError(f"unknown backend {name!r}")


def active_backend_name() -> str:
    return get_backend().NAME
