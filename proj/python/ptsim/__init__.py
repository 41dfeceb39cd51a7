"""Trace-driven simulator of page-table replication and TLB shootdowns on
NUMA machines.

The heavy lifting lives in the native `_core` extension; this package simply
re-exports its surface.
"""

from ._core import (  # noqa: F401
    ConfigError,
    TraceError,
    __version__,
    compare,
    gen_trace,
    prefetch_window,
    run,
    scenario_defaults,
    scenarios,
    split_vaddr,
    validate_trace,
)

__all__ = [
    "ConfigError",
    "TraceError",
    "__version__",
    "compare",
    "gen_trace",
    "prefetch_window",
    "run",
    "scenario_defaults",
    "scenarios",
    "split_vaddr",
    "validate_trace",
]
