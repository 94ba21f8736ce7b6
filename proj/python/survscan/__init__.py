"""Scan-based Cox and Fine-Gray regression for large samples.

Thin wrapper over the compiled core.  The usual entry points:

    ds, beta = survscan.simulate_cox(n=100_000, p=50, seed=1)
    res = survscan.fit(ds, model="cox", penalty="l1", strength=2.0)
    cv = survscan.cross_validate(ds, model="cox", penalty="l1")
"""

try:
    from ._survscan import *  # noqa: F401,F403  (installed layout)
    from ._survscan import __version__  # noqa: F401
except ImportError:  # in-tree runs: module staged next to this package
    from _survscan import *  # noqa: F401,F403
    from _survscan import __version__  # noqa: F401

__all__ = [
    "Dataset",
    "SurvscanError",
    "dataset_from_coo",
    "load_sparse_coo",
    "load_dense_csv",
    "write_sparse_coo",
    "write_dense_csv",
    "simulate_cox",
    "simulate_finegray",
    "fit",
    "cross_validate",
    "bootstrap_interval",
    "gamma_max",
    "auto_grid",
    "log_likelihood",
    "grad_hessian",
]
