"""Generalized Radon transforms of capacity densities under CES costs."""

from ._core import (
    CostExpr,
    GridFunction,
    KernelSpec,
    LogGrid,
    MellinRadonError,
    RadonScheme,
    coarea_check,
    demo_scene_text,
    forward_batch,
    gamma,
    injectivity_report,
    invert,
    kernel_zero_scan,
    mellin_expcost_closed,
    profit_forward,
    prop1_check,
    radon_forward,
    rhq_forward,
    selftest,
    tolerances,
    weighted_norm,
    zero_scan,
)

__all__ = [
    "CostExpr",
    "GridFunction",
    "KernelSpec",
    "LogGrid",
    "MellinRadonError",
    "RadonScheme",
    "coarea_check",
    "demo_scene_text",
    "forward_batch",
    "gamma",
    "injectivity_report",
    "invert",
    "kernel_zero_scan",
    "mellin_expcost_closed",
    "profit_forward",
    "prop1_check",
    "radon_forward",
    "rhq_forward",
    "selftest",
    "tolerances",
    "weighted_norm",
    "zero_scan",
]
