"""Text tables of fit traces, parameter estimates and KS results.

Supports both ASCII grid format (for console/logs) and markdown format (for docs).
"""

from typing import Literal

from tabulate import tabulate

from .models import ClmParams, FitReport, IterationRow, KsResult

TableFormat = Literal["ascii", "markdown"]

_TABLEFMT = {"ascii": "grid", "markdown": "github"}
_PARAM_HEADERS = ["mu", "delta", "sigma", "alpha", "theta"]


def format_p_value(p: float | None) -> str:
    """p-value to 6 significant digits with its percentage, e.g. '0.090788 (9.0788%)'.

    Values below 1e-10 print as '< 1e-10'.
    """
    if p is None:
        return "-"
    if p < 1e-10:
        return "< 1e-10"
    return f"{p:.6g} ({100 * p:.4f}%)"


def format_trace_table(rows: list[IterationRow], fmt: TableFormat = "ascii") -> str:
    """Newton-Raphson trace, one row per accepted iterate.

    Example output:
        +------+---------+---------+---------+---------+---------+----------+-----------+--------+
        | Iter | mu      | delta   | sigma   | alpha   | theta   | loglik   | |dl/dV|   | step   |
        +======+=========+=========+=========+=========+=========+==========+===========+========+
        | 1    | 0       | 0       | 1       | 1       | 1       | -3912.57 | 1.204e+03 | init   |
    """
    headers = ["Iter", *_PARAM_HEADERS, "loglik", "|dl/dV|", "step"]
    table_data = [
        [
            row.iteration,
            f"{row.mu:.6f}",
            f"{row.delta:.6f}",
            f"{row.sigma:.6f}",
            f"{row.alpha:.6f}",
            f"{row.theta:.6f}",
            f"{row.loglik:.4f}",
            f"{row.grad_norm:.3e}",
            row.step if row.halvings == 0 else f"{row.step}/{row.halvings}",
        ]
        for row in rows
    ]
    return tabulate(table_data, headers=headers, tablefmt=_TABLEFMT[fmt], disable_numparse=True)


def format_estimates_table(reports: list[FitReport], fmt: TableFormat = "ascii") -> str:
    """Final estimates side by side; CLM rows show mu and sigma only."""
    headers = ["Model", *_PARAM_HEADERS, "loglik", "n", "converged"]
    table_data = []
    for report in reports:
        p = report.params
        if isinstance(p, ClmParams):
            values = [f"{p.mu:.6f}", "-", f"{p.sigma:.6f}", "-", "-"]
        else:
            values = [f"{getattr(p, name):.6f}" for name in _PARAM_HEADERS]
        table_data.append(
            [report.label, *values, f"{report.loglik:.4f}", report.n_obs, "yes" if report.converged else "no"]
        )
    return tabulate(table_data, headers=headers, tablefmt=_TABLEFMT[fmt], disable_numparse=True)


def format_ks_table(results: list[tuple[str, KsResult]], fmt: TableFormat = "ascii") -> str:
    """KS statistic and p-value per model label."""
    headers = ["Model", "d_n", "d_plus", "d_minus", "n", "p-value"]
    table_data = [
        [label, f"{r.d_n:.6f}", f"{r.d_plus:.6f}", f"{r.d_minus:.6f}", r.n, format_p_value(r.p_value)]
        for label, r in results
    ]
    return tabulate(table_data, headers=headers, tablefmt=_TABLEFMT[fmt], disable_numparse=True)


def format_density_table(rows: list[tuple[str, float, tuple[float, float, float, float]]], fmt: TableFormat = "ascii") -> str:
    """Mass and moments of tabulated densities, one row per (label, mass, (mean, var, skew, kurt))."""
    headers = ["Density", "mass", "mean", "variance", "skewness", "kurtosis"]
    table_data = [
        [label, f"{mass:.8f}", *(f"{m:.6f}" for m in stats)]
        for label, mass, stats in rows
    ]
    return tabulate(table_data, headers=headers, tablefmt=_TABLEFMT[fmt], disable_numparse=True)
