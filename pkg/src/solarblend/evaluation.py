"""Forecast error metrics and grouped reporting.

nMAE and nRMSE are percentages of a normalization basis; the default
basis is the mean measured value over the evaluation subset (alternatives:
a fixed capacity or the subset maximum). Improvement is the relative error
reduction of a compared model versus a reference model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


class EvaluationError(Exception):
    pass


class LengthMismatch(EvaluationError):
    pass


class ZeroBasis(EvaluationError):
    pass


class ZeroReference(EvaluationError):
    pass


class EmptyResults(EvaluationError):
    pass


@dataclass(frozen=True)
class ErrorScore:
    nmae: float
    nrmse: float
    n: int
    basis: float


def resolve_basis(actual: np.ndarray, rule: str = "mean_actual") -> float:
    actual = np.asarray(actual, dtype=float)
    if rule == "mean_actual":
        basis = float(actual.mean())
    elif rule == "max_actual":
        basis = float(actual.max())
    elif rule.startswith("capacity:"):
        basis = float(rule.split(":", 1)[1])
    else:
        raise ValueError(f"unknown normalization rule {rule!r}")
    if basis <= 0:
        raise ZeroBasis(f"normalization basis {basis} is not positive")
    return basis


def _check_series(actual, forecast):
    actual = np.asarray(actual, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if actual.shape != forecast.shape or actual.size == 0:
        raise LengthMismatch(
            f"series shapes differ or empty: {actual.shape} vs {forecast.shape}")
    return actual, forecast


def nmae(actual, forecast, basis: float | None = None) -> float:
    actual, forecast = _check_series(actual, forecast)
    if basis is None:
        basis = resolve_basis(actual)
    if basis <= 0:
        raise ZeroBasis(f"basis {basis} is not positive")
    return 100.0 * float(np.mean(np.abs(actual - forecast))) / basis


def nrmse(actual, forecast, basis: float | None = None) -> float:
    actual, forecast = _check_series(actual, forecast)
    if basis is None:
        basis = resolve_basis(actual)
    if basis <= 0:
        raise ZeroBasis(f"basis {basis} is not positive")
    return 100.0 * float(np.sqrt(np.mean((actual - forecast) ** 2))) / basis


def improvement(err_ref: float, err_cmp: float) -> float:
    """Relative error reduction (%); positive means the compared model is better."""
    if err_ref <= 0:
        raise ZeroReference(f"reference error {err_ref} is not positive")
    return 100.0 * (err_ref - err_cmp) / err_ref


def score_series(actual, forecast, basis_rule: str = "mean_actual") -> ErrorScore:
    actual, forecast = _check_series(actual, forecast)
    basis = resolve_basis(actual, basis_rule)
    return ErrorScore(nmae=nmae(actual, forecast, basis),
                      nrmse=nrmse(actual, forecast, basis),
                      n=len(actual), basis=basis)


GROUPINGS = ("month", "hour", "cluster", "model", "group", "overall")


def grouped_report(results: pd.DataFrame, grouping: str,
                   basis_rule: str = "mean_actual") -> pd.DataFrame:
    """Error scores per (group, model, grouping value).

    ``results`` needs columns date, hour, ghi_actual, ghi_forecast, group,
    model_tag, recognized_cluster. Empty groups are simply absent.
    """
    if results.empty:
        raise EmptyResults("no forecast records to evaluate")
    df = results.copy()
    if grouping == "month":
        df["_key"] = pd.to_datetime(df["date"]).dt.month
    elif grouping == "hour":
        df["_key"] = df["hour"]
    elif grouping == "cluster":
        df["_key"] = df["recognized_cluster"]
    elif grouping in ("model", "group", "overall"):
        df["_key"] = "all"
    else:
        raise ValueError(f"unknown grouping {grouping!r}")
    rows = []
    for (grp, model, key), sub in sorted(
            df.groupby(["group", "model_tag", "_key"], sort=True)):
        try:
            score = score_series(sub["ghi_actual"].to_numpy(),
                                 sub["ghi_forecast"].to_numpy(), basis_rule)
        except ZeroBasis:
            # Slices with no measured irradiance (e.g. dusk hours) carry no
            # normalizable error and are omitted.
            continue
        rows.append({"group": grp, "model": model, "grouping": grouping,
                     "key": key, "nmae": score.nmae, "nrmse": score.nrmse,
                     "n": score.n, "basis": score.basis})
    return pd.DataFrame(rows)
