"""Plain-text artifact serialization for pipeline outputs.

Everything is emitted as CSV or JSON with fixed float formatting so that
identical inputs produce byte-identical files.  Missing values render as
empty CSV cells and JSON nulls.
"""

from __future__ import annotations

import json
import math
from typing import Mapping, Sequence

from .econometrics import LagCorrelogram, SignificanceCell, pearson, EconometricsError
from .factors import FactorModel
from .features import SecurityFeatures, TwitterFeatureSet
from .forecasting import ForecastBlock, ForecastReport
from .series import WeeklySeries, align

__all__ = [
    "features_csv",
    "loadings_csv",
    "heatmap_csv",
    "correlogram_csv",
    "granger_csv",
    "forecast_json",
    "forecast_csv",
]


def _fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.10g}"


def _jsonable(value: float):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return round(float(value), 10)


def features_csv(
    tw: TwitterFeatureSet,
    fin: SecurityFeatures,
    scores: Sequence[WeeklySeries] = (),
) -> str:
    """One row per week, one column per feature series."""
    columns = {**tw.as_dict(), **fin.as_dict()}
    for s in scores:
        columns[s.name] = s
    aligned = align(list(columns.values()))
    names = list(columns.keys())
    lines = ["week," + ",".join(names)]
    weeks = aligned[0].weeks
    for i, week in enumerate(weeks):
        cells = [_fmt(s.values[i]) for s in aligned]
        lines.append(str(week) + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def loadings_csv(model: FactorModel) -> str:
    """Term-by-factor loading table (``term,fact1[,fact2,...]``)."""
    lines = ["term," + ",".join(model.factor_names)]
    for i, term in enumerate(model.terms):
        row = ",".join(_fmt(model.loadings[i, j]) for j in range(model.n_factors))
        lines.append(f"{term},{row}")
    return "\n".join(lines) + "\n"


def heatmap_csv(series: Mapping[str, WeeklySeries]) -> str:
    """Pairwise correlation triples (``row,column,r``) over named series.

    Pairs whose correlation is undefined (constant or too short) are
    emitted with an empty value.
    """
    names = list(series.keys())
    lines = ["row,column,r"]
    for a in names:
        for b in names:
            if a == b:
                lines.append(f"{a},{b},1")
                continue
            try:
                r = pearson(series[a], series[b])
            except EconometricsError:
                lines.append(f"{a},{b},")
                continue
            lines.append(f"{a},{b},{_fmt(r)}")
    return "\n".join(lines) + "\n"


def correlogram_csv(correlograms: Sequence[LagCorrelogram]) -> str:
    """Stacked cross-correlograms (``x,y,lag,gamma``)."""
    lines = ["x,y,lag,gamma"]
    for cg in correlograms:
        for k, g in zip(cg.lags, cg.gamma):
            lines.append(f"{cg.x_name},{cg.y_name},{k},{_fmt(g)}")
    return "\n".join(lines) + "\n"


def granger_csv(security: str, cells: Sequence[SignificanceCell]) -> str:
    """Causality grid (``security,target,predictor,lag,p_value,stars,error``)."""
    lines = ["security,target,predictor,lag,p_value,stars,error"]
    for c in cells:
        p = _fmt(c.p_value) if c.p_value is not None else ""
        err = (c.error or "").replace(",", ";").replace("\n", " ")
        lines.append(
            f"{security},{c.target},{c.predictor},{c.lag_order},{p},{c.stars},{err}"
        )
    return "\n".join(lines) + "\n"


def _block_dict(block: ForecastBlock) -> dict:
    return {
        "model": block.model_label,
        "predictors": list(block.predictors),
        "mape": _jsonable(block.mape),
        "direction": _jsonable(block.direction_accuracy),
        "stationary_r2": _jsonable(block.stationary_r2),
        "forecasts": [
            {
                "week": str(week),
                "actual": _jsonable(actual),
                "forecast": _jsonable(forecast),
            }
            for week, actual, forecast in zip(
                block.weeks, block.actuals, block.forecasts
            )
        ],
    }


def forecast_json(report: ForecastReport) -> str:
    payload = {
        "security": report.security,
        "target": report.target,
        "with": _block_dict(report.with_predictors),
        "without": _block_dict(report.without_predictors),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def forecast_csv(report: ForecastReport) -> str:
    """Flat comparison table (``security,target,predictors,mape,direction``)."""
    lines = ["security,target,predictors,mape,direction"]
    for block in (report.with_predictors, report.without_predictors):
        preds = ";".join(block.predictors) or "none"
        lines.append(
            f"{report.security},{report.target},{preds},"
            f"{_fmt(block.mape)},{_fmt(block.direction_accuracy)}"
        )
    return "\n".join(lines) + "\n"
