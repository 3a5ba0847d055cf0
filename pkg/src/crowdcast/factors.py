"""Factor reduction of the search-volume term matrix.

Principal components of the term correlation matrix, eigenvalue-above-one
retention, normalized varimax rotation, and regression-method factor
scores.  The retained score series are the search-behavior predictors used
by the causality and forecasting stages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .ingestion import SviMatrix
from .series import WeeklySeries

__all__ = [
    "FactorModel",
    "FactorError",
    "standardize",
    "extract_factors",
    "varimax",
    "rotate",
    "score",
    "fit_factors",
]

logger = logging.getLogger(__name__)

_VARIMAX_TOL = 1e-10
_VARIMAX_MAX_SWEEPS = 100


class FactorError(ValueError):
    """Factor extraction cannot proceed on this input."""


@dataclass(frozen=True)
class FactorModel:
    """Loadings, eigenvalues, and scores for the retained search factors."""

    terms: tuple[str, ...]
    eigenvalues: tuple[float, ...]       # all eigenvalues, descending
    loadings: np.ndarray                 # term x retained-factor
    explained_variance: tuple[float, ...]
    rotated: bool
    rotation_converged: bool
    scores: tuple[WeeklySeries, ...] = ()

    @property
    def n_factors(self) -> int:
        return self.loadings.shape[1]

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f"fact{i + 1}" for i in range(self.n_factors))


def _matrix(svi: SviMatrix) -> np.ndarray:
    return np.asarray(svi.volumes, dtype=float)


def standardize(svi: SviMatrix) -> np.ndarray:
    """Column z-scores (population standard deviation) of the term matrix."""
    x = _matrix(svi)
    if x.shape[0] < 3:
        raise FactorError("standardization needs at least 3 weeks")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    dead = np.flatnonzero(sd == 0)
    if dead.size:
        names = ", ".join(svi.terms[j] for j in dead)
        raise FactorError(f"zero-variance term column(s): {names}")
    return (x - mean) / sd


def _fix_signs(loadings: np.ndarray) -> np.ndarray:
    """Flip each factor so its largest-magnitude loading is positive."""
    out = loadings.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            out[:, j] = -col
    return out


def extract_factors(svi: SviMatrix) -> FactorModel:
    """Principal components of the term correlation matrix (pre-rotation).

    Retains components whose eigenvalue strictly exceeds one; when none do,
    keeps the single largest component.  Loadings are eigenvectors scaled
    by the square root of their eigenvalue.
    """
    z = standardize(svi)
    corr = np.corrcoef(z, rowvar=False)
    if not np.all(np.isfinite(corr)):
        raise FactorError("non-finite correlation matrix")
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    retained = int(np.sum(eigvals > 1.0))
    if retained == 0:
        retained = 1
    lam = np.clip(eigvals[:retained], 0.0, None)
    loadings = _fix_signs(eigvecs[:, :retained] * np.sqrt(lam))
    n_terms = len(svi.terms)
    return FactorModel(
        terms=svi.terms,
        eigenvalues=tuple(float(v) for v in eigvals),
        loadings=loadings,
        explained_variance=tuple(float(v) / n_terms for v in lam),
        rotated=False,
        rotation_converged=True,
    )


def _varimax_criterion(loadings: np.ndarray) -> float:
    """Sum over factors of the variance of squared loadings."""
    sq = loadings ** 2
    p = loadings.shape[0]
    return float(np.sum(sq ** 2) / p - np.sum((sq.sum(axis=0) / p) ** 2))


def varimax(
    loadings: np.ndarray, trace: list[float] | None = None
) -> tuple[np.ndarray, bool]:
    """Normalized varimax rotation by iterative pairwise planar rotations.

    Rows are scaled to unit communality before rotation and unscaled after.
    Returns the rotated loadings and a convergence flag; non-convergence
    after 100 sweeps returns the best iterate with the flag lowered.  When
    *trace* is given, the criterion value after each sweep is appended to it.
    """
    loadings = np.asarray(loadings, dtype=float)
    p, m = loadings.shape
    if m < 2:
        return loadings.copy(), True
    comm = np.sqrt(np.sum(loadings ** 2, axis=1))
    safe = np.where(comm > 0, comm, 1.0)
    a = loadings / safe[:, None]

    converged = False
    crit = _varimax_criterion(a)
    for _ in range(_VARIMAX_MAX_SWEEPS):
        for i in range(m - 1):
            for j in range(i + 1, m):
                x, y = a[:, i], a[:, j]
                u = x ** 2 - y ** 2
                v = 2.0 * x * y
                su, sv = u.sum(), v.sum()
                num = 2.0 * (np.dot(u, v) - su * sv / p)
                den = np.dot(u, u) - np.dot(v, v) - (su ** 2 - sv ** 2) / p
                phi = 0.25 * np.arctan2(num, den)
                if abs(phi) < 1e-15:
                    continue
                c, s = np.cos(phi), np.sin(phi)
                a[:, i], a[:, j] = c * x + s * y, -s * x + c * y
        new_crit = _varimax_criterion(a)
        if trace is not None:
            trace.append(new_crit)
        if new_crit - crit < _VARIMAX_TOL:
            converged = True
            crit = new_crit
            break
        crit = new_crit
    if not converged:
        logger.warning("varimax did not converge in %d sweeps", _VARIMAX_MAX_SWEEPS)
    return _fix_signs(a * safe[:, None]), converged


def rotate(model: FactorModel) -> FactorModel:
    """Apply varimax to a pre-rotation model; single factors pass through."""
    rotated, converged = varimax(model.loadings)
    n_terms = len(model.terms)
    explained = tuple(float(v) / n_terms for v in np.sum(rotated ** 2, axis=0))
    return FactorModel(
        terms=model.terms,
        eigenvalues=model.eigenvalues,
        loadings=rotated,
        explained_variance=explained,
        rotated=True,
        rotation_converged=converged,
        scores=model.scores,
    )


def score(model: FactorModel, svi: SviMatrix) -> tuple[WeeklySeries, ...]:
    """Regression-method factor scores: z R^{-1} L, one series per factor.

    A singular correlation matrix gets a small ridge on the diagonal, with
    a warning.
    """
    if svi.terms != model.terms:
        raise FactorError("matrix terms do not match the factor model")
    z = standardize(svi)
    corr = np.corrcoef(z, rowvar=False)
    try:
        weights = np.linalg.solve(corr, model.loadings)
    except np.linalg.LinAlgError:
        logger.warning("singular correlation matrix; applying ridge adjustment")
        weights = np.linalg.solve(corr + 1e-8 * np.eye(corr.shape[0]), model.loadings)
    scores = z @ weights
    start = svi.weeks[0]
    return tuple(
        WeeklySeries(name, start, tuple(scores[:, j]))
        for j, name in enumerate(model.factor_names)
    )


def fit_factors(svi: SviMatrix) -> FactorModel:
    """Extract, rotate, and score in one pass."""
    model = rotate(extract_factors(svi))
    return FactorModel(
        terms=model.terms,
        eigenvalues=model.eigenvalues,
        loadings=model.loadings,
        explained_variance=model.explained_variance,
        rotated=model.rotated,
        rotation_converged=model.rotation_converged,
        scores=score(model, svi),
    )
