#!/usr/bin/env python3
"""
Staking Reward Forecasters
==========================

1. MWA - moving-window average of the last W rewards (level forecast, the
   same value for every horizon)
2. SLR - least-squares regression on L lagged rewards
3. MLR - least-squares regression on L lags of rewards, price and trends

Multi-day forecasts use the direct strategy: one independent model per
horizon n, trained to map the L-day window ending at day t onto the reward at
day t + n.

The regression always carries an unpenalized intercept.  A small ridge term
(ridge_eps, applied to unit-variance columns) keeps rank-deficient windows
solvable; with ridge_eps = 0 the fit is exact least squares and a singular
design raises DegenerateSystem.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg

from series_core import FEATURE_NAMES, FeatureFrame, StakingError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 7
DEFAULT_LAGS = 7
DEFAULT_HORIZON = 1
DEFAULT_RIDGE_EPS = 1e-8
STRATEGIES = ("direct",)


class InsufficientHistory(StakingError):
    stage = "fit"


class FrameTooShort(StakingError):
    stage = "fit"


class MissingFeature(StakingError):
    stage = "fit"


class DegenerateSystem(StakingError):
    stage = "fit"


class DimensionMismatch(StakingError):
    stage = "fit"


class InvalidForecastSpec(StakingError):
    stage = "fit"


# ============================================================================
# SPECIFICATION
# ============================================================================

class Method(str, Enum):
    MWA = "mwa"
    SLR = "slr"
    MLR = "mlr"

    @classmethod
    def parse(cls, text: Union[str, "Method"]) -> "Method":
        if isinstance(text, Method):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise InvalidForecastSpec(f"unknown method {text!r} (mwa, slr, mlr)") from None

    @property
    def label(self) -> str:
        return self.name

    @property
    def features(self) -> Tuple[str, ...]:
        return FEATURE_NAMES if self is Method.MLR else ("rewards",)

    @property
    def default_normalize(self) -> bool:
        # mixed units (percent, USD, index points) only for MLR
        return self is Method.MLR


@dataclass(frozen=True)
class ForecastSpec:
    method: Method = Method.MWA
    window: int = DEFAULT_WINDOW
    lags: int = DEFAULT_LAGS
    horizon: int = DEFAULT_HORIZON
    normalize: Optional[bool] = None
    ridge_eps: float = DEFAULT_RIDGE_EPS
    strategy: str = "direct"

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        for field_name in ("window", "lags", "horizon"):
            value = getattr(self, field_name)
            try:
                whole = int(value) == value and value >= 1
            except (TypeError, ValueError, OverflowError):
                whole = False
            if not whole:
                raise InvalidForecastSpec(f"{field_name} must be a positive integer, got {value}")
            object.__setattr__(self, field_name, int(value))
        if not self.ridge_eps >= 0:
            raise InvalidForecastSpec(f"ridge_eps must be >= 0, got {self.ridge_eps}")
        if self.strategy not in STRATEGIES:
            raise InvalidForecastSpec(f"unsupported strategy {self.strategy!r}")
        if self.normalize is None:
            object.__setattr__(self, "normalize", self.method.default_normalize)

    @property
    def history_needed(self) -> int:
        return self.window if self.method is Method.MWA else self.lags

    def with_horizon(self, horizon: int) -> "ForecastSpec":
        return replace(self, horizon=horizon)

    def with_method(self, method: Union[str, Method]) -> "ForecastSpec":
        method = Method.parse(method)
        return replace(self, method=method, normalize=method.default_normalize)


# ============================================================================
# MOVING-WINDOW AVERAGE
# ============================================================================

def mwa_predict(history: Sequence[float], window: int = DEFAULT_WINDOW, horizon: int = 1) -> float:
    """Mean of the last `window` values; identical for every horizon."""
    history = np.asarray(history, dtype=np.float64)
    if len(history) < window:
        raise InsufficientHistory(f"MWA needs {window} observations, got {len(history)}")
    return float(np.mean(history[-window:]))


# ============================================================================
# LAG MATRIX
# ============================================================================

@dataclass(frozen=True, eq=False)
class LagMatrix:
    """Design matrix of lag windows and their n-day-ahead reward targets."""

    features: np.ndarray          # (rows, len(feature_names) * lags)
    targets: np.ndarray           # (rows,)
    feature_names: Tuple[str, ...]
    lags: int
    horizon: int
    origins: np.ndarray           # frame index of each row's forecast origin
    origin_dates: np.ndarray

    @property
    def layout(self) -> Tuple[str, ...]:
        return tuple(f"{name}[t-{self.lags - 1 - k}]" for name in self.feature_names
                     for k in range(self.lags))

    @property
    def rows(self):
        return [(tuple(x), float(y)) for x, y in zip(self.features, self.targets)]

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def from_arrays(cls, features, targets) -> "LagMatrix":
        """Wrap a plain (rows, columns) design; columns are labelled x[t-k]."""
        X = np.atleast_2d(np.asarray(features, dtype=np.float64))
        y = np.asarray(targets, dtype=np.float64)
        origins = np.arange(len(y))
        return cls(features=X, targets=y, feature_names=("x",), lags=X.shape[1], horizon=1,
                   origins=origins, origin_dates=origins.astype("datetime64[D]"))


def _select_features(frame: FeatureFrame, features: Iterable[str]) -> Tuple[str, ...]:
    requested = set(features)
    unknown = requested - set(FEATURE_NAMES)
    if unknown:
        raise MissingFeature(" ".join(sorted(unknown)))
    if "rewards" not in requested:
        raise MissingFeature("rewards")
    names = tuple(n for n in FEATURE_NAMES if n in requested)
    for name in names:
        if frame.series(name) is None:
            raise MissingFeature(name)
    return names


def require_features(frame: FeatureFrame, features: Iterable[str]) -> Tuple[str, ...]:
    """Feature names in canonical order; MissingFeature if any is absent."""
    return _select_features(frame, features)


def lag_vector(frame: FeatureFrame, features: Sequence[str], lags: int, origin: int) -> np.ndarray:
    """The L values of each feature ending at `origin`, feature-major."""
    if origin < lags - 1:
        raise InsufficientHistory(f"origin {origin} leaves fewer than {lags} lags")
    return np.concatenate([frame.series(name).values[origin - lags + 1:origin + 1]
                           for name in features])


def build_lag_matrix(frame: FeatureFrame,
                     features: Iterable[str] = ("rewards",),
                     lags: int = DEFAULT_LAGS,
                     horizon: int = DEFAULT_HORIZON) -> LagMatrix:
    """
    Rows for every origin t in [L-1, T-n-1]: the L values of each feature
    ending at t, and the reward at t + n.  Row count is T - L - n + 1.
    """
    names = _select_features(frame, features)
    T = len(frame)
    if T < lags + horizon:
        raise FrameTooShort(f"frame of {T} days, need >= {lags + horizon} for L={lags}, n={horizon}")

    origins = np.arange(lags - 1, T - horizon)
    blocks = [sliding_window_view(frame.series(name).values, lags)[:len(origins)] for name in names]
    X = np.hstack(blocks)
    y = frame.rewards.values[origins + horizon]
    return LagMatrix(features=X, targets=y, feature_names=names, lags=lags, horizon=horizon,
                     origins=origins, origin_dates=frame.dates[origins])


# ============================================================================
# LEAST SQUARES
# ============================================================================

@dataclass(frozen=True, eq=False)
class OlsModel:
    coefficients: np.ndarray
    intercept: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    layout: Tuple[str, ...] = ()
    spec: Optional[ForecastSpec] = None

    @property
    def normalized(self) -> bool:
        return not (np.all(self.feature_means == 0) and np.all(self.feature_stds == 1))


def _column_scale(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # zero-variance columns get std 1 so z-scoring stays total
    tiny = np.finfo(np.float64).eps * np.maximum(np.abs(means), np.finfo(np.float64).tiny)
    stds = np.where(stds <= tiny, 1.0, stds)
    return means, stds


def ols_fit(matrix: LagMatrix,
            normalize: bool = False,
            ridge_eps: float = DEFAULT_RIDGE_EPS,
            spec: Optional[ForecastSpec] = None) -> OlsModel:
    """
    Minimize sum (y - b0 - b.x)^2 + ridge_eps * |b_z|^2 where b_z are the
    coefficients on z-scored columns.  The intercept is never penalized.

    The penalized problem is solved as an augmented least-squares system
    (scipy lstsq, complete orthogonal factorization) rather than through the
    normal equations.
    """
    X = np.asarray(matrix.features, dtype=np.float64)
    y = np.asarray(matrix.targets, dtype=np.float64)
    if X.ndim != 2 or len(y) == 0 or X.shape[0] != len(y):
        raise DimensionMismatch(f"design {X.shape} vs {len(y)} targets")
    if ridge_eps < 0:
        raise InvalidForecastSpec(f"ridge_eps must be >= 0, got {ridge_eps}")

    m, p = X.shape
    means, stds = _column_scale(X)
    Z = (X - means) / stds
    z_bar = Z.mean(axis=0)
    y_bar = float(y.mean())
    Zc = Z - z_bar
    yc = y - y_bar

    if ridge_eps > 0:
        A = np.vstack([Zc, np.sqrt(ridge_eps) * np.eye(p)])
        b = np.concatenate([yc, np.zeros(p)])
    else:
        A, b = Zc, yc

    beta_z, _, rank, _ = linalg.lstsq(A, b, lapack_driver="gelsy")
    if ridge_eps == 0 and rank < p:
        raise DegenerateSystem(f"design of rank {rank} < {p} columns with ridge_eps=0")

    intercept_z = y_bar - float(z_bar @ beta_z)
    if normalize:
        model = OlsModel(beta_z, intercept_z, means, stds, matrix.layout, spec)
    else:
        beta = beta_z / stds
        intercept = intercept_z - float(means @ beta)
        model = OlsModel(beta, intercept, np.zeros(p), np.ones(p), matrix.layout, spec)

    logger.debug("ols_fit: %d rows x %d columns, rank %d, ridge_eps=%g", m, p, rank, ridge_eps)
    return model


def ols_predict(model: OlsModel, features: Sequence[float]) -> float:
    x = np.asarray(features, dtype=np.float64)
    if x.shape != model.coefficients.shape:
        raise DimensionMismatch(f"{x.size} features for {model.coefficients.size} coefficients")
    z = (x - model.feature_means) / model.feature_stds
    return float(model.intercept + z @ model.coefficients)


def pinv_solution(X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Reference least-squares solution through the SVD pseudo-inverse."""
    X = np.asarray(X, dtype=np.float64)
    design = np.column_stack([np.ones(len(X)), X])
    w = np.linalg.pinv(design) @ np.asarray(y, dtype=np.float64)
    return float(w[0]), w[1:]


# ============================================================================
# FITTED FORECASTERS
# ============================================================================

@dataclass(frozen=True)
class MwaForecaster:
    spec: ForecastSpec

    @property
    def min_origin(self) -> int:
        return self.spec.window - 1

    def predict_at(self, frame: FeatureFrame, origin: int) -> float:
        _check_origin(frame, origin, self.min_origin)
        return mwa_predict(frame.rewards.values[:origin + 1], self.spec.window, self.spec.horizon)


@dataclass(frozen=True)
class OlsForecaster:
    spec: ForecastSpec
    model: OlsModel
    feature_names: Tuple[str, ...]

    @property
    def min_origin(self) -> int:
        return self.spec.lags - 1

    def predict_at(self, frame: FeatureFrame, origin: int) -> float:
        _check_origin(frame, origin, self.min_origin)
        x = lag_vector(frame, self.feature_names, self.spec.lags, origin)
        return ols_predict(self.model, x)


Forecaster = Union[MwaForecaster, OlsForecaster]


def _check_origin(frame: FeatureFrame, origin: int, min_origin: int) -> None:
    if origin < min_origin:
        raise InsufficientHistory(f"origin {origin} < {min_origin}: not enough history")
    if origin >= len(frame):
        raise InsufficientHistory(f"origin {origin} is past the frame end ({len(frame)} days)")


def fit_direct(frame: FeatureFrame, spec: ForecastSpec) -> Forecaster:
    """One forecaster for spec.horizon, trained on the whole frame."""
    if spec.method is Method.MWA:
        if len(frame) < spec.window:
            raise InsufficientHistory(f"MWA needs {spec.window} days, frame has {len(frame)}")
        return MwaForecaster(spec)

    matrix = build_lag_matrix(frame, spec.method.features, spec.lags, spec.horizon)
    model = ols_fit(matrix, normalize=spec.normalize, ridge_eps=spec.ridge_eps, spec=spec)
    return OlsForecaster(spec, model, matrix.feature_names)


def fit_horizons(frame: FeatureFrame, spec: ForecastSpec, horizons: Iterable[int],
                 max_workers: int = 1) -> Dict[int, Forecaster]:
    """Independent direct fits for several horizons."""
    horizons = list(horizons)
    specs = [spec.with_horizon(n) for n in horizons]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            fitted = list(pool.map(lambda s: fit_direct(frame, s), specs))
    else:
        fitted = [fit_direct(frame, s) for s in specs]
    return dict(zip(horizons, fitted))


def predict_at(forecaster: Forecaster, frame: FeatureFrame, origin: int) -> float:
    """Forecast of rewards at origin + n using frame data up to origin only."""
    return forecaster.predict_at(frame, origin)
