"""Market analytics from crowd sentiment and search volume.

Weekly feature construction from tweets and market data, factor reduction
of search-volume terms, lagged-correlation and causality analysis, and
mined ARIMA/exponential-smoothing forecasts with exogenous predictors.
"""

from .series import (
    MISSING,
    AlignmentError,
    SeriesError,
    WeeklySeries,
    WeekStamp,
    align,
    difference,
    is_missing,
    lag,
    log_transform,
)
from .ingestion import (
    CorpusRejectedError,
    IngestionError,
    OhlcvWeekly,
    SviMatrix,
    TweetRecord,
    closing_week,
    parse_ohlcv,
    parse_svi,
    parse_tweets,
    parse_weekly_values,
    window_tweets,
)
from .sentiment import (
    NaiveBayesModel,
    SentimentError,
    classify,
    label_tweets,
    train,
)
from .features import (
    SecurityFeatures,
    TwitterFeatureSet,
    agreement,
    build_feature_sets,
    bullishness,
    count_buckets,
    gk_volatility,
    message_volume,
    weekly_returns,
)
from .factors import FactorError, FactorModel, extract_factors, fit_factors, varimax
from .econometrics import (
    EconometricsError,
    GrangerResult,
    LagCorrelogram,
    cross_correlogram,
    granger_test,
    pearson,
    significance_table,
)
from .forecasting import (
    ArimaSpec,
    FittingError,
    ForecastReport,
    SearchSpace,
    compare_with_without,
    direction_accuracy,
    fit_arima,
    fit_es,
    mape,
    mine_models,
    rolling_forecast,
    stationary_r2,
    stepwise_select,
)
from .fixtures import make_fixture

__version__ = "0.1.0"
