"""Seeded synthetic datasets and the Mauna Loa CO2 ingestion recipe.

Every generator returns a DataFrame with the input columns and ``y`` (the
Mauna Loa tables use ``co2``). Inputs are drawn uniformly, the response is
the true function plus Gaussian noise.
"""

from __future__ import annotations

import io
import logging
from collections.abc import Callable

import httpx
import numpy as np
import pandas as pd
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .errors import EmptyData, MissingColumn
from .models import FloatArray

logger = logging.getLogger(__name__)

NOAA_MONTHLY_URL = "https://gml.noaa.gov/webdata/ccgg/trends/co2/co2_mm_mlo.csv"


def _rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _one_input(
    fn: Callable[[FloatArray], FloatArray],
    n: int,
    low: float,
    high: float,
    noise: float,
    seed: int | np.random.Generator | None,
) -> pd.DataFrame:
    rng = _rng(seed)
    x = np.sort(rng.uniform(low, high, n))
    return pd.DataFrame({"x": x, "y": fn(x) + noise * rng.standard_normal(n)})


def quartic(x: FloatArray) -> FloatArray:
    return 3.0 * x**4 - 6.0 * x**2 + 2.0


def surface(x1: FloatArray, x2: FloatArray) -> FloatArray:
    return 0.5 * x1 + 4.0 * (x2 - 0.5) ** 2 / (1.0 + 2.0 * x1)


def periodic_wave(x: FloatArray) -> FloatArray:
    return np.cos(x) ** 3 - np.sin(x) ** 3


def quartic_data(
    n: int = 100,
    noise: float = 0.3,
    low: float = -1.0,
    high: float = 1.0,
    seed: int | np.random.Generator | None = 0,
) -> pd.DataFrame:
    """Noisy ``3x^4 - 6x^2 + 2``; the order and prior-variance demos."""
    return _one_input(quartic, n, low, high, noise, seed)


def surface_data(
    n: int = 300, noise: float = 0.1, seed: int | np.random.Generator | None = 0
) -> pd.DataFrame:
    """Noisy ``0.5 x1 + 4 (x2 - 0.5)^2 / (1 + 2 x1)`` on the unit square."""
    rng = _rng(seed)
    x1, x2 = rng.uniform(0.0, 1.0, n), rng.uniform(0.0, 1.0, n)
    y = surface(x1, x2) + noise * rng.standard_normal(n)
    return pd.DataFrame({"x1": x1, "x2": x2, "y": y})


def sine_cubed_data(
    n: int = 200, noise: float = 0.1, seed: int | np.random.Generator | None = 0
) -> pd.DataFrame:
    """Noisy ``sin(x^3)`` on [0, 3]; smooth at the left, wiggly at the right."""
    return _one_input(lambda x: np.sin(x**3), n, 0.0, 3.0, noise, seed)


def jump_data(
    n: int = 200, noise: float = 0.1, seed: int | np.random.Generator | None = 0
) -> pd.DataFrame:
    """Noisy ``sin(x) + 1(x > 2)`` on [0, 2 pi]."""
    return _one_input(
        lambda x: np.sin(x) + (x > 2.0).astype(float), n, 0.0, 2.0 * np.pi, noise, seed
    )


def periodic_data(
    n: int = 200, noise: float = 0.1, seed: int | np.random.Generator | None = 0
) -> pd.DataFrame:
    """Noisy ``cos^3 x - sin^3 x`` on [-pi, pi]."""
    return _one_input(periodic_wave, n, -np.pi, np.pi, noise, seed)


def monotone_data(
    n: int = 50, noise: float = 0.1, seed: int | np.random.Generator | None = 0
) -> pd.DataFrame:
    """Noisy ``(1 + x) / 2`` on [-1, 1]."""
    return _one_input(lambda x: 0.5 * (1.0 + x), n, -1.0, 1.0, noise, seed)


ADDITIVE_COMPONENTS: dict[str, Callable[[FloatArray], FloatArray]] = {
    "x1": lambda x: 2.0 * np.sin(np.pi * x),
    "x2": lambda x: np.exp(2.0 * x),
    "x3": lambda x: x**11 * (10.0 * (1.0 - x)) ** 6 / 5.0 + 1e4 * x**3 * (1.0 - x) ** 10,
}


def additive_data(
    n: int = 400, noise: float = 0.5, seed: int | np.random.Generator | None = 0
) -> pd.DataFrame:
    """Sum of three components of different smoothness, one per independent input."""
    rng = _rng(seed)
    frame = pd.DataFrame({name: rng.uniform(0.0, 1.0, n) for name in ADDITIVE_COMPONENTS})
    y = sum(fn(frame[name].to_numpy()) for name, fn in ADDITIVE_COMPONENTS.items())
    frame["y"] = y + noise * rng.standard_normal(n)
    return frame


def keeling_like_data(
    years: int = 30,
    start: float = 1990.0,
    noise: float = 0.3,
    seed: int | np.random.Generator | None = 0,
) -> pd.DataFrame:
    """Monthly (time, month, co2) series with a rising trend and an annual cycle.

    Stands in for the NOAA record when no snapshot is available.
    """
    rng = _rng(seed)
    index = np.arange(12 * years)
    time = start + (index + 0.5) / 12.0
    month = index % 12 + 1
    elapsed = time - start
    trend = 354.0 + 1.5 * elapsed + 0.012 * elapsed**2
    phase = 2.0 * np.pi * (month - 1) / 12.0
    season = 3.0 * np.sin(phase + 0.5) + 0.8 * np.sin(2.0 * phase)
    co2 = trend + season + noise * rng.standard_normal(index.shape[0])
    return pd.DataFrame({"time": time, "month": month.astype(float), "co2": co2})


@retry(
    retry=retry_if_exception_type(httpx.HTTPError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=1, min=1, max=10),
    reraise=True,
)
def fetch_noaa_monthly(url: str = NOAA_MONTHLY_URL, timeout: float = 30.0) -> str:
    """Download the NOAA monthly Mauna Loa CSV text."""
    logger.info("downloading %s", url)
    response = httpx.get(url, timeout=timeout, follow_redirects=True)
    response.raise_for_status()
    return response.text


def convert_noaa_monthly(text: str) -> pd.DataFrame:
    """(time, month, co2) table from the NOAA monthly CSV; missing months are dropped."""
    raw = pd.read_csv(io.StringIO(text), comment="#", skipinitialspace=True)
    raw.columns = [str(c).strip().lower() for c in raw.columns]
    for column in ("decimal date", "month", "average"):
        if column not in raw.columns:
            raise MissingColumn(column)
    frame = pd.DataFrame(
        {
            "time": raw["decimal date"].astype(float),
            "month": raw["month"].astype(float),
            "co2": raw["average"].astype(float),
        }
    )
    frame = frame[frame["co2"] > 0].reset_index(drop=True)
    if frame.empty:
        raise EmptyData("NOAA table has no valid monthly means")
    return frame
