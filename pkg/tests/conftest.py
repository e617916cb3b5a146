import datetime as dt
import os
from pathlib import Path

import numpy as np
import pytest

from qgf.market_data import Bar, PriceSeries


def fixtures_dir() -> Path:
    return Path(os.environ.get("QGF_FIXTURES", Path(__file__).parent / "fixtures"))


@pytest.fixture
def fixtures() -> Path:
    return fixtures_dir()


def make_series(rng: np.random.Generator, length: int, symbol: str = "TST",
                start: dt.date = dt.date(2015, 1, 2), flat_run: tuple[int, int] | None = None,
                base: float = 100.0) -> PriceSeries:
    """Random valid OHLCV bars; ``flat_run`` = (start, count) pins a span of
    identical flat bars to exercise degenerate windows."""
    bars = []
    close = base
    for i in range(length):
        if flat_run is not None and flat_run[0] <= i < flat_run[0] + flat_run[1]:
            price = bars[-1].close if bars else base
            bars.append(Bar(start + dt.timedelta(days=i), price, price, price, price,
                            price, 5000))
            close = price
            continue
        open_ = close * float(np.exp(rng.normal(0, 0.01)))
        close = open_ * float(np.exp(rng.normal(0, 0.02)))
        high = max(open_, close) * float(np.exp(abs(rng.normal(0, 0.006))))
        low = min(open_, close) * float(np.exp(-abs(rng.normal(0, 0.006))))
        volume = int(rng.integers(1_000, 100_000))
        bars.append(Bar(start + dt.timedelta(days=i), open_, high, low, close, close, volume))
    return PriceSeries(symbol=symbol, bars=tuple(bars))


def make_flat_series(length: int, price: float = 10.0, volume: int = 100) -> PriceSeries:
    start = dt.date(2015, 1, 2)
    return PriceSeries(symbol="FLT", bars=tuple(
        Bar(start + dt.timedelta(days=i), price, price, price, price, price, volume)
        for i in range(length)))


def noisy_sine_batch(rng: np.random.Generator, count: int, length: int,
                     noise: float = 0.1) -> np.ndarray:
    t = np.arange(length)
    rows = [np.sin(2 * np.pi * (t / 16 + rng.random())) + rng.normal(0, noise, length)
            for _ in range(count)]
    return np.stack(rows)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
