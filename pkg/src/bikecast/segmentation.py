"""Overlapping sub-datasets, (input, output) instance segmentation and
temporally ordered train/validation/test splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Sequence

from .errors import (
    BadFractions,
    InputTooShort,
    SeriesTooShort,
    TooFewInstances,
    WindowTooLarge,
)
from .series import TimeSeries

DAY = timedelta(days=1)


@dataclass(frozen=True)
class SubdatasetSpec:
    """Window/step lengths (in days) for overlapping sub-datasets."""

    window_size: int
    step_size: int

    def __post_init__(self):
        if self.window_size < 1 or self.step_size < 1:
            raise ValueError("window_size and step_size must be >= 1")


@dataclass(frozen=True)
class Instance:
    """(input window, output horizon) pair.

    The optional ``prospective`` block carries declared horizon-covering
    context channels for second-stage refinement; it is aligned with
    ``output``.
    """

    input: TimeSeries
    output: TimeSeries
    origin: datetime
    prospective: TimeSeries | None = None

    def __post_init__(self):
        if self.input.resolution != self.output.resolution:
            raise ValueError("input and output must share resolution")
        expected = self.input.start + self.input.length * self.input.resolution
        if self.output.start != expected:
            raise ValueError("output must start one step after the input ends")


@dataclass(frozen=True)
class Fold:
    """Temporally ordered train/validation/test partition."""

    train: tuple[Instance, ...]
    validation: tuple[Instance, ...]
    test: tuple[Instance, ...]

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "validation", tuple(self.validation))
        object.__setattr__(self, "test", tuple(self.test))
        if self.train and self.validation:
            if max(i.origin for i in self.train) >= min(i.origin for i in self.validation):
                raise ValueError("training instances must precede validation")
        if self.validation and self.test:
            if max(i.origin for i in self.validation) >= min(i.origin for i in self.test):
                raise ValueError("validation instances must precede test")


def steps_per_day(ts: TimeSeries) -> int:
    per_day = DAY / ts.resolution
    if per_day != int(per_day):
        raise ValueError(f"resolution {ts.resolution} does not tile a day")
    return int(per_day)


def create_subdatasets(
    series: TimeSeries, window_size: int, step_size: int = 1
) -> list[TimeSeries]:
    """Contiguous windows of ``window_size`` days advancing ``step_size`` days.

    Produces floor((D - window) / step) + 1 windows where D is the series
    length in whole days.
    """
    if window_size < 1 or step_size < 1:
        raise ValueError("window_size and step_size must be >= 1")
    spd = steps_per_day(series)
    total_days = series.length // spd
    if window_size > total_days:
        raise WindowTooLarge(
            f"window of {window_size} days exceeds series of {total_days} days"
        )
    count = (total_days - window_size) // step_size + 1
    out = []
    for i in range(count):
        lo = i * step_size * spd
        hi = lo + window_size * spd
        out.append(series.slice(lo, hi))
    return out


def segment_instances(
    series: TimeSeries,
    h: int,
    target_channel: str,
    input_len: int | None = None,
    slide: int | None = None,
    prospective_channels: Sequence[str] = (),
) -> list[Instance]:
    """Slide an (input, output) template over the series.

    Defaults follow the learning protocol: input length 7*h and a one-day
    slide. The output holds the target channel only; declared prospective
    channels are attached alongside it.
    """
    if input_len is None:
        input_len = 7 * h
    if slide is None:
        slide = steps_per_day(series)
    if input_len < 2 * h:
        raise InputTooShort(f"input_len {input_len} < 2*h = {2 * h}")
    if slide < 1:
        raise ValueError("slide must be >= 1")
    if series.length < input_len + h:
        raise SeriesTooShort(
            f"series length {series.length} < input_len + h = {input_len + h}"
        )
    count = (series.length - input_len - h) // slide + 1
    out = []
    for i in range(count):
        lo = i * slide
        window = series.slice(lo, lo + input_len)
        horizon = series.slice(lo + input_len, lo + input_len + h)
        prospective = None
        if prospective_channels:
            prospective = horizon.select(list(prospective_channels))
        out.append(
            Instance(
                input=window,
                output=horizon.select([target_channel]),
                origin=window.start,
                prospective=prospective,
            )
        )
    return out


def temporal_split(
    instances: Sequence[Instance], fractions: tuple[float, float, float]
) -> Fold:
    """Split origin-ordered instances into train/validation/test blocks."""
    f_train, f_val, f_test = fractions
    if min(fractions) <= 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions {fractions} must be positive and sum to 1")
    ordered = list(instances)
    if any(a.origin > b.origin for a, b in zip(ordered, ordered[1:])):
        raise ValueError("instances must be sorted by origin")
    n = len(ordered)
    n_train = math.ceil(f_train * n)
    n_val = math.ceil(f_val * n)
    train = ordered[:n_train]
    validation = ordered[n_train : n_train + n_val]
    test = ordered[n_train + n_val :]
    if not train or not validation or not test:
        raise TooFewInstances(
            f"{n} instances cannot fill all three splits with fractions {fractions}"
        )
    return Fold(tuple(train), tuple(validation), tuple(test))


def training_index_range(fold: Fold, series: TimeSeries) -> tuple[int, int]:
    """Index interval of the series covered by the fold's training instances.

    Used to fit scalers on training data only.
    """
    last = max(fold.train, key=lambda i: i.origin)
    end = last.origin + (last.input.length + last.output.length) * series.resolution
    hi = int((end - series.start) / series.resolution)
    return 0, min(hi, series.length)
