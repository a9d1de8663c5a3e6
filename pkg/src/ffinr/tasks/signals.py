"""1-D target generators on the uniform grid ``x_j = j / n`` over ``[0, 1)``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..errors import ConfigError, InvalidInputError


@dataclass(frozen=True)
class Spike:
    """Tent of full base ``width`` peaking at ``center``; zero outside the base."""

    center: float
    width: float
    height: float = 1.0

    def __call__(self, x):
        half = self.width / 2.0
        return self.height * np.maximum(0.0, 1.0 - np.abs(x - self.center) / half)

    def validate(self):
        half = self.width / 2.0
        if not self.width > 0:
            raise InvalidInputError("spike width must be positive")
        if self.center - half < 0.0 or self.center + half >= 1.0:
            raise InvalidInputError(f"spike support [{self.center - half}, {self.center + half}] leaves [0, 1)")


@dataclass(frozen=True)
class Sinusoid:
    freq: float
    amp: float = 1.0
    phase: float = 0.0

    def __call__(self, x):
        return self.amp * np.sin(2.0 * np.pi * self.freq * x + self.phase)

    def validate(self):
        if not all(map(math.isfinite, (self.freq, self.amp, self.phase))):
            raise InvalidInputError("sinusoid parameters must be finite")


@dataclass(frozen=True)
class Composite:
    parts: Tuple["Generator", ...]

    def __call__(self, x):
        out = np.zeros_like(x)
        for p in self.parts:
            out = out + p(x)
        return out

    def validate(self):
        if not self.parts:
            raise InvalidInputError("composite needs at least one part")
        for p in self.parts:
            p.validate()


Generator = Union[Spike, Sinusoid, Composite]


@dataclass
class Signal1D:
    xs: np.ndarray
    ys: np.ndarray
    generator: Generator


def make_signal(generator: Generator, n_samples: int) -> Signal1D:
    if n_samples < 8:
        raise InvalidInputError("need at least 8 samples")
    generator.validate()
    xs = np.arange(n_samples) / n_samples
    ys = np.asarray(generator(xs), dtype=np.float64)
    return Signal1D(xs, ys, generator)


def generator_to_dict(g: Generator) -> dict:
    if isinstance(g, Spike):
        return {"type": "spike", "center": g.center, "width": g.width, "height": g.height}
    if isinstance(g, Sinusoid):
        return {"type": "sinusoid", "freq": g.freq, "amp": g.amp, "phase": g.phase}
    return {"type": "composite", "parts": [generator_to_dict(p) for p in g.parts]}


def generator_from_dict(d: dict) -> Generator:
    kind = d.get("type")
    fields = {k: v for k, v in d.items() if k != "type"}
    try:
        if kind == "spike":
            return Spike(**fields)
        if kind == "sinusoid":
            return Sinusoid(**fields)
        if kind == "composite":
            return Composite(tuple(generator_from_dict(p) for p in fields["parts"]))
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad {kind} generator: {exc}") from None
    raise ConfigError(f"unknown signal generator type {kind!r}")


def two_region_composite() -> Composite:
    """Smooth low-frequency background plus a narrow spike."""
    return Composite((Sinusoid(1.0, 0.5), Sinusoid(2.0, 0.25, 0.7), Spike(0.7, 0.06, 1.0)))
