"""Flat ``section.key = value`` configuration shared by the CLI commands.

Example::

    grid.n = 4
    grid.fps = 10
    abis.method = kmeans
    abis.k = 4
    abis.iob_threshold = 0.3
    imaging.blue = 200, 260, 0.40, 1, 0.20, 1
    cabs.measure = tau
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

from . import abis, imaging
from .core import BdtError
from .strategy import Measure


class ConfigError(BdtError):
    pass


METHODS = ("rgb", "kmeans", "knn")


@dataclass(frozen=True)
class Config:
    n: int | None = None
    fps: Fraction = Fraction(10)
    method: str = "rgb"
    threshold: float = 140.0
    k: int | None = None
    bins: int = 8
    iob_threshold: float = 0.3
    smoothing: bool = True
    blue: imaging.HsvRange = imaging.BLUE_RANGE
    green: imaging.HsvRange = imaging.GREEN_RANGE
    min_blue_area: int = 40
    measure: Measure = Measure.TAU
    swap_window: int | None = None
    rle: bool = False

    def color_method(self) -> abis.ColorMethod:
        if self.method == "rgb":
            return abis.RgbAveraging(self.threshold)
        if self.method == "kmeans":
            return abis.KMeans(k=self.k or 1, threshold=self.threshold)
        if self.method == "knn":
            return abis.Knn(k=self.k or 3, bins=self.bins)
        raise ConfigError(f"abis.method: unknown method {self.method!r}")

    def detector_config(self) -> abis.DetectorConfig:
        return abis.DetectorConfig(blue=self.blue, green=self.green, min_blue_area=self.min_blue_area)

    def settings(self) -> dict:
        """Echo block written next to every detection result."""
        m = self.color_method()
        out = {"method": self.method, "iob_threshold": self.iob_threshold, "smoothing": self.smoothing,
               "blue_hsv": _range_list(self.blue), "green_hsv": _range_list(self.green),
               "min_blue_area": self.min_blue_area}
        if isinstance(m, abis.RgbAveraging):
            out["threshold"] = m.threshold
        elif isinstance(m, abis.KMeans):
            out.update(k=m.k, threshold=m.threshold, max_iter=m.max_iter, tol=m.tol)
        else:
            out.update(k=m.k, bins=m.bins)
        return out

    def override(self, **values) -> "Config":
        values = {k: v for k, v in values.items() if v is not None}
        return _validated(replace(self, **values)) if values else self


def _range_list(r: imaging.HsvRange) -> list[float]:
    return [r.h_min, r.h_max, r.s_min, r.s_max, r.v_min, r.v_max]


_KEYS = {
    "grid.n": ("n", int),
    "grid.fps": ("fps", lambda s: Fraction(s.strip())),
    "abis.method": ("method", str.strip),
    "abis.threshold": ("threshold", float),
    "abis.k": ("k", int),
    "abis.bins": ("bins", int),
    "abis.iob_threshold": ("iob_threshold", float),
    "abis.smoothing": ("smoothing", None),
    "imaging.blue": ("blue", None),
    "imaging.green": ("green", None),
    "imaging.min_blue_area": ("min_blue_area", int),
    "cabs.measure": ("measure", lambda s: Measure(s.strip().lower())),
    "cabs.swap_window": ("swap_window", int),
    "output.rle": ("rle", None),
}


def _parse_range(text: str) -> imaging.HsvRange:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 6:
        raise ValueError("expected h_min, h_max, s_min, s_max, v_min, v_max")
    return imaging.HsvRange(*parts)


def _validated(cfg: Config) -> Config:
    if cfg.method not in METHODS:
        raise ConfigError(f"abis.method: must be one of {', '.join(METHODS)}")
    if not 0 <= cfg.iob_threshold <= 1:
        raise ConfigError("abis.iob_threshold: must be in [0, 1]")
    if cfg.n is not None and cfg.n < 2:
        raise ConfigError("grid.n: must be >= 2")
    if cfg.fps <= 0:
        raise ConfigError("grid.fps: must be positive")
    try:
        cfg.color_method()
    except ValueError as exc:
        raise ConfigError(f"abis: {exc}") from None
    return cfg


def parse_config(text: str) -> Config:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from None
    values = {}
    for key, raw in parser["config"].items():
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown key")
        attr, conv = _KEYS[key]
        try:
            if attr in ("smoothing", "rle"):
                values[attr] = parser.getboolean("config", key)
            elif attr in ("blue", "green"):
                values[attr] = _parse_range(raw)
            else:
                values[attr] = conv(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return _validated(replace(Config(), **values))


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    return parse_config(Path(path).read_text(encoding="utf-8"))


CONFIG_KEYS = tuple(_KEYS)
