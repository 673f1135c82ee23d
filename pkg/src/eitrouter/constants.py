"""Reference physical constants, loaded from the packaged ``constants.yaml``."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

import yaml


@lru_cache(maxsize=None)
def load_constants() -> dict:
    text = resources.files("eitrouter").joinpath("data/constants.yaml").read_text()
    return yaml.safe_load(text)


def cs_d2_wavelength_nm() -> float:
    return float(load_constants()["cs_d2"]["vacuum_wavelength_nm"])


def cs_d2_linewidth_mhz() -> float:
    return float(load_constants()["cs_d2"]["natural_linewidth_mhz"])
