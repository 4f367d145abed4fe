"""Built-in benchmark scenario and quantizer bank.

A two-state, two-output plant with three sign/threshold quantizers of
2, 4, and 8 cells priced 100, 200, 300, used throughout the test suite
and the CLI demo paths.
"""

from __future__ import annotations

import math

from .model import ScenarioModel, validate_scenario
from .quantizer import QuantizerBank, load_bank

INF = math.inf


def demo_scenario(T: int = 50) -> ScenarioModel:
    """Unstable 2x2 benchmark plant with Q1 = Q2 = R = I/2."""
    return validate_scenario({
        "A": [[1.01, 0.5], [0.0, 1.1]],
        "B": [[0.1, 0.0], [0.0, 0.15]],
        "C": [[1.0, 0.0], [1.0, 1.0]],
        "W": [[0.5, 0.0], [0.0, 0.5]],
        "V": [[0.25, 0.0], [0.0, 0.25]],
        "Sigma_x": [[1.0, 0.0], [0.0, 1.0]],
        "mu0": [0.0, 0.0],
        "Q1": [[0.5, 0.0], [0.0, 0.5]],
        "Q2": [[0.5, 0.0], [0.0, 0.5]],
        "R": [[0.5, 0.0], [0.0, 0.5]],
        "T": T,
    })


def demo_bank_dict(bit_rate: int = 1, with_null: bool = False,
                   prices=(100.0, 200.0, 300.0)) -> dict:
    """JSON-shaped bank description for the benchmark quantizers.

    Quantizer 1 splits the first coordinate at 0; quantizer 2 splits both
    coordinates at 0 (quadrants); quantizer 3 additionally splits the
    first coordinate at -1 and 1. Optionally prepends a single-cell
    zero-price null quantizer.
    """
    half = [
        [[0.0, "inf"], ["-inf", "inf"]],
        [["-inf", 0.0], ["-inf", "inf"]],
    ]
    quadrants = [
        [[0.0, "inf"], [0.0, "inf"]],
        [[0.0, "inf"], ["-inf", 0.0]],
        [["-inf", 0.0], [0.0, "inf"]],
        [["-inf", 0.0], ["-inf", 0.0]],
    ]
    eight = []
    for x_lo, x_hi in ([0.0, 1.0], [1.0, "inf"], [-1.0, 0.0], ["-inf", -1.0]):
        for y_lo, y_hi in ([0.0, "inf"], ["-inf", 0.0]):
            eight.append([[x_lo, x_hi], [y_lo, y_hi]])
    quantizers = [
        {"price": prices[0], "cells": half},
        {"price": prices[1], "cells": quadrants},
        {"price": prices[2], "cells": eight},
    ]
    if with_null:
        null = {"price": 0.0, "cells": [[["-inf", "inf"], ["-inf", "inf"]]]}
        quantizers = [null] + quantizers
    return {"bit_rate": bit_rate, "quantizers": quantizers}


def demo_bank(bit_rate: int = 1, with_null: bool = False,
              prices=(100.0, 200.0, 300.0)) -> QuantizerBank:
    return load_bank(demo_bank_dict(bit_rate, with_null, prices))
