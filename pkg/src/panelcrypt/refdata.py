"""Bundled benchmark values: the default token universe with its
decentralization components, and published benchmark coefficient tables
used for reference figure overlays and synthetic calibration."""

from __future__ import annotations

import numpy as np

from .panel import EntityMeta

# symbol, category, hyfi, listing date, (network, wealth, node, code, information)
BENCHMARK_UNIVERSE = [
    ("BTC", "Traditional", True, "2020-01-01", (0.7187, 0.4675, 0.3844, 0.8909, 0.2849)),
    ("ETH", "Traditional", True, "2020-01-01", (0.8610, 0.8148, 0.4919, 0.9114, 0.4572)),
    ("SOL", "Traditional", False, "2020-04-11", (0.8888, 0.3965, 0.4287, 0.9201, 0.5930)),
    ("XRP", "Traditional", True, "2020-01-01", (0.9125, 0.6385, 0.3188, 0.9265, 0.5392)),
    ("ADA", "Traditional", False, "2020-01-01", (0.6343, 0.4351, 0.4491, 0.8791, 0.7028)),
    ("BNB", "CEX", True, "2020-01-01", (0.8525, 0.8700, 0.4521, 0.9005, 0.3863)),
    ("CRO", "CEX", False, "2020-01-01", (0.7697, 0.9464, 0.4022, 0.8521, 0.6814)),
    ("OKB", "CEX", False, "2020-01-01", (0.7928, 0.8799, 0.4015, 0.6205, 0.7695)),
    ("XLM", "DEX", False, "2020-01-01", (0.9212, 0.9105, 0.3354, 0.9107, 0.7772)),
    ("UNI", "DeFi, DEX", False, "2020-09-18", (0.1359, 0.6930, 0.4919, 0.7988, 0.7044)),
    ("RUNE", "DeFi, DEX", False, "2020-01-01", (0.6702, 0.4386, 0.3178, 0.7948, 0.7226)),
    ("RAY", "DeFi, DEX", False, "2021-02-22", (0.1446, 0.9134, 0.4287, 0.7910, 0.7536)),
    ("GNO", "DeFi, DEX", False, "2020-01-01", (0.9175, 0.9550, 0.3834, 0.6244, 0.7720)),
    ("SNX", "DeFi, DEX", False, "2020-01-01", (0.8966, 0.8248, 0.5357, 0.7753, 0.7786)),
    ("AVAX", "DeFi", False, "2020-09-23", (0.7589, 0.5465, 0.2943, 0.9208, 0.6910)),
    ("LINK", "DeFi", False, "2020-01-01", (0.9064, 0.6123, 0.3351, 0.8340, 0.6862)),
    ("FTM", "DeFi", False, "2020-01-01", (0.9229, 0.8481, 0.3659, 0.7716, 0.7956)),
    ("DOT", "DeFi", False, "2020-08-21", (0.3229, 0.3810, 0.4330, 0.7998, 0.6835)),
]

PANEL_END = "2024-11-24"


def benchmark_metas():
    return [
        EntityMeta(
            symbol=symbol,
            category=category,
            hyfi=hyfi,
            listing_date=np.datetime64(listing, "D"),
            gini_components=components,
        )
        for symbol, category, hyfi, listing, components in BENCHMARK_UNIVERSE
    ]


# Benchmark panel estimates (estimate, standard error) used to calibrate the
# synthetic generator and to emit reference figure data.
BENCHMARK_STATIC_FIXED = {
    "intercept": (0.0491, 0.0012),
    "decentralization": (0.0749, 0.0084),
    "attractiveness": (0.0004, 0.0000),
    "size": (-0.1139, 0.0194),
    "illiquidity": (0.0349, 0.0009),
    "market_volatility": (0.4797, 0.0512),
    "market_shocks": (-0.0003, 0.0001),
    "hyfi_x_market_volatility": (-0.3422, 0.0261),
}

BENCHMARK_STATIC_RANDOM = {
    "intercept": (0.0512, 0.0034),
    "decentralization": (0.0740, 0.0125),
    "attractiveness": (0.0004, 0.0000),
    "size": (-0.1136, 0.0141),
    "illiquidity": (0.0347, 0.0016),
    "market_volatility": (0.4239, 0.0355),
    "market_shocks": (-0.0003, 0.0003),
    "hyfi": (-0.0091, 0.0044),
}

BENCHMARK_DYNAMIC_FIXED = {
    "intercept": (0.0350, 0.0014),
    "decentralization": (0.0308, 0.0065),
    "attractiveness": (0.0019, 0.0002),
    "size": (-0.1263, 0.0205),
    "illiquidity": (0.0319, 0.0009),
    "market_volatility": (0.3728, 0.0556),
    "market_shocks": (0.0001, 0.0000),
    "hyfi_x_market_volatility": (-0.2778, 0.0285),
    "price_risk_lag": (0.2918, 0.0148),
}

# HyFi coefficient path across quantile levels: tau -> (estimate, se)
BENCHMARK_QUANTILE_HYFI = {
    0.10: (-0.0074, 0.0004),
    0.25: (-0.0092, 0.0003),
    0.50: (-0.0118, 0.0003),
    0.75: (-0.0141, 0.0005),
    0.90: (-0.0167, 0.0009),
}

# Interaction coefficient before/after the 2022-05-07 structural break
BENCHMARK_SPLIT_INTERACTION = {
    "pre": (-0.3191, 0.0449),
    "post": (-0.2869, 0.0220),
}
