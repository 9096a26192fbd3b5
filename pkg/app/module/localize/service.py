"""
Online phase: a single RSS vector in dBm to a reference point through hard gating.
"""

import numpy as np

from app.core.errors import DataError, ShapeError
from app.core.logger import logger
from app.module.fingerprints.schemas import MAX_DBM, SENTINEL_DBM
from app.module.localize.schemas import LocalizeResponse
from app.module.moe_model.model import MoEModel


def localize(model: MoEModel, rss_dbm) -> LocalizeResponse:
    rss = np.asarray(rss_dbm, dtype=np.float64)
    if rss.ndim != 1 or rss.size != model.config.input_dim:
        raise ShapeError(f"Expected {model.config.input_dim} RSS values, got shape {rss.shape}")
    if not np.all(np.isfinite(rss)) or rss.min() < SENTINEL_DBM or rss.max() > MAX_DBM:
        raise DataError(f"RSS values must be finite and lie in [{SENTINEL_DBM:g}, {MAX_DBM:g}] dBm")

    prediction = model.predict_location((rss - SENTINEL_DBM) / (MAX_DBM - SENTINEL_DBM))
    logger.debug(f"Localized to RP {prediction.rp_id} (region {prediction.region_id}, p_gate={prediction.gate_probability:.3f})")
    return LocalizeResponse(**prediction.model_dump())
