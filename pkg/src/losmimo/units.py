"""dBm / watt conversions, centralized so no module rolls its own."""

import numpy as np


def dbm_to_watt(p_dbm):
    """10^(dBm/10) mW expressed in watts."""
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0) * 1e-3


def watt_to_dbm(p_w):
    """P_dBm = 10 log10(P_W * 1000)."""
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) * 1e3)
