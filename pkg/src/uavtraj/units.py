"""dB/dBm bookkeeping.

Configuration values are quoted in dB or dBm; all arithmetic happens in
linear units. These are the only conversion routines in the package.
"""

import numpy as np


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_milliwatts(dbm):
    return 10.0 ** (dbm / 10.0)
