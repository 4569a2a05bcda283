"""Zero-forcing downlink precoder and per-user link budget.

The precoder is the scaled right pseudoinverse of the active-user channel
matrix; the scale enforces the total-power constraint trace(W W^H) = K. The
Gram system is solved by Cholesky factorization (Hermitian positive definite
for full-rank channels) with one iterative-refinement pass.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

COND_LIMIT = 1e12


class DegenerateGeometryError(RuntimeError):
    """Channel rows are (numerically) dependent; caller should redraw or defer."""


@dataclass
class LinkBudget:
    channel_matrix: np.ndarray
    precoder: np.ndarray
    power_scale: float
    snr: np.ndarray
    rates: np.ndarray
    hover_time_s: float


def zf_precoder(channel_matrix):
    """Precoder W and power scale xi with H @ W = xi * I."""
    h = np.asarray(channel_matrix, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError("channel matrix must be 2-D")
    k, n_t = h.shape
    if k > n_t:
        raise DegenerateGeometryError(f"{k} users exceed {n_t} antennas")
    gram = h @ h.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateGeometryError(f"Gram condition number {cond:.3e}")
    try:
        factor = cho_factor(gram)
    except LinAlgError as exc:
        raise DegenerateGeometryError(str(exc)) from exc
    y = cho_solve(factor, h)
    y += cho_solve(factor, h - gram @ y)
    pinv = y.conj().T
    xi = float(np.sqrt(k / np.sum(np.abs(pinv) ** 2)))
    return xi * pinv, xi


def per_user_snr(channel_matrix, precoder, p_linear, sigma2_linear):
    """Receive SNR per active user: P |h_k . w_k|^2 / sigma^2."""
    coupling = np.einsum("ij,ji->i", channel_matrix, precoder)
    return p_linear * np.abs(coupling) ** 2 / sigma2_linear


def rates_and_hover(snr, bandwidth_hz, file_size_bits, hover_cap_s=1e3):
    """Per-user rates and the hover time set by the slowest transfer.

    A vanishing SNR would give an infinite hover; the result is capped so
    episodes stay finite.
    """
    snr = np.asarray(snr, dtype=np.float64)
    rates = bandwidth_hz * np.log2(1.0 + snr)
    sizes = np.broadcast_to(np.asarray(file_size_bits, dtype=np.float64), rates.shape)
    with np.errstate(divide="ignore"):
        durations = np.where(rates > 0.0, sizes / rates, np.inf)
    return rates, float(min(np.max(durations), hover_cap_s))
