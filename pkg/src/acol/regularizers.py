"""Activity regularization terms and their analytic gradients.

All terms act on a nonnegative activity matrix ``B`` (one row per example,
one column per output node), through its column co-activation matrix
``N = B^T B``:

* ``affinity``   -- normalized off-diagonal mass of ``N``; 0 when columns
  have disjoint supports, 1 when all columns are identical and nonzero.
* ``balance``    -- normalized off-diagonal mass of ``V = v^T v`` where
  ``v = diag(N)``; 1 when all columns are equally active.
* ``frobenius_sq`` -- plain squared Frobenius norm, which keeps the two
  ratio denominators from collapsing toward zero.

The combined loss is ``c_alpha * affinity + c_beta * (1 - balance)
+ c_f * frobenius_sq``. Gradients are hand-derived (quotient rule on both
ratios); the test suite pins them against central finite differences.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GarCoefficients:
    """Weights of the three regularization terms."""

    c_alpha: float = 0.1
    c_beta: float = 0.1
    c_f: float = 0.0003

    def __post_init__(self):
        for name in ("c_alpha", "c_beta", "c_f"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class GarTerms:
    """One evaluation of all terms on a single activity matrix."""

    affinity: float
    balance: float
    frobenius_sq: float
    loss: float
    degenerate: bool


def check_activities(b) -> np.ndarray:
    """Validate an activity matrix: 2-D, nonnegative, at least 2 columns."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError(f"activity matrix must be 2-D, got shape {b.shape}")
    m, n = b.shape
    if m < 1 or n < 2:
        raise ValueError(f"activity matrix needs m >= 1 rows and n >= 2 columns, got {b.shape}")
    if b.size and b.min() < 0:
        raise ValueError("activity matrix has negative entries; it must be the image of relu")
    return b


def coactivation(b) -> np.ndarray:
    """Column co-activation matrix B^T B (n x n, symmetric PSD)."""
    b = check_activities(b)
    return b.T @ b


def adjacency(b) -> np.ndarray:
    """Example-similarity matrix B B^T.

    m x m grows quadratically with the batch; intended for export on
    small subsets, not for training-time use.
    """
    b = check_activities(b)
    return b @ b.T


def frobenius_sq(b) -> float:
    """Sum of squared entries of B; inf when the true value exceeds float64."""
    b = check_activities(b)
    with np.errstate(over="ignore"):
        return float(np.sum(b * b))


def is_degenerate(b) -> bool:
    """True when B is entirely zero (trace of B^T B vanishes)."""
    return not np.any(np.asarray(b))


def affinity(b) -> float:
    """Off-diagonal mass of N = B^T B over (n-1) times its trace.

    Returns 0.0 for an all-zero B (degenerate case) instead of dividing
    by zero. The ratio is scale invariant, so B is normalized by its
    largest entry first; extreme activity scales cannot overflow.
    """
    b = check_activities(b)
    n = b.shape[1]
    peak = float(b.max())
    if peak == 0.0:
        return 0.0
    scaled = b / peak
    coact = scaled.T @ scaled
    diag = float(np.trace(coact))
    off = float(coact.sum()) - diag
    return off / ((n - 1) * diag)


def balance(b) -> float:
    """Off-diagonal mass of v^T v over (n-1) times its diagonal, v = diag(B^T B).

    Returns 0.0 for an all-zero B (degenerate case). Scale invariant, so
    computed on B normalized by its largest entry (overflow safe).
    """
    b = check_activities(b)
    n = b.shape[1]
    peak = float(b.max())
    if peak == 0.0:
        return 0.0
    scaled = b / peak
    v = np.sum(scaled * scaled, axis=0)
    diag = float(np.sum(v * v))
    total = float(v.sum())
    off = total * total - diag
    return off / ((n - 1) * diag)


def gar_terms(b, coeffs: GarCoefficients) -> GarTerms:
    """Evaluate all three terms and the combined loss in one pass."""
    b = check_activities(b)
    alpha = affinity(b)
    beta = balance(b)
    fro = frobenius_sq(b)
    loss = coeffs.c_alpha * alpha + coeffs.c_beta * (1.0 - beta)
    if coeffs.c_f != 0.0:  # avoid 0 * inf when the Frobenius term overflows
        loss += coeffs.c_f * fro
    return GarTerms(
        affinity=alpha,
        balance=beta,
        frobenius_sq=fro,
        loss=float(loss),
        degenerate=is_degenerate(b),
    )


def gar_loss(b, coeffs: GarCoefficients) -> float:
    """Combined loss c_alpha*affinity + c_beta*(1-balance) + c_f*frobenius_sq."""
    return gar_terms(b, coeffs).loss


def gar_grad(b, coeffs: GarCoefficients) -> np.ndarray:
    """Analytic gradient of ``gar_loss`` with respect to every entry of B.

    Uses d/dB [sum_{i!=j} N_ij] = 2 B (11^T - I), d/dB [trace N] = 2B, the
    chain rule through v_j = sum_i B_ij^2 for the balance ratio, and the
    quotient rule for both ratios. Returns zeros for a degenerate
    (all-zero) B.
    """
    b = check_activities(b)
    if is_degenerate(b):
        return np.zeros_like(b)
    n = b.shape[1]

    # affinity = s_off / ((n-1) * s_diag), s_diag = trace(B^T B) = ||B||_F^2.
    # The ratio is scale invariant: evaluate on B / max(B) and divide the
    # gradient by the same factor (chain rule), keeping the squared sums
    # representable for any activity scale.
    peak = float(b.max())
    sb = b / peak
    s_diag = float(np.sum(sb * sb))
    coact = sb.T @ sb
    s_off = float(coact.sum()) - float(np.trace(coact))
    d_off = 2.0 * (sb.sum(axis=1, keepdims=True) - sb)  # 2 B (11^T - I)
    d_diag = 2.0 * sb
    d_affinity = (d_off * s_diag - s_off * d_diag) / ((n - 1) * s_diag * s_diag * peak)

    # balance = t_off / ((n-1) * t_diag) through v = diag(B^T B), evaluated
    # on the same scaled matrix; the 1/peak chain factor cancels against the
    # relative v scaling except for one net 1/peak on the final gradient
    v = np.sum(sb * sb, axis=0)
    v_total = float(v.sum())
    t_diag = float(np.sum(v * v))
    t_off = v_total * v_total - t_diag
    dbeta_dv = ((2.0 * v_total - 2.0 * v) * t_diag - t_off * 2.0 * v) / ((n - 1) * t_diag * t_diag)
    d_balance = dbeta_dv[None, :] * (2.0 * sb) / peak

    return coeffs.c_alpha * d_affinity - coeffs.c_beta * d_balance + 2.0 * coeffs.c_f * b
