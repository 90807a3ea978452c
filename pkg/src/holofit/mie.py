"""Lorenz-Mie scattering for a homogeneous sphere.

Evaluates the special functions (Riccati-Bessel functions and their
logarithmic derivatives, angular functions pi_n and tau_n), the scattering
coefficients a_n and b_n, the far-field amplitude functions S1(theta) and
S2(theta), and the efficiency factors Q_ext, Q_sca, Q_abs.

The recurrence scheme follows the standard stability split: downward
recurrence for the logarithmic derivative D_n, upward recurrence for
psi_n, xi_n, pi_n, and tau_n.  Series are truncated at the Wiscombe
criterion n_max = floor(x + 4.05 x^(1/3) + 2).

References
----------
Bohren, C. F. and Huffman, D. R., "Absorption and Scattering of Light by
Small Particles" (1983), ch. 4 and appendix A.
Wiscombe, W. J., "Improved Mie scattering algorithms", Appl. Opt. 19,
1505 (1980).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MieCoefficients",
    "AmplitudeMatrix",
    "wiscombe_nmax",
    "log_derivative",
    "riccati_psi_xi",
    "mie_coefficients",
    "mie_ab_batch",
    "pi_tau",
    "amplitude_matrix",
    "s1_s2",
    "cross_sections",
]


def wiscombe_nmax(x) -> np.ndarray | int:
    """Series truncation order floor(x + 4.05 x^(1/3) + 2), at least 3.

    Accepts a scalar or array size parameter; returns int(s) of the same
    shape.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("size parameter must be positive")
    n = np.maximum(np.floor(x + 4.05 * np.cbrt(x) + 2.0), 3).astype(int)
    return int(n) if n.ndim == 0 else n


def log_derivative(z, n_max: int) -> np.ndarray:
    """Logarithmic derivative D_n(z) = psi'_n(z) / psi_n(z) for n = 0..n_max.

    Computed by downward recurrence D_{n-1} = n/z - 1/(D_n + n/z), started
    from D = 0 at order n_max + max(16, ceil(4 |z|^(1/3))), which is high
    enough that the recurrence converges to the true values well before
    reaching n_max.

    Parameters
    ----------
    z : complex scalar or array
        Argument, typically m*x.  Must be nonzero.
    n_max : int
        Highest order returned.

    Returns
    -------
    ndarray, complex, shape z.shape + (n_max + 1,)
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("argument of log_derivative must be nonzero")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    pad = max(16, int(np.ceil(4.0 * np.max(np.abs(z)) ** (1.0 / 3.0))))
    n_start = n_max + pad
    out = np.zeros(z.shape + (n_max + 1,), dtype=complex)
    dn = np.zeros_like(z)
    for n in range(n_start, 0, -1):
        nz = n / z
        dn = nz - 1.0 / (dn + nz)
        if n - 1 <= n_max:
            out[..., n - 1] = dn
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("non-finite value in downward recurrence for D_n")
    return out


def riccati_psi_xi(x, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Riccati-Bessel functions psi_n(x) = x j_n(x) and xi_n(x) = x (j_n + i y_n)(x).

    Both are computed by upward recurrence f_n = ((2n-1)/x) f_{n-1} - f_{n-2},
    seeded with psi_{-1} = cos x, psi_0 = sin x and chi_{-1} = -sin x,
    chi_0 = cos x, where chi_n = -x y_n(x) and xi_n = psi_n - i chi_n.
    With these seeds Re(xi_n) = psi_n and the Wronskian
    psi_n xi'_n - psi'_n xi_n = i.

    Parameters
    ----------
    x : positive real scalar or array
    n_max : int

    Returns
    -------
    (psi, xi) : ndarrays of shape x.shape + (n_max + 1,), psi real, xi complex
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("riccati_psi_xi requires x > 0")
    shape = x.shape + (n_max + 1,)
    psi = np.empty(shape, dtype=float)
    chi = np.empty(shape, dtype=float)
    p_prev, p_cur = np.cos(x), np.sin(x)
    c_prev, c_cur = -np.sin(x), np.cos(x)
    psi[..., 0] = p_cur
    chi[..., 0] = c_cur
    for n in range(1, n_max + 1):
        fac = (2 * n - 1) / x
        p_prev, p_cur = p_cur, fac * p_cur - p_prev
        c_prev, c_cur = c_cur, fac * c_cur - c_prev
        psi[..., n] = p_cur
        chi[..., n] = c_cur
    return psi, psi - 1j * chi


@dataclass(frozen=True)
class MieCoefficients:
    """Scattering coefficients a_n, b_n (n = 1..n_max) for one sphere.

    ``x`` is the size parameter k*radius and ``m`` the particle/medium
    refractive index ratio.
    """

    x: float
    m: complex
    n_max: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not self.x > 0:
            raise ValueError(f"size parameter must be positive, got {self.x}")
        if not self.m.real > 0:
            raise ValueError(f"Re(m) must be positive, got {self.m}")
        if self.m.imag < 0:
            raise ValueError(f"Im(m) must be non-negative, got {self.m}")


def mie_coefficients(x: float, m: complex, n_max: int | None = None) -> MieCoefficients:
    """Scattering coefficients of a homogeneous sphere.

    a_n = [(D_n/m + n/x) psi_n(x) - psi_{n-1}(x)] / [(D_n/m + n/x) xi_n(x) - xi_{n-1}(x)]
    and b_n likewise with D_n*m in place of D_n/m, where D_n is evaluated
    at m*x.  Truncated at the Wiscombe order unless ``n_max`` is given.
    """
    x = float(x)
    m = complex(m)
    if n_max is None:
        n_max = wiscombe_nmax(x)
    d = log_derivative(m * x, n_max)
    psi, xi = riccati_psi_xi(x, n_max)
    n = np.arange(1, n_max + 1)
    fa = d[1:] / m + n / x
    fb = d[1:] * m + n / x
    a = (fa * psi[1:] - psi[:-1]) / (fa * xi[1:] - xi[:-1])
    b = (fb * psi[1:] - psi[:-1]) / (fb * xi[1:] - xi[:-1])
    for name, arr in (("a", a), ("b", b)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise ArithmeticError(
                f"non-finite Mie coefficient {name}_{bad[0] + 1} for x={x}, m={m}"
            )
    return MieCoefficients(x=x, m=m, n_max=n_max, a=a, b=b)


def mie_ab_batch(x: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients for a batch of spheres, zero-padded to a common order.

    Each element is truncated at its own Wiscombe order; entries beyond it
    are zero, so summing a padded series equals the per-sphere truncation.

    Parameters
    ----------
    x : (B,) positive size parameters
    m : (B,) complex relative indices

    Returns
    -------
    (a, b) : complex arrays of shape (B, N) with N = max per-element order
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=complex))
    n_each = wiscombe_nmax(x)
    n_pad = int(np.max(n_each))
    d = log_derivative(m * x, n_pad)
    psi, xi = riccati_psi_xi(x, n_pad)
    n = np.arange(1, n_pad + 1)
    # Orders beyond a small sphere's own truncation can overflow chi_n;
    # they are masked to zero below, so suppress the intermediate warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        fa = d[:, 1:] / m[:, None] + n / x[:, None]
        fb = d[:, 1:] * m[:, None] + n / x[:, None]
        a = (fa * psi[:, 1:] - psi[:, :-1]) / (fa * xi[:, 1:] - xi[:, :-1])
        b = (fb * psi[:, 1:] - psi[:, :-1]) / (fb * xi[:, 1:] - xi[:, :-1])
    keep = n[None, :] <= n_each[:, None]
    a = np.where(keep, a, 0.0)
    b = np.where(keep, b, 0.0)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ArithmeticError("non-finite Mie coefficient in batch")
    return a, b


def pi_tau(theta, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Angular functions pi_n(cos theta) and tau_n(cos theta) for n = 0..n_max.

    Seeds pi_0 = 0, pi_1 = 1; upward recurrences
    pi_n = ((2n-1) mu pi_{n-1} - n pi_{n-2}) / (n-1) and
    tau_n = n mu pi_n - (n+1) pi_{n-1}, with mu = cos theta.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > np.pi):
        raise ValueError("scattering angle must lie in [0, pi]")
    mu = np.cos(theta)
    shape = theta.shape + (n_max + 1,)
    pi_arr = np.zeros(shape)
    tau_arr = np.zeros(shape)
    if n_max >= 1:
        pi_arr[..., 1] = 1.0
        tau_arr[..., 1] = mu
    for n in range(2, n_max + 1):
        pi_arr[..., n] = ((2 * n - 1) * mu * pi_arr[..., n - 1] - n * pi_arr[..., n - 2]) / (
            n - 1
        )
        tau_arr[..., n] = n * mu * pi_arr[..., n] - (n + 1) * pi_arr[..., n - 1]
    return pi_arr, tau_arr


def s1_s2(a: np.ndarray, b: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude functions S1, S2 at scattering-angle cosines mu.

    S1 = sum_n (2n+1)/(n(n+1)) (a_n pi_n + b_n tau_n),
    S2 = sum_n (2n+1)/(n(n+1)) (a_n tau_n + b_n pi_n).

    Accepts either a single coefficient set (a, b of shape (N,), mu of any
    shape) or a batch (a, b of shape (B, N), mu of shape (B, P)); the
    angular recurrence is run once per order with rolling state so memory
    stays O(mu.size).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    mu = np.asarray(mu, dtype=float)
    n_terms = a.shape[-1]
    if a.ndim == 2:
        coeff = lambda arr, n: arr[:, n - 1][:, None]  # noqa: E731
    else:
        coeff = lambda arr, n: arr[n - 1]  # noqa: E731
    p_prev = np.zeros_like(mu)
    p_cur = np.ones_like(mu)
    s1 = np.zeros(mu.shape, dtype=complex)
    s2 = np.zeros(mu.shape, dtype=complex)
    for n in range(1, n_terms + 1):
        tau = n * mu * p_cur - (n + 1) * p_prev
        fac = (2 * n + 1) / (n * (n + 1))
        an = coeff(a, n)
        bn = coeff(b, n)
        s1 += fac * (an * p_cur + bn * tau)
        s2 += fac * (an * tau + bn * p_cur)
        p_prev, p_cur = p_cur, ((2 * n + 1) * mu * p_cur - (n + 1) * p_prev) / n
    return s1, s2


@dataclass(frozen=True)
class AmplitudeMatrix:
    """Far-field amplitude functions S1, S2 at one scattering angle."""

    theta: float
    s1: complex
    s2: complex


def amplitude_matrix(coeffs: MieCoefficients, theta: float) -> AmplitudeMatrix:
    """Evaluate S1(theta), S2(theta) from a coefficient set."""
    theta = float(theta)
    if not 0.0 <= theta <= np.pi:
        raise ValueError(f"scattering angle must lie in [0, pi], got {theta}")
    s1, s2 = s1_s2(coeffs.a, coeffs.b, np.cos(theta))
    return AmplitudeMatrix(theta=theta, s1=complex(s1), s2=complex(s2))


def cross_sections(coeffs: MieCoefficients) -> tuple[float, float, float]:
    """Efficiency factors (Q_ext, Q_sca, Q_abs).

    Q_ext = (2/x^2) sum (2n+1) Re(a_n + b_n),
    Q_sca = (2/x^2) sum (2n+1) (|a_n|^2 + |b_n|^2),
    Q_abs = Q_ext - Q_sca.
    """
    n = np.arange(1, coeffs.n_max + 1)
    w = 2 * n + 1
    x2 = coeffs.x * coeffs.x
    q_ext = (2.0 / x2) * float(np.sum(w * (coeffs.a + coeffs.b).real))
    q_sca = (2.0 / x2) * float(
        np.sum(w * (np.abs(coeffs.a) ** 2 + np.abs(coeffs.b) ** 2))
    )
    return q_ext, q_sca, q_ext - q_sca
