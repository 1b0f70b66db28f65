"""Modified Bessel function of the second kind, ``K_nu(x)``, for real order.

Temme's method: the order is split as ``nu = n + mu`` with ``|mu| <= 1/2``;
``K_mu`` and ``K_{mu+1}`` come from Temme's power series for ``x <= 2`` and
from Steed's continued fraction otherwise, then forward recurrence in the
order (stable for ``K``) reaches ``nu``. Vectorised over ``x``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

# Taylor coefficients of 1/Gamma(1+z) about z=0.
_RGAMMA1P = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
)

_EPS = 1e-16
_XSWITCH = 2.0
_MAXIT = 10000


def _temme_gammas(mu: float):
    """``gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)`` for ``|mu| <= 1/2``.

    ``gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)`` and
    ``gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2``, both evaluated from the
    Taylor series so no cancellation occurs as ``mu -> 0``.
    """
    gam1 = 0.0
    gam2 = 0.0
    mu2 = mu * mu
    p_even = 1.0
    for k in range(0, len(_RGAMMA1P), 2):
        gam2 += _RGAMMA1P[k] * p_even
        if k + 1 < len(_RGAMMA1P):
            gam1 -= _RGAMMA1P[k + 1] * p_even
        p_even *= mu2
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _k_series(mu: float, x: np.ndarray):
    """``K_mu(x)`` and ``K_{mu+1}(x)`` by Temme's series (small ``x``)."""
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    mu2 = mu * mu
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    fact2 = np.where(np.abs(e) < _EPS, 1.0, np.sinh(e) / np.where(e == 0.0, 1.0, e))
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu2)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total = np.where(active, total + delta, total)
        total1 = np.where(active, total1 + c * (p - i * ff), total1)
        active &= np.abs(delta) >= np.abs(total) * _EPS
        if not active.any():
            break
    else:  # pragma: no cover
        raise ArithmeticError("Temme series failed to converge")
    return total, total1 * 2.0 / x


def _k_contfrac(mu: float, x: np.ndarray):
    """``K_mu(x)`` and ``K_{mu+1}(x)`` by Steed's continued fraction (large ``x``)."""
    mu2 = mu * mu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu2
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    active = np.ones(x.shape, dtype=bool)
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = np.where(active, h + delh, h)
        dels = q * delh
        s = np.where(active, s + dels, s)
        active &= np.abs(dels / s) >= _EPS
        if not active.any():
            break
    else:  # pragma: no cover
        raise ArithmeticError("Steed continued fraction failed to converge")
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def bessel_k(nu, x):
    """Modified Bessel function of the second kind ``K_nu(x)``.

    Parameters
    ----------
    nu : float
        Real order; ``K_{-nu} = K_nu``.
    x : float or array_like
        Positive argument(s).

    Returns
    -------
    float or ndarray
        Same shape as ``x``.

    Notes
    -----
    Relative accuracy is better than ``1e-10`` for ``0 <= nu <= 2`` and
    ``1e-6 <= x <= 30`` (checked against an arbitrary-precision table).
    """
    nu = abs(float(nu))
    xa = np.asarray(x, dtype=np.float64)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if np.any(~(xa > 0.0)):
        raise DomainError("bessel_k requires x > 0")
    nl = int(nu + 0.5)
    mu = nu - nl
    out_mu = np.empty_like(xa)
    out_1 = np.empty_like(xa)
    small = xa < _XSWITCH
    if small.any():
        out_mu[small], out_1[small] = _k_series(mu, xa[small])
    if (~small).any():
        out_mu[~small], out_1[~small] = _k_contfrac(mu, xa[~small])
    kmu, k1 = out_mu, out_1
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / xa) * k1 + kmu
    return float(kmu[0]) if scalar else kmu
