"""Single-valued arguments, square roots and fourth roots on arbitrary cuts.

A branch is named by the angle ``phi`` of its cut: the argument lives in the
half-open window ``(phi, phi + 2*pi]``.  Everything here accepts scalars or
numpy arrays.
"""
from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi

# Relative tolerance for deciding that (phi - theta)/2pi is an integer: a few ulps of
# round-off in computed cut angles, small enough to keep every output inside the window.
INTEGER_TOL = 1e-14


def _scalar_out(x, like):
    if np.ndim(like) == 0 and np.ndim(x) == 0:
        return x.item() if hasattr(x, "item") else x
    return x


def kappa(theta, phi):
    """Integer shift K with ``theta + 2*pi*K`` in ``(phi, phi + 2*pi]``.

    This is ``ceil(t) + [t is an integer]`` with ``t = (phi - theta)/(2*pi)``;
    values of ``t`` within ``INTEGER_TOL * max(1, |t|)`` of an integer are
    treated as that integer so that float cuts behave like exact ones.
    """
    t = (np.asarray(phi, dtype=float) - np.asarray(theta, dtype=float)) / TWO_PI
    m = np.round(t)
    on_cut = np.abs(t - m) <= INTEGER_TOL * np.maximum(1.0, np.abs(t))
    k = np.where(on_cut, m + 1.0, np.ceil(t)).astype(np.int64)
    return _scalar_out(k, t)


def _principal_arg(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("argument of zero undefined")
    return np.arctan2(z.imag, z.real)


def arg_on_branch(z, phi, theta=None):
    """Argument of ``z`` in ``(phi, phi + 2*pi]``.

    ``theta`` may supply any representative of arg z (e.g. ``(2k+1)*pi`` for a
    negative real number); by default the principal value is used.
    """
    if theta is None:
        theta = _principal_arg(z)
    else:
        if np.any(np.asarray(z) == 0):
            raise ValueError("argument of zero undefined")
        theta = np.asarray(theta, dtype=float)
    out = theta + TWO_PI * kappa(theta, phi)
    return _scalar_out(np.asarray(out, dtype=float), out)


def _parity_sign(k):
    return 1 - 2 * (np.asarray(k) & 1)


def sqrt_on_branch(z, phi):
    """``|z|**0.5 * exp(i*arg_phi(z)/2)``; returns 0 at ``z = 0``.

    Evaluated as the principal root times ``(-1)**K`` so that the branch flip
    is exact in floating point.
    """
    z = np.asarray(z, dtype=complex)
    zero = z == 0
    safe = np.where(zero, 1.0, z)
    k = kappa(np.arctan2(safe.imag, safe.real), phi)
    out = np.where(zero, 0.0, np.sqrt(safe) * _parity_sign(k))
    return _scalar_out(out, z)


def fourth_root_on_branch(z, phi):
    """``|z|**0.25 * exp(i*arg_phi(z)/4)``; returns 0 at ``z = 0``."""
    z = np.asarray(z, dtype=complex)
    zero = z == 0
    safe = np.where(zero, 1.0, z)
    k = np.asarray(kappa(np.arctan2(safe.imag, safe.real), phi)) % 4
    # exp(i*pi*k/2) taken from a table: exact for every k
    rot = np.array([1.0, 1.0j, -1.0, -1.0j])[k]
    out = np.where(zero, 0.0, np.sqrt(np.sqrt(safe)) * rot)
    return _scalar_out(out, z)


def power_on_branch(z, num, den, phi):
    """``z**(num/den)`` for ``den`` in {1, 2, 4} on the cut ``phi``.

    Non-negative numerators build the power as ``(z**(1/den))**num``; negative
    ones take the reciprocal of that.
    """
    if den == 1:
        root = np.asarray(z, dtype=complex)
    elif den == 2:
        root = sqrt_on_branch(z, phi)
    elif den == 4:
        root = fourth_root_on_branch(z, phi)
    else:
        raise ValueError(f"unsupported root order {den}")
    out = np.asarray(root, dtype=complex) ** abs(num)
    if num < 0:
        out = 1.0 / out
    return _scalar_out(out, np.asarray(z))


def log_on_branch(z, phi):
    """``log|z| + i*arg_phi(z)``."""
    z = np.asarray(z, dtype=complex)
    out = np.log(np.abs(z)) + 1j * np.asarray(arg_on_branch(z, phi))
    return _scalar_out(out, z)


def branch_relation_sign(z, phi, psi):
    """Sign ``s`` in {+1, -1} with ``sqrt_on_branch(z, phi) = s*sqrt_on_branch(z, psi)``."""
    k = kappa(arg_on_branch(z, psi), phi)
    return _scalar_out(_parity_sign(k), np.asarray(k))
