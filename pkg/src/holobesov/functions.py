"""Named boundary test functions used by the experiments and the CLI.

Each factory returns a callable on (..., n) complex arrays.  Singular powers
use the principal branch, so (1 - z_1)^alpha is holomorphic on the open ball
and continuous up to the boundary.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def one(z):
    z = np.asarray(z)
    return np.ones(z.shape[:-1], dtype=complex)


def z1z2(z):
    z = np.asarray(z)
    return z[..., 0] * z[..., 1]


def exp_z1(z):
    return np.exp(np.asarray(z)[..., 0])


def conj_z1(z):
    return np.conj(np.asarray(z)[..., 0])


def pow_singular(alpha: float):
    def f(z):
        return (1.0 - np.asarray(z, dtype=complex)[..., 0]) ** alpha
    f.alpha = alpha
    return f


def monomial(exponents):
    exponents = tuple(int(e) for e in exponents)

    def f(z):
        z = np.asarray(z, dtype=complex)
        return np.prod(z[..., :len(exponents)] ** np.array(exponents), axis=-1)
    return f


BUILTINS = {
    "one": (lambda: one, 1),
    "z1z2": (lambda: z1z2, 2),
    "exp_z1": (lambda: exp_z1, 1),
    "conj_z1": (lambda: conj_z1, 1),
    "pow_singular": (pow_singular, 1),
    "monomial": (monomial, 1),
}

# the suite on which rates and moduli are compared
SUITE = (
    ("one", {}),
    ("z1z2", {}),
    ("exp_z1", {}),
    ("pow_singular", {"alpha": 0.5}),
    ("pow_singular", {"alpha": 0.75}),
    ("pow_singular", {"alpha": 1.5}),
)


def make(name: str, n: int, **params):
    """Instantiate a builtin function for dimension n."""
    if name not in BUILTINS:
        raise ConfigError(f"unknown function {name!r}; choose from {sorted(BUILTINS)}")
    factory, min_n = BUILTINS[name]
    if n < min_n:
        raise ConfigError(f"{name} needs n >= {min_n}")
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {params}") from exc


def label(name: str, **params) -> str:
    if not params:
        return name
    inner = ",".join(f"{k}={v}" for k, v in sorted(params.items()))
    return f"{name}({inner})"
