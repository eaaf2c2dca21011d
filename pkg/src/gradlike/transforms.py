"""Named scalar functions used by the Lyapunov constructions.

``MonotoneTransform`` is the increasing map s applied to x/pi(x);
``ConvexFunction`` is the S in the entropy functional sum_i pi_i S(x_i/pi_i).
Only named families are supported so that scenario files stay portable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownKind

TRANSFORM_IDS = ("log", "neg-reciprocal", "neg-power", "identity")
CONVEX_IDS = ("tlogt", "chi2", "neglog")


@dataclass(frozen=True)
class MonotoneTransform:
    id: str
    beta: float = 1.0

    def __post_init__(self):
        if self.id not in TRANSFORM_IDS:
            raise UnknownKind(self.id, "monotone transform")
        if self.id == "neg-power" and not self.beta > 0:
            raise ValueError("neg-power transform needs beta > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.id == "log":
            return np.log(t)
        if self.id == "neg-reciprocal":
            return -1.0 / t
        if self.id == "neg-power":
            return -(t ** (-1.0 / self.beta))
        return t.copy()

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.id == "log":
            return 1.0 / t
        if self.id == "neg-reciprocal":
            return 1.0 / t**2
        if self.id == "neg-power":
            return (1.0 / self.beta) * t ** (-1.0 / self.beta - 1.0)
        return np.ones_like(t)

    @property
    def needs_positive(self) -> bool:
        return self.id != "identity"

    def to_dict(self) -> dict:
        d = {"id": self.id}
        if self.id == "neg-power":
            d["beta"] = self.beta
        return d


def transform(id: str, beta: float = 1.0) -> MonotoneTransform:
    return MonotoneTransform(id, beta)


@dataclass(frozen=True)
class ConvexFunction:
    id: str

    def __post_init__(self):
        if self.id not in CONVEX_IDS:
            raise UnknownKind(self.id, "convex function")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.id == "tlogt":
            safe = np.where(t > 0, t, 1.0)
            return np.where(t > 0, t * np.log(safe), 0.0)
        if self.id == "chi2":
            return (t - 1.0) ** 2
        return -np.log(t)

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.id == "tlogt":
            return 1.0 / t
        if self.id == "chi2":
            return np.full_like(t, 2.0)
        return 1.0 / t**2

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.id == "tlogt":
            return np.log(t) + 1.0
        if self.id == "chi2":
            return 2.0 * (t - 1.0)
        return -1.0 / t

    @property
    def needs_positive(self) -> bool:
        return self.id == "neglog"
