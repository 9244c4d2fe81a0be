from __future__ import annotations

import numpy as np
import pytest


class ScriptedRng:
    """Stand-in generator whose integer draws follow a fixed script."""

    def __init__(self, draws):
        self._draws = list(draws)

    def integers(self, lo, hi):
        if not self._draws:
            raise AssertionError("scripted rng exhausted")
        value = self._draws.pop(0)
        assert lo <= value < hi, f"scripted draw {value} outside [{lo}, {hi})"
        return value


@pytest.fixture
def scripted_rng():
    return ScriptedRng


def central_difference_grads(loss_fn, params, h: float = 1e-5) -> dict[str, np.ndarray]:
    """Independent finite-difference oracle: perturb every parameter entry of
    a ParamSet and return d(loss)/d(entry) via central differences."""
    grads = {}
    for name, p in params:
        flat = p.value.reshape(-1)
        g = np.empty_like(flat)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = loss_fn()
            flat[k] = orig - h
            down = loss_fn()
            flat[k] = orig
            g[k] = (up - down) / (2 * h)
        grads[name] = g.reshape(p.value.shape)
    return grads


def assert_grads_close(analytic: dict, numeric: dict, rel_tol=1e-4, abs_tol=1e-7):
    for name, num in numeric.items():
        ana = analytic[name]
        diff = np.abs(ana - num)
        denom = np.maximum(np.abs(ana), np.abs(num))
        bad = (diff > abs_tol) & (diff > rel_tol * denom)
        assert not bad.any(), (
            f"{name}: {bad.sum()} gradient entries off; worst "
            f"analytic={ana.reshape(-1)[np.argmax(diff)]:.8g} "
            f"numeric={num.reshape(-1)[np.argmax(diff)]:.8g}")
