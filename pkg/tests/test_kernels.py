"""Backend parity: compiled kernels must match the numpy fallback."""

import numpy as np
import pytest

from gazepool import _pykernels, kernels


@pytest.fixture(scope="module")
def compiled():
    try:
        from gazepool import _ckernels
    except ImportError:
        pytest.skip("compiled kernels not built")
    return _ckernels


def test_active_backend_reported():
    assert kernels.backend_name() in ("cython", "python")


class TestParity:
    def test_accumulate_density(self, compiled, rng):
        for use_max in (False, True):
            for _ in range(25):
                n = int(rng.integers(1, 8))
                h, w = int(rng.integers(3, 20)), int(rng.integers(3, 20))
                u = rng.uniform(0, w, size=n)
                v = rng.uniform(0, h, size=n)
                sigma = float(rng.uniform(0.5, 2.5))
                radius = sigma * float(rng.uniform(1.0, 4.0))
                a = compiled.accumulate_density(u, v, h, w, sigma, radius, use_max)
                b = _pykernels.accumulate_density(u, v, h, w, sigma, radius, use_max)
                np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)

    def test_weighted_pool(self, compiled, rng):
        for _ in range(25):
            c = int(rng.integers(1, 32))
            h, w = int(rng.integers(2, 16)), int(rng.integers(2, 16))
            feat = rng.random((c, h, w), dtype=np.float32) * 10
            dens = rng.random((h, w), dtype=np.float32) * 5
            a = compiled.weighted_pool(feat, dens)
            b = _pykernels.weighted_pool(feat, dens)
            np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_fixation_outside_grid_window(self, compiled):
        # a fixation whose truncation window misses the grid contributes 0
        u, v = np.array([50.0]), np.array([50.0])
        a = compiled.accumulate_density(u, v, 10, 10, 1.0, 3.0, False)
        b = _pykernels.accumulate_density(u, v, 10, 10, 1.0, 3.0, False)
        assert (a == 0).all() and (b == 0).all()


def test_pure_env_override(tmp_path):
    import subprocess
    import sys

    code = (
        "import gazepool.kernels as k; print(k.backend_name())"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "GAZEPOOL_PURE": "1"},
        check=True,
    )
    assert out.stdout.strip() == "python"
