import numpy as np
import pytest

from qtt import kernels

numba_impl = kernels.numba_impl()


def random_inputs(seed, n=40, k=16):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, k))
    p = rng.normal(size=(n, n))
    return z, 0.5 * (p + p.T)


class TestNumpyBackend:
    def test_gram_diagonal_and_symmetry(self):
        z, _ = random_inputs(0)
        gram, dist = kernels.NUMPY_IMPL["matern_gram"](z, 2.0, 0.3)
        assert np.allclose(np.diag(gram), 0.3)
        assert np.allclose(gram, gram.T)
        assert np.all(np.diag(dist) == 0.0)
        assert np.all(gram > 0)

    def test_gram_psd_with_noise(self):
        z, _ = random_inputs(1)
        gram, _ = kernels.NUMPY_IMPL["matern_gram"](z, 1.5, 0.2)
        np.linalg.cholesky(gram + 1e-6 * np.eye(len(z)))

    def test_cross_consistent_with_gram(self):
        z, _ = random_inputs(2)
        gram, _ = kernels.NUMPY_IMPL["matern_gram"](z, 2.0, 0.1)
        cross = kernels.NUMPY_IMPL["matern_cross"](z, z, 2.0, 0.1)
        assert np.allclose(gram, cross, atol=1e-12)

    def test_backward_matches_finite_differences(self):
        # d/dtheta of sum(P * K(theta)) for the two log-hyperparameters
        z, p = random_inputs(3, n=12)
        ls, sv = 1.7, 0.25
        _, dist = kernels.NUMPY_IMPL["matern_gram"](z, ls, sv)
        _, g_logls, g_logsv = kernels.NUMPY_IMPL["matern_backward"](p, z, dist, ls, sv)
        h = 1e-6

        def total(ls_, sv_):
            gram, _ = kernels.NUMPY_IMPL["matern_gram"](z, ls_, sv_)
            return float((p * gram).sum())

        fd_ls = (total(ls * np.exp(h), sv) - total(ls * np.exp(-h), sv)) / (2 * h)
        fd_sv = (total(ls, sv * np.exp(h)) - total(ls, sv * np.exp(-h))) / (2 * h)
        assert g_logls == pytest.approx(fd_ls, rel=1e-5)
        assert g_logsv == pytest.approx(fd_sv, rel=1e-5)

    def test_dz_matches_finite_differences(self):
        z, p = random_inputs(4, n=8, k=3)
        ls, sv = 1.3, 0.4
        _, dist = kernels.NUMPY_IMPL["matern_gram"](z, ls, sv)
        dz, _, _ = kernels.NUMPY_IMPL["matern_backward"](p, z, dist, ls, sv)
        h = 1e-6

        def total(zz):
            gram, _ = kernels.NUMPY_IMPL["matern_gram"](zz, ls, sv)
            return float((p * gram).sum())

        for i in (0, 3):
            for t in range(3):
                zp, zm = z.copy(), z.copy()
                zp[i, t] += h
                zm[i, t] -= h
                fd = (total(zp) - total(zm)) / (2 * h)
                assert dz[i, t] == pytest.approx(fd, rel=1e-4, abs=1e-8)


@pytest.mark.skipif(numba_impl is None, reason="numba unavailable")
class TestBackendParity:
    @pytest.mark.parametrize("name", ["matern_gram", "matern_cross", "matern_backward"])
    def test_numba_matches_numpy(self, name):
        z, p = random_inputs(7)
        ls, sv = 2.1, 0.15
        if name == "matern_gram":
            args = (z, ls, sv)
        elif name == "matern_cross":
            args = (z, z[:17], ls, sv)
        else:
            _, dist = kernels.NUMPY_IMPL["matern_gram"](z, ls, sv)
            args = (p, z, dist, ls, sv)
        out_np = kernels.NUMPY_IMPL[name](*args)
        out_nb = numba_impl[name](*args)
        out_np = out_np if isinstance(out_np, tuple) else (out_np,)
        out_nb = out_nb if isinstance(out_nb, tuple) else (out_nb,)
        for a, b in zip(out_np, out_nb):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_env_flag_selects_backend():
    import importlib
    import os
    import subprocess
    import sys

    code = "import qtt.kernels as k; print(k.ACTIVE_BACKEND)"
    env = dict(os.environ, QTT_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
