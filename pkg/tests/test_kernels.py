"""Both kernel backends must agree; the env flag picks the active one."""

import numpy as np
import pytest

from retrace import _kernels

numba_available = True
try:
    import numba  # noqa: F401
except ImportError:  # pragma: no cover
    numba_available = False

needs_numba = pytest.mark.skipif(not numba_available, reason="numba missing")


@pytest.fixture(scope="module")
def impls():
    return {
        "numpy": _kernels.build_impls(False),
        "numba": _kernels.build_impls(True) if numba_available else None,
    }


class TestEnvFlag:
    def test_default_enabled(self, monkeypatch):
        monkeypatch.delenv("RETRACE_NUMBA", raising=False)
        assert _kernels.numba_requested()

    @pytest.mark.parametrize("value", ["0", "false", "off", "no", " OFF "])
    def test_disabling_values(self, monkeypatch, value):
        monkeypatch.setenv("RETRACE_NUMBA", value)
        assert not _kernels.numba_requested()

    def test_enabling_values(self, monkeypatch):
        monkeypatch.setenv("RETRACE_NUMBA", "1")
        assert _kernels.numba_requested()

    def test_backend_is_known(self):
        assert _kernels.BACKEND in ("numba", "numpy")

    def test_all_kernels_present(self, impls):
        assert set(impls["numpy"]) == set(_kernels.KERNEL_NAMES)


@needs_numba
class TestBackendParity:
    def test_pairwise_sq_dists(self, impls):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 2))
        z = rng.normal(size=(25, 2))
        a = impls["numpy"]["pairwise_sq_dists"](x, z)
        b = impls["numba"]["pairwise_sq_dists"](x, z)
        assert np.allclose(a, b, atol=1e-12, rtol=0)

    def test_rbf_kernel(self, impls):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(30, 2))
        a = impls["numpy"]["rbf_kernel"](x, x, 0.5)
        b = impls["numba"]["rbf_kernel"](x, x, 0.5)
        assert np.allclose(a, b, atol=1e-14, rtol=0)

    def test_gmm_log_pdf(self, impls):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(50, 2))
        means = rng.normal(size=(4, 2))
        variances = rng.uniform(0.1, 2.0, size=(4, 2))
        a = impls["numpy"]["gmm_log_pdf"](x, means, variances)
        b = impls["numba"]["gmm_log_pdf"](x, means, variances)
        assert np.allclose(a, b, atol=1e-10, rtol=0)

    def test_smo_same_kernel_matrix(self, impls):
        rng = np.random.default_rng(3)
        pts = np.vstack([
            rng.normal(loc=(0, 0), size=(20, 2)),
            rng.normal(loc=(3, 3), size=(20, 2)),
        ])
        y = np.array([1.0] * 20 + [-1.0] * 20)
        kmat = impls["numpy"]["rbf_kernel"](pts, pts, 0.5)
        a_np, b_np, _, s_np = impls["numpy"]["smo_solve"](
            kmat, y, 1.0, 1e-3, 1e-12, 2000
        )
        a_nb, b_nb, _, s_nb = impls["numba"]["smo_solve"](
            np.ascontiguousarray(kmat), y, 1.0, 1e-3, 1e-12, 2000
        )
        assert s_np == s_nb == 0
        # same inputs, same deterministic pair ordering: solutions agree
        assert np.allclose(a_np, a_nb, atol=1e-8, rtol=0)
        assert b_np == pytest.approx(b_nb, abs=1e-8)

    def test_smo_end_to_end_objective_parity(self, impls):
        rng = np.random.default_rng(4)
        pts = rng.uniform(-2, 2, size=(30, 2))
        y = np.where(pts[:, 0] + pts[:, 1] > 0, 1.0, -1.0)
        if len(set(y)) < 2:
            pytest.skip("degenerate draw")
        duals = {}
        for name in ("numpy", "numba"):
            kmat = impls[name]["rbf_kernel"](pts, pts, 0.7)
            alpha, b, _, status = impls[name]["smo_solve"](
                np.ascontiguousarray(kmat), y, 1.0, 1e-4, 1e-12, 4000
            )
            assert status == 0
            q = (y[:, None] * y[None, :]) * kmat
            duals[name] = float(alpha.sum() - 0.5 * alpha @ q @ alpha)
        assert duals["numpy"] == pytest.approx(duals["numba"], abs=1e-6)


class TestWrappers:
    def test_wrappers_accept_lists(self):
        d = _kernels.pairwise_sq_dists([[0.0, 0.0]], [[3.0, 4.0]])
        assert d[0, 0] == pytest.approx(25.0)
        k = _kernels.rbf_kernel([[0.0, 0.0]], [[1.0, 0.0]], 1.0)
        assert k[0, 0] == pytest.approx(np.exp(-1.0))
