import importlib.util
import os
import subprocess
import sys

import numpy as np
import pytest

from haircut import CORP_A_5_10Y, SPX_6P
from haircut import kernels
from haircut.transform import TransformKind, choose_abscissa

needs_numba = pytest.mark.skipif(kernels.series_numba is None, reason="numba back end unavailable")


@needs_numba
@pytest.mark.parametrize("kind", list(TransformKind))
@pytest.mark.parametrize("params", [SPX_6P, CORP_A_5_10Y])
def test_numba_and_numpy_agree(kind, params):
    model = params.to_model()
    t = 10 / 252
    x = np.linspace(-0.3, 0.3, 41)
    sig, _ = choose_abscissa(kind, model, t, x, 1.0)
    ns = np.full(x.size, 256, dtype=np.int64)
    ns[::3] = 64
    args = (kind.value, x, sig, 1.0, ns, t, *model.kernel_arrays())
    a = kernels.series_numpy(*args)
    b = kernels.series_numba(*args)
    assert np.max(np.abs(a - b)) < 1e-12


def test_numpy_blocks_give_identical_sums(monkeypatch):
    model = SPX_6P.to_model()
    x = np.linspace(-0.2, 0.2, 50)
    args = (0, x, np.zeros_like(x), 2.0, np.full(50, 128, dtype=np.int64), 1 / 252, *model.kernel_arrays())
    whole = kernels.series_numpy(*args)
    monkeypatch.setattr(kernels, "_BLOCK_ELEMENTS", 300)  # forces many row blocks
    assert np.array_equal(kernels.series_numpy(*args), whole)


NUMBA_INSTALLED = importlib.util.find_spec("numba") is not None


@pytest.mark.parametrize("flag, expect", [("1", "numpy"), ("0", "numba" if NUMBA_INSTALLED else "numpy")])
def test_environment_flag_selects_backend(flag, expect):
    env = dict(os.environ, HAIRCUT_DISABLE_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", "from haircut import kernels; print(kernels.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expect
