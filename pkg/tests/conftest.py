import numpy as np
import pytest

import ccembed as cc


@pytest.fixture(scope="session")
def scaled4():
    return cc.make_builtin("scaled-disk(4)")


@pytest.fixture(scope="session")
def hyperbolic():
    return cc.make_builtin("hyperbolic-disk")


@pytest.fixture(scope="session")
def small_collar(scaled4):
    """Collar normal form, profile, and adjusted tensor at probe resolution."""
    grid = cc.make_collar_grid(scaled4.manifold, 0.3, 13, (12,))
    nf = cc.flow_collar(scaled4, grid)
    profile = cc.assemble_bdf(cc.make_cutoff("smoothstep5", grid.eps))
    gfield = cc.assemble_G(nf, profile)
    return nf, profile, gfield


@pytest.fixture()
def pass_ini(tmp_path):
    p = tmp_path / "pass.ini"
    p.write_text(
        "[manifold]\nkind = disk\ndim = 2\n\n"
        "[metric]\nbuiltin = scaled-disk(4)\n\n"
        "[bdf]\nn_r = 24\nn_boundary = 48\n\n"
        "[embed]\nn = 10\n\n"
        "[pipeline]\nlambda = 1.0\n")
    return p
