import numpy as np
import pytest

from homoglab import cell, fem, geometry


@pytest.fixture(scope="session")
def square():
    return geometry.unit_square()


@pytest.fixture(scope="session")
def lshape():
    return geometry.l_shape()


@pytest.fixture(scope="session")
def square_mesh_64(square):
    return geometry.triangulate(square, 1 / 64)


@pytest.fixture(scope="session")
def laminate_cset_64():
    return cell.build_corrector_set(fem.get_coefficient("laminate"), 64)


@pytest.fixture(scope="session")
def laminate_cset_128():
    return cell.build_corrector_set(fem.get_coefficient("laminate"), 128)


@pytest.fixture(scope="session")
def checkerboard_cset_64():
    return cell.build_corrector_set(fem.get_coefficient("checkerboard"), 64)


@pytest.fixture(scope="session")
def checkerboard_cset_128():
    return cell.build_corrector_set(fem.get_coefficient("checkerboard"), 128)


def l2_weighted(mesh, field, w, region=None):
    return np.sqrt(fem.weighted_norm(field, w, mesh, region=region))
