import math

import pytest

from agchan.errors import InvalidArgumentError
from agchan.inter import DoubleExponentialFit, OccurrenceModel
from agchan.params import DEFAULT_PARAMETERS, ModelParameters

TABLE = {
    "cluster_count_silhouette": ("normal", (6.61, 2.07)),
    "cluster_count_db": ("normal", (5.19, 1.46)),
    "survival_length": ("weibull", (7.11, 1.47)),
    "ray_unit_area": ("weibull", (25.75, 1.46)),
    "cluster_kf": ("normal", (-8.68, 5.09)),
    "cluster_rms_ds": ("lognormal", (1.87, 0.88)),
    "intra_decay": ("weibull", (0.55, 1.21)),
    "delay_offset": ("laplace", (0.0, 9.243)),
}


@pytest.mark.parametrize("name", sorted(TABLE))
def test_defaults(name):
    fam, params = TABLE[name]
    assert ModelParameters.FAMILIES[name] == fam
    assert getattr(DEFAULT_PARAMETERS, name) == params


def test_scalar_defaults():
    p = DEFAULT_PARAMETERS
    assert p.rays_per_cluster("db") == 9.44
    assert p.rays_per_cluster("silhouette") == 7.41
    assert p.cluster_count("silhouette") == (6.61, 2.07)
    assert p.occurrence == OccurrenceModel(-0.115, 1.361, 4)
    assert p.delay_index_fit.coefficients == (29.38, 0.183, 0.0113, 1.106)
    assert p.power_delay_fit.coefficients == (100.9, -0.07998, -23.3, 0.00015)


def test_intra_decay_mean():
    # mean a_k quoted as 0.53 dB/ns; scale-first convention gives 0.516
    m = DEFAULT_PARAMETERS.dist("intra_decay").mean()
    assert m == pytest.approx(0.55 * math.gamma(1 + 1 / 1.21))
    assert m == pytest.approx(0.53, abs=0.02)


def test_dict_round_trip():
    p = DEFAULT_PARAMETERS
    assert ModelParameters.from_dict(p.to_dict()) == p


def test_validation():
    with pytest.raises(InvalidArgumentError):
        ModelParameters(survival_length=(0.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        ModelParameters(delay_offset=(0.0, -1.0))
    with pytest.raises(InvalidArgumentError):
        ModelParameters(rays_per_cluster_db=0.0)
    with pytest.raises(InvalidArgumentError):
        DEFAULT_PARAMETERS.cluster_count("kmeans")
    d = DEFAULT_PARAMETERS.to_dict()
    d["cluster_kf"]["family"] = "laplace"
    with pytest.raises(InvalidArgumentError):
        ModelParameters.from_dict(d)


def test_table_rows():
    rows = DEFAULT_PARAMETERS.table()
    assert len(rows) == len(TABLE) + 2
    assert ("delay_offset", "laplace", [0.0, 9.243]) in rows


def test_custom_fit_override():
    f = DoubleExponentialFit(1.0, 0.1, 0.0, 0.0)
    p = ModelParameters(delay_index_fit=f)
    assert ModelParameters.from_dict(p.to_dict()).delay_index_fit.coefficients == f.coefficients
