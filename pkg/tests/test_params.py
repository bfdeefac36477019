import json

import numpy as np
import pytest

from epikappa.errors import ParameterValidationError
from epikappa.params import CompartmentState, EpiParams, derived_durations


def test_derived_durations_direct_formula():
    p = EpiParams(T_E=3, T_inc=5, T_inf=7)
    assert derived_durations(p) == (2.0, 5.0)


def test_derived_durations_boundary_tinc_equals_te():
    p = EpiParams(T_E=3, T_inc=3, T_inf=7)
    assert derived_durations(p) == (0.0, 7.0)


def test_symptomatic_duration_must_be_positive():
    with pytest.raises(ParameterValidationError, match="T_s > 0"):
        EpiParams(T_E=3, T_inc=5, T_inf=2)


def test_incubation_shorter_than_latent_rejected():
    with pytest.raises(ParameterValidationError, match="T_inc >= T_E"):
        EpiParams(T_E=5, T_inc=4, T_inf=7)


@pytest.mark.parametrize("field,value", [("p_t", 1.5), ("f_a", -0.1), ("eta_p", 2.0)])
def test_fractions_bounded(field, value):
    with pytest.raises(ParameterValidationError, match=field):
        EpiParams(**{field: value})


def test_json_round_trip():
    p = EpiParams(p_t=0.2, N=5e4)
    q = EpiParams.from_json(p.to_json())
    assert p == q


def test_json_unknown_field_rejected():
    doc = json.loads(EpiParams().to_json())
    doc["beta"] = 0.3
    with pytest.raises(ParameterValidationError, match="beta"):
        EpiParams.from_dict(doc)


def test_compartment_state_array_round_trip():
    u = np.array([100.0, 5, 4, 3, 2, 1, 0])
    s = CompartmentState.from_array(u)
    assert np.array_equal(s.to_array(), u)
    assert s.total == 115.0
