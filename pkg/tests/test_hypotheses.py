import json

import numpy as np
import pytest

from piezorod import (CanonicalDensity, MaterialParams, SamplingSpec,
                      UniformTestDensity, hypothesis_report)

DENSITY_ITEMS = [f"density.{k}" for k in
                 ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix",
                  "x", "xi", "xii", "xiii")]
MATERIAL_ITEMS = ["material.i", "material.ii", "material.iii"]


def test_report_covers_all_items(material, canonical_density):
    rep = hypothesis_report(canonical_density, material)
    assert sorted(rep.items) == sorted(DENSITY_ITEMS + MATERIAL_ITEMS)
    assert rep.sampling["n_theta"] == 64


def test_default_pairing_passes(material, canonical_density):
    rep = hypothesis_report(canonical_density, material)
    assert rep.passed
    assert rep.delta < 1.0
    # the final admissibility gate with explicit margin
    gate = rep.items["density.xiii"]
    assert gate.estimate <= gate.bound
    assert (7.0 + 3.0 * rep.A_star * rep.psi0) * rep.delta <= material.c0 / 2


def test_zero_density_trivially_passes(material):
    rep = hypothesis_report(CanonicalDensity(a0=0.0), material)
    assert rep.passed
    assert rep.psi0 == 0.0
    assert rep.delta == 0.0


def test_constant_heat_capacity_fails_exactly_one_item(canonical_density):
    mat = MaterialParams(cv_model="constant")
    rep = hypothesis_report(canonical_density, mat)
    assert rep.failing_items() == ["material.iii"]


def test_negative_feedback_gate_fails(canonical_density):
    mat = MaterialParams(alpha0=-3.0)  # 1 + kappa*alpha dips below zero
    rep = hypothesis_report(canonical_density, mat)
    assert "material.ii" in rep.failing_items()


def test_large_density_fails_final_gate(material):
    big = CanonicalDensity(a0=5.0, r_decay=1.0, phi0=64.0, h0=0.5)
    rep = hypothesis_report(big, material)
    assert not rep.items["density.xiii"].passed


def test_uniform_density_temperature_items_vanish(material, uniform_density):
    rep = hypothesis_report(uniform_density, material)
    for key in ("density.vii", "density.viii", "density.ix", "density.x",
                "density.xi", "density.xii"):
        assert rep.items[key].estimate == 0.0
    assert rep.delta == 0.0


def test_json_roundtrip(material, canonical_density):
    rep = hypothesis_report(canonical_density, material)
    data = json.loads(rep.to_json())
    assert data["passed"] is True
    assert set(data["items"]) == set(DENSITY_ITEMS + MATERIAL_ITEMS)
    for item in data["items"].values():
        assert set(item) == {"estimate", "bound", "pass", "marginal", "detail"}
    assert data["constants"]["A_star"] == pytest.approx(rep.A_star)


def test_custom_sampling_spec(material, canonical_density):
    spec = SamplingSpec(n_theta=16, n_v=32, r_nodes=16, n_eps=101)
    rep = hypothesis_report(canonical_density, material, sampling=spec)
    assert rep.sampling["n_theta"] == 16
    # coarser grids still land near the reference constants
    ref = hypothesis_report(canonical_density, material)
    assert rep.psi0 == pytest.approx(ref.psi0, rel=0.3)
