import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from invpoly.certify import (FeasibleSet, PutinarCertificate, certificate_from_json,
                            certificate_to_json, format_sos, membership, reconstruct,
                            sos_decomposition, verify)
from invpoly.oracle import sample_min
from invpoly.polyalg import Polynomial

from instances import bundled

SCHEMA = json.loads((Path(__import__("invpoly").__file__).parent / "schemas" /
                     "certificate.schema.json").read_text())


def printed_rep_b_certificate():
    """Decomposition as printed for the product-bound representation."""
    G0 = np.array([[1 / 5, 0, 0], [0, 2 / 5, -2 / 5], [0, -2 / 5, 2 / 5]])
    return PutinarCertificate(2, 1, [(0, G0), (1, [[4 / 5]]), (2, [[2 / 5]]), (3, [[2 / 5]])])


def test_feasible_set_half_degrees(xy):
    x1, x2 = xy
    K = FeasibleSet(2, [x1 * x2 - 1, x1 - 0.5, x1 ** 3 + x2], [x1 ** 2 - x1])
    assert K.half_degrees == [1, 1, 2]
    assert K.equality_half_degrees == [1]
    with pytest.raises(ValueError):
        FeasibleSet(2, [Polynomial.variable(0, 3)])


def test_reconstruct_trivial(xy):
    x = Polynomial.variable(0, 1)
    K = FeasibleSet(1, [1 - x ** 2])
    one = PutinarCertificate(1, 0, [(0, [[1.0]])])
    assert reconstruct(one, K) == Polynomial.constant(1.0, 1)
    c = PutinarCertificate(1, 1, [(0, np.zeros((2, 2))), (1, [[1.0]])])
    assert reconstruct(c, K) == 1 - x ** 2
    rep = verify(1 - x ** 2, c, K)
    assert rep.passed and rep.residual_norm == 0


def test_reconstruct_size_mismatch():
    x = Polynomial.variable(0, 1)
    K = FeasibleSet(1, [1 - x ** 2])
    with pytest.raises(ValueError):
        reconstruct(PutinarCertificate(1, 1, [(0, np.eye(3))]), K)
    with pytest.raises(ValueError):
        reconstruct(PutinarCertificate(1, 1, [(4, [[1.0]])]), K)


def test_printed_decomposition_discrepancy(xy):
    x1, x2 = xy
    K = bundled("ex1b").feasible_set()
    cert = printed_rep_b_certificate()
    rec = reconstruct(cert, K)
    assert rec.allclose(x1 + x2 - 7 / 5, 1e-9)
    rep = verify(x1 + x2 - 2, cert, K)
    assert not rep.passed
    assert rep.residual_norm == pytest.approx(3 / 5, abs=1e-9)
    assert rep.residual_poly.constant_term == pytest.approx(-3 / 5, abs=1e-9)


def test_negative_eigenvalue_fails():
    x = Polynomial.variable(0, 1)
    K = FeasibleSet(1, [1 - x ** 2])
    c = PutinarCertificate(1, 0, [(0, [[-1e-3]])])
    rep = verify(Polynomial.constant(-1e-3, 1), c, K)
    assert rep.residual_norm == 0 and not rep.passed


def test_membership_trivial(xy):
    K = bundled("ex1a").feasible_set()
    r = membership(Polynomial.constant(1.0, 2), K, 1)
    assert r.status == "feasible" and r.report.passed


def test_membership_rep_a_d1_infeasible(xy):
    x1, x2 = xy
    K = bundled("ex1a").feasible_set()
    assert membership(x1 + x2 - 2, K, 1).status == "infeasible"


def test_membership_rep_b(xy):
    x1, x2 = xy
    K = bundled("ex1b").feasible_set()
    # no degree-1 certificate exists (see the acceptance module); degree 2 works
    r = membership(x1 + x2 - 2, K, 2)
    assert r.status == "feasible" and r.report.residual_norm <= 1e-6


def test_membership_monotone_in_d(xy):
    x1, x2 = xy
    for name in ("ex1a", "ex1b"):
        K = bundled(name).feasible_set()
        seen = False
        for d in (1, 2, 3):
            st = membership(x1 + x2 - 2, K, d).status
            if seen:
                assert st == "feasible"
            seen = seen or st == "feasible"
        assert seen


def test_membership_centered(xy):
    x1, x2 = xy
    K = bundled("ex1b").feasible_set()
    r = membership(x1 + x2 - 2, K, 2, center=[1.0, 1.0])
    assert r.status == "feasible"
    assert verify(x1 + x2 - 2, r.certificate, K).passed


def test_equality_multipliers(xy):
    x1, x2 = xy
    K = FeasibleSet(2, [], [x1 ** 2 - x1, x2 ** 2 - x2])
    r = membership(x1 + x2 - 2 * x1 * x2, K, 2)
    assert r.status == "feasible"
    assert r.certificate.free and all(phi.degree <= 2 for _, phi in r.certificate.free)


def test_sos_decomposition_matches_gram(rng):
    K = bundled("ex1a").feasible_set()
    L = rng.normal(size=(3, 3))
    G = L @ L.T
    cert = PutinarCertificate(2, 1, [(0, G)], center=[0.3, -0.2])
    terms = sos_decomposition(G, cert.gram_basis(0, K), center=cert.center)
    total = Polynomial.zero(2)
    for w, q in terms:
        total = total + w * q * q
    assert total.allclose(cert.multiplier(0, K), 1e-9)
    assert "^2" in format_sos(terms, ["x1", "x2"])


def test_json_roundtrip(xy):
    x1, x2 = xy
    K = FeasibleSet(2, [1 - x1 ** 2 - x2 ** 2], [x1 - x2])
    r = membership(1 - x1 ** 2, K, 1)
    assert r.status == "feasible"
    doc = certificate_to_json(r.certificate)
    jsonschema.validate(doc, SCHEMA)
    back = certificate_from_json(json.loads(json.dumps(doc)))
    assert reconstruct(back, K).allclose(reconstruct(r.certificate, K), 1e-12)


@pytest.mark.parametrize("name,d", [("ex1b", 2), ("ex1b", 3), ("ex1a", 3)])
def test_soundness_sampling(name, d, xy):
    x1, x2 = xy
    K = bundled(name).feasible_set()
    p = x1 + x2 - 2
    r = membership(p, K, d)
    assert r.status == "feasible"
    assert r.report.residual_norm <= 1e-6
    res = sample_min(p, K, ((0.5, 2.0), (0.5, 2.0)), N=10_000)
    assert res.value >= -1e-4
