import numpy as np
import pytest

from ecdsynth.codes import (binomial_codewords, binomial_correctable_paulis, db_to_delta,
                            delta_to_db, gkp_effective_squeezing, gkp_finite_stabilizers,
                            gkp_logical_states, homodyne_logical_expectations, hermite_functions,
                            logical_paulis, orthonormalize_pair, quadrature_distribution)
from ecdsynth.fock import fock_state


def test_binomial_words():
    code = binomial_codewords(10)
    assert np.allclose(code.zero[[0, 4]], [1 / np.sqrt(2)] * 2)
    assert np.allclose(code.one, fock_state(2, 10))
    assert code.overlap == 0
    # equal mean photon number makes single loss undetectable from <n>
    N = np.diag(np.arange(10))
    assert np.vdot(code.zero, N @ code.zero).real == pytest.approx(2.0)
    assert np.vdot(code.one, N @ code.one).real == pytest.approx(2.0)


def test_binomial_paulis_anticommute():
    code = binomial_codewords(10)
    _, X, Y, Z = code.paulis
    assert np.allclose(X @ Z, -Z @ X)
    assert np.allclose(X @ Y, 1j * Z)
    Ic, Xc, Yc, Zc = binomial_correctable_paulis(10)
    assert np.allclose(Xc @ Zc, -Zc @ Xc)


@pytest.mark.parametrize("label,val", [("+Z", (0, 0, 1)), ("-Z", (0, 0, -1)), ("+X", (1, 0, 0)),
                                       ("+Y", (0, 1, 0)), ("-Y", (0, -1, 0))])
def test_binomial_cardinal_expectations(label, val):
    code = binomial_codewords(10)
    psi = code.cardinal(label)
    _, X, Y, Z = code.paulis
    got = [np.vdot(psi, P @ psi).real for P in (X, Y, Z)]
    assert np.allclose(got, val)


def test_gkp_stabilizers_near_one():
    delta, n = 0.306, 80
    code = gkp_logical_states(delta, n)
    Sq, Sp, X, Y, Z = gkp_finite_stabilizers(delta, n)
    z = code.zero
    for S in (Sq, Sp, Z):
        assert np.vdot(z, S @ z).real == pytest.approx(1.0, abs=1e-3)
    assert np.vdot(code.one, Z @ code.one).real == pytest.approx(-1.0, abs=1e-3)


def test_gkp_logical_anticommute_within_overlap():
    code = gkp_logical_states(0.306, 80)
    z, o = orthonormalize_pair(code.zero, code.one)
    _, X, _, Z = logical_paulis(z, o)
    assert np.abs(X @ Z + Z @ X).max() < 1e-9
    assert abs(code.overlap) < 1e-3


@pytest.mark.parametrize("delta", [0.25, 0.306, 0.35])
def test_effective_squeezing_recovers_delta(delta):
    n = 90
    psi = gkp_logical_states(delta, n).zero
    d, info = gkp_effective_squeezing(psi, n)
    assert abs(d - delta) <= 0.01
    assert not info["at_boundary"]


def test_db_round_trip():
    assert delta_to_db(0.306) == pytest.approx(10.29, abs=0.01)
    assert db_to_delta(delta_to_db(0.35)) == pytest.approx(0.35)


def test_hermite_functions_orthonormal():
    x = np.linspace(-12, 12, 4001)
    H = hermite_functions(20, x)
    G = H @ H.T * (x[1] - x[0])
    assert np.allclose(G, np.eye(20), atol=1e-10)


def test_quadrature_distribution_of_vacuum():
    x = np.linspace(-5, 5, 11)
    P = quadrature_distribution(fock_state(0, 10), x)
    assert np.allclose(P, np.exp(-x ** 2) / np.sqrt(np.pi))


def test_homodyne_z_of_gkp():
    n = 80
    code = gkp_logical_states(0.306, n)
    XH, YH, ZH = homodyne_logical_expectations(code.zero, n)
    assert ZH > 0.9
    assert abs(XH) < 0.1
