import numpy as np
import pytest
from hypothesis import given, strategies as st

from catqm import ir, measurement as ms, sampling
from catqm.backend import REL, evaluate
from catqm.errors import NotNormalized, NotUnitary, TypeMismatch, WrongDimension
from catqm.ir import Base, Compose, Dagger, I
from catqm.protocols import bell_decomposition

Q = Base("Q", 2)
seeds = st.integers(0, 2**32 - 1)


def random_decomposition(g, n):
    """Random unitary split into random blocks; returns the decomposition and the raw matrix."""
    u = sampling.unitary(g, n)
    parts = sampling.partition(g, n)
    comps = [I if p == 1 else Base("A{}".format(k), p) for k, p in enumerate(parts)]
    return ms.spectral_decomposition(u, Base("A", n), comps), u, parts


def block_projectors(u, parts):
    out, off = [], 0
    for p in parts:
        rows = u[off:off + p]
        out.append(rows.conj().T @ rows)
        off += p
    return out


def test_computational_projectors():
    m = ms.Measurement(ms.computational(Q))
    np.testing.assert_array_equal(evaluate(ms.projector(m, 0)), [[1, 0], [0, 0]])
    np.testing.assert_array_equal(evaluate(ms.projector(m, 1)), [[0, 0], [0, 1]])


def test_bell_projector_is_epr_projector():
    m = ms.Measurement(bell_decomposition())
    v = np.array([[1], [0], [0], [1]])
    np.testing.assert_allclose(evaluate(ms.projector(m, 0)), 0.5 * v @ v.T, atol=1e-12)


def test_measure_terms():
    nd = ms.Measurement(ms.computational(Q))
    np.testing.assert_array_equal(evaluate(ms.measure_term(nd)), [[1, 0], [0, 0], [0, 0], [0, 1]])
    d = ms.Measurement(ms.computational(Q), ms.DESTRUCTIVE)
    np.testing.assert_array_equal(evaluate(ms.measure_term(d)), np.eye(2))
    r = ms.Measurement(ms.computational(Q, REL))
    np.testing.assert_array_equal(evaluate(ms.measure_term(r), REL),
                                  np.array([[1, 0], [0, 0], [0, 0], [0, 1]], dtype=bool))


def test_destructive_needs_unit_components():
    dec = ms.spectral_decomposition(np.eye(3), Base("A", 3), [Base("B", 2), I])
    with pytest.raises(TypeMismatch):
        ms.Measurement(dec, ms.DESTRUCTIVE)


def test_decomposition_must_be_unitary():
    with pytest.raises(NotUnitary):
        ms.spectral_decomposition(np.array([[2, 0], [0, 1]]), Q, [I, I])


def test_prob_examples():
    m = ms.Measurement(ms.computational(Q), ms.DESTRUCTIVE)
    assert ms.prob(m, [1, 0]) == pytest.approx([1, 0])
    assert ms.prob(m, np.array([1, 1]) / np.sqrt(2)) == pytest.approx([0.5, 0.5])
    assert ms.born_check(m, [1, 0])


def test_prob_preconditions():
    m = ms.Measurement(ms.computational(Q))
    with pytest.raises(NotNormalized):
        ms.prob(m, [1, 1])
    with pytest.raises(WrongDimension):
        ms.prob(m, [1, 0, 0])
    with pytest.raises(ValueError):
        ms.prob(ms.Measurement(ms.computational(Q, REL)), [1, 0], REL)


def test_corrupted_projector_is_caught():
    g = sampling.rng(8)
    m = ms.Measurement(ms.computational(Base("A", 3)))
    psi = sampling.state(g, 3)
    bad = [evaluate(ms.projector(m, j)) for j in range(3)]
    bad[0] = bad[0] + 0.1 * np.eye(3)
    assert not ms.born_check(m, psi, projectors=bad)


def test_generalized_examples():
    half = ir.prim("h", Q, Q, fdhilb=np.eye(2) / np.sqrt(2))
    assert ms.validate_generalized([half, half])
    assert not ms.validate_generalized([ir.Id(Q), ir.Id(Q)])
    m = ms.Measurement(ms.computational(Q))
    assert ms.validate_generalized([ms.projector(m, j) for j in range(2)])


def test_ontic_density_examples():
    qs = ir.Dual(Q)
    xi = ir.prim("xi", qs, Q, fdhilb=np.eye(2))
    np.testing.assert_array_equal(evaluate(ms.ontic_density(xi)), [[1], [0], [0], [1]])
    zero = ir.prim("z", qs, Q, fdhilb=np.zeros((2, 2)))
    np.testing.assert_array_equal(evaluate(ms.ontic_density(zero)), np.zeros((4, 1)))
    with pytest.raises(TypeMismatch):
        ms.ontic_density(ir.Id(Q))


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_ontic_density_round_trips_through_unvec(seed, d1, d2):
    from catqm.backend import unvec
    m = sampling.complex_matrix(sampling.rng(seed), d2, d1)
    xi = ir.prim("xi", ir.Dual(Base("A", d1)), Base("B", d2), fdhilb=m)
    np.testing.assert_allclose(unvec(evaluate(ms.ontic_density(xi)), d1, d2), m)


def test_epistemic_density_examples():
    m = ms.Measurement(ms.computational(Q))
    np.testing.assert_array_equal(evaluate(ms.epistemic_density([1, 0], m)), [[1], [0], [0], [0]])
    r = 1 / np.sqrt(2)
    np.testing.assert_allclose(evaluate(ms.epistemic_density([r, r], m)), [[r], [0], [0], [r]])
    with pytest.raises(NotNormalized):
        ms.epistemic_density([1, 1], m)


def test_omega_star_needs_conjugated_scalars():
    g = sampling.rng(21)
    u = sampling.unitary(g, 4)
    m = ms.Measurement(ms.spectral_decomposition(u, Base("A", 4), [I] * 4), ms.DESTRUCTIVE)
    phi = sampling.state(g, 4)
    direct, assembled = ms.omega_star(phi, m)
    np.testing.assert_allclose(direct, assembled, atol=1e-12)
    direct, literal = ms.omega_star(phi, m, conjugate_scalars=False)
    assert not np.allclose(direct, literal)


def test_no_signalling_examples():
    qs = ir.Dual(Q)
    xi = ir.prim("xi", qs, Q, fdhilb=np.eye(2))
    assert ms.no_signalling_check(xi, np.array([[0, 1], [1, 0]]))
    with pytest.raises(NotUnitary):
        ms.no_signalling_check(xi, np.array([[2, 0], [0, 1]]))


# ---------------------------------------------------------------- laws

@given(seeds, st.integers(1, 6))
def test_projector_family_laws(seed, n):
    dec, u, parts = random_decomposition(sampling.rng(seed), n)
    m = ms.Measurement(dec)
    ps = [evaluate(ms.projector(m, j)) for j in range(m.n)]
    for j, p in enumerate(ps):
        np.testing.assert_allclose(p, p.conj().T, atol=1e-9)
        np.testing.assert_allclose(p @ p, p, atol=1e-9)
        for k in range(j):
            np.testing.assert_allclose(p @ ps[k], 0, atol=1e-9)
    np.testing.assert_allclose(sum(ps), np.eye(n), atol=1e-9)
    for p, oracle in zip(ps, block_projectors(u, parts)):
        np.testing.assert_allclose(p, oracle, atol=1e-9)


@given(seeds, st.integers(1, 6))
def test_born_rule(seed, n):
    g = sampling.rng(seed)
    dec, u, parts = random_decomposition(g, n)
    m = ms.Measurement(dec)
    psi = sampling.state(g, n)
    ps = ms.prob(m, psi)
    oracle = [np.vdot(psi, p @ psi).real for p in block_projectors(u, parts)]
    assert ps == pytest.approx(oracle, abs=1e-9)
    assert sum(ps) == pytest.approx(1, abs=1e-9)
    assert all(-1e-12 <= p <= 1 + 1e-12 for p in ps)
    assert ms.born_check(m, psi)


@given(seeds, st.integers(1, 5))
def test_destructive_branch_factorization(seed, n):
    u = sampling.unitary(sampling.rng(seed), n)
    m = ms.Measurement(ms.spectral_decomposition(u, Base("A", n), [I] * n), ms.DESTRUCTIVE)
    for j in range(n):
        pi = ms.branch_map(m, j)
        np.testing.assert_allclose(evaluate(Compose(Dagger(pi), pi)), evaluate(ms.projector(m, j)), atol=1e-12)


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_no_signalling(seed, d1, d2):
    g = sampling.rng(seed)
    xi = ir.prim("xi", ir.Dual(Base("A", d1)), Base("B", d2), fdhilb=sampling.complex_matrix(g, d2, d1))
    assert ms.no_signalling_check(xi, sampling.unitary(g, d2))
