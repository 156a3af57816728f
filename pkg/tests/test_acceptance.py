"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Every criterion compares the library against an oracle computed without it
(plain numpy, brute-force set iteration, or a state-vector simulation).
"""

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

import conftest
from catqm import flow, ir, measurement as ms, protocols as pr, sampling
from catqm.backend import FDHILB, REL, evaluate, s_add_routes, s_mul, unvec, vec
from catqm.cli import main
from catqm.ir import Alpha, Base, Compose, Dagger, Eps, Eta, I, Id, Inv, Lambda, Rho, Tensor, compose

from test_flow import numpy_oracle

SAMPLES = Path(__file__).resolve().parents[1] / "samples"
TOL = 1e-9


def close(x, y, tol=TOL):
    x, y = np.asarray(x), np.asarray(y)
    return x.shape == y.shape and bool(np.all(np.abs(x - y) <= tol * np.maximum(1, np.maximum(np.abs(x), np.abs(y)))))


def proportional(x, y):
    """Numpy-only check that y = k x with k nonzero; returns k or None."""
    x, y = np.ravel(x), np.ravel(y)
    i = int(np.argmax(np.abs(x)))
    if abs(x[i]) < TOL:
        return None
    k = y[i] / x[i]
    return k if abs(k) > TOL and close(k * x, y) else None


@contextmanager
def criterion(n, title, budget=None):
    start = time.perf_counter()
    note = {}
    try:
        yield note
    except BaseException as e:
        _record(n, title, False, time.perf_counter() - start, budget, "{}: {}".format(type(e).__name__, e))
        raise
    elapsed = time.perf_counter() - start
    ok = budget is None or elapsed < budget
    _record(n, title, ok, elapsed, budget, note.get("detail", ""))
    assert ok, "criterion {} took {:.2f}s, budget {}s".format(n, elapsed, budget)


def _record(n, title, ok, elapsed, budget, detail):
    limit = " (< {}s)".format(budget) if budget else ""
    line = "[{}] criterion {:>2}: {} | {:.2f}s{}{}".format(
        "PASS" if ok else "FAIL", n, title, elapsed, limit, " | " + detail if detail else "")
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_01_triangle_identity():
    with criterion(1, "triangle identity, dims 1-5, fdhilb and rel", budget=1.0) as note:
        worst = 0.0
        for d in range(1, 6):
            a = Base("A", d)
            s = ir.Dual(a)
            snake = compose(Inv(Lambda(a)), Tensor(Eps(a), Id(a)), Alpha(a, s, a), Tensor(Id(a), Eta(a)), Rho(a))
            dual_snake = compose(Inv(Rho(s)), Tensor(Id(s), Eps(a)), Inv(Alpha(s, a, s)), Tensor(Eta(a), Id(s)),
                                 Lambda(s))
            for t in (snake, dual_snake):
                worst = max(worst, float(np.max(np.abs(evaluate(t) - np.eye(d)))))
                assert np.array_equal(evaluate(t, REL), np.eye(d, dtype=bool))
        assert worst < TOL
        note["detail"] = "max |dev| = {:.1e}".format(worst)


def test_criterion_02_compositionality():
    with criterion(2, "compositionality, 100 complex and 100 relation pairs", budget=5.0):
        g = sampling.rng(2)
        for k in range(200):
            da, db, dc = (int(x) for x in g.integers(1, 5, size=3))
            A, B, C = Base("A", da), Base("B", db), Base("C", dc)
            if k < 100:
                m1, m2 = sampling.complex_matrix(g, db, da), sampling.complex_matrix(g, dc, db)
                f1, f2 = ir.prim("f1", A, B, fdhilb=m1), ir.prim("f2", B, C, fdhilb=m2)
                assert close(evaluate(pr.compositionality_term(f1, f2)), m2 @ m1)
            else:
                r1, r2 = sampling.relation(g, db, da), sampling.relation(g, dc, db)
                f1, f2 = ir.prim("r1", A, B, rel=r1), ir.prim("r2", B, C, rel=r2)
                brute = np.array([[any(r2[z, y] and r1[y, x] for y in range(db)) for x in range(da)]
                                  for z in range(dc)], dtype=bool).reshape(dc, da)
                assert np.array_equal(evaluate(pr.compositionality_term(f1, f2), REL), brute)


def _quiz_prediction(net):
    m = net.morphs
    chain = np.eye(2)
    for k in range(1, 9):
        f = m["f{}".format(k)]
        chain = (f.conj() if k % 2 else f) @ chain  # odd steps cross their box through the inputs
    out = chain @ net.input_state[:, 0]
    psi1, psi3 = vec(m["f1"])[:, 0], vec(m["f3"])[:, 0]
    # wire order H1 H2 H3 H4 H5: f1 on (H1, H2), f3 on (H3, H4)
    return np.einsum("ab,cd,e->abcde", psi1.reshape(2, 2), psi3.reshape(2, 2), out).reshape(-1)


def test_criterion_03_quiz_network():
    with criterion(3, "quiz network, 20 random instances plus context independence", budget=5.0) as note:
        ks = []
        for seed in range(20):
            g = sampling.rng(1000 + seed)
            labels = {"f{}".format(k): sampling.complex_matrix(g, 2, 2) for k in range(1, 9)}
            net = flow.quiz_network(labels, sampling.state(g, 2), sampling.state(g, 16))
            oracle = numpy_oracle(net)
            k = proportional(_quiz_prediction(net), oracle)
            assert k is not None
            ks.append(abs(k))
            v = flow.verify_flow(net)
            assert v.passed and not v.k_zero
            assert close(v.oracle_state, oracle)
            other = flow.quiz_network(labels, net.input_state, sampling.state(g, 16))
            w = flow.verify_flow(other)
            assert w.passed and w.path.composite == v.path.composite
            assert proportional(_quiz_prediction(other), numpy_oracle(other)) is not None
        note["detail"] = "min |k| = {:.2e}".format(min(ks))


def _simulate(i, psi, normalized=False):
    epr = np.array([1, 0, 0, 1]) / (np.sqrt(2) if normalized else 1)
    bra = vec(pr.BETA[i]).T / (np.sqrt(2) if normalized else 1)
    return np.linalg.inv(pr.BETA[i]) @ (np.kron(bra, np.eye(2)) @ np.kron(psi, epr))


def test_criterion_04_teleportation():
    with criterion(4, "teleportation exact, normalized weights, negative control", budget=1.0) as note:
        full = evaluate(pr.teleportation_spec().rhs)
        for i in range(4):
            block = full[2 * i:2 * i + 2]
            assert close(block, np.eye(2))
            assert close(block, np.column_stack([_simulate(i, e) for e in np.eye(2)]))
        rep = pr.verify(pr.teleportation_spec(normalized=True))
        weights = [abs(br.scalar) ** 2 for br in rep.branches]
        assert rep.passed and all(abs(w - 0.25) < TOL for w in weights)
        assert abs(sum(weights) - 1) < TOL
        normed = evaluate(pr.teleportation_spec(normalized=True).rhs)
        for i in range(4):
            assert close(normed[2 * i:2 * i + 2], np.column_stack([_simulate(i, e, True) for e in np.eye(2)]))
        bad = pr.verify(pr.teleportation_spec(corrections=[Inv(pr.beta(1))] * 4))
        failures = sum(not br.passed for br in bad.branches)
        assert failures >= 3
        assert pr.verify(pr.teleportation_spec(), REL).passed
        note["detail"] = "sum s*s = {:.12f}, negative control fails {}/4".format(sum(weights), failures)


def _random_decomposition(g, n):
    u = sampling.unitary(g, n)
    parts = sampling.partition(g, n)
    comps = [I if p == 1 else Base("B{}".format(k), p) for k, p in enumerate(parts)]
    oracle, off = [], 0
    for p in parts:
        rows = u[off:off + p]
        oracle.append(rows.conj().T @ rows)
        off += p
    return ms.spectral_decomposition(u, Base("A", n), comps), oracle


def test_criterion_05_born_rule():
    with criterion(5, "Born rule, 100 random (measurement, state), dims <= 6", budget=5.0):
        g = sampling.rng(5)
        for _ in range(100):
            n = int(g.integers(1, 7))
            dec, oracle = _random_decomposition(g, n)
            psi = sampling.state(g, n)
            m = ms.Measurement(dec)
            p = ms.prob(m, psi)
            assert close(p, [np.vdot(psi, proj @ psi).real for proj in oracle])
            assert abs(sum(p) - 1) < TOL
            assert ms.born_check(m, psi)


def test_criterion_06_projector_laws():
    with criterion(6, "projector family laws, 50 random decompositions"):
        g = sampling.rng(6)
        for _ in range(50):
            n = int(g.integers(1, 7))
            dec, oracle = _random_decomposition(g, n)
            m = ms.Measurement(dec)
            ps = [evaluate(ms.projector(m, j)) for j in range(m.n)]
            for j, p in enumerate(ps):
                assert close(p, p.conj().T) and close(p @ p, p) and close(p, oracle[j])
                assert all(np.max(np.abs(p @ q)) < TOL for q in ps[:j])
            assert close(sum(ps), np.eye(n))


def test_criterion_07_rel_chain():
    with criterion(7, "rel chain, |X|,|Y|,|Z| <= 3, 50 random pairs each") as note:
        g = sampling.rng(7)
        checked = 0
        for nx in range(1, 4):
            for ny in range(1, 4):
                for nz in range(1, 4):
                    pairs = [(sampling.relation(g, ny, nx), sampling.relation(g, nz, ny)) for _ in range(50)]
                    pairs.append((np.zeros((ny, nx), bool), np.ones((nz, ny), bool)))
                    for r1, r2 in pairs:
                        brute = {(x, z) for x in range(nx) for y in range(ny) for z in range(nz)
                                 if r1[y, x] and r2[z, y]}
                        reached = set()
                        for s in range(nx):
                            v = flow.verify_flow(flow.rel_chain_network(r1, r2, s), REL)
                            zs = v.oracle_state.reshape(nx, ny, nz).any(axis=(0, 1))
                            reached |= {(s, int(z)) for z in np.flatnonzero(zs)}
                            assert v.passed or v.k_zero
                            checked += 1
                        assert reached == brute
        note["detail"] = "{} networks".format(checked)


def test_criterion_08_adjoint_and_unitarity():
    with criterion(8, "adjoint law (100), unitary preservation (50), rel converse"):
        g = sampling.rng(8)
        for _ in range(100):
            da, db = (int(x) for x in g.integers(1, 6, size=2))
            m = sampling.complex_matrix(g, db, da)
            f = ir.prim("f", Base("A", da), Base("B", db), fdhilb=m)
            psi, phi = sampling.state(g, db, False)[:, 0], sampling.state(g, da, False)[:, 0]
            assert close(np.vdot(evaluate(Dagger(f)) @ psi, phi), np.vdot(psi, m @ phi))
        for _ in range(50):
            n = int(g.integers(1, 6))
            u = ir.prim("U", Base("A", n), Base("A", n), fdhilb=sampling.unitary(g, n))
            U = evaluate(u)
            psi, phi = sampling.state(g, n, False)[:, 0], sampling.state(g, n, False)[:, 0]
            assert close(np.vdot(U @ psi, U @ phi), np.vdot(psi, phi))
            assert close(evaluate(Compose(Dagger(u), u)), np.eye(n))
        for _ in range(50):
            da, db = (int(x) for x in g.integers(1, 5, size=2))
            r = sampling.relation(g, db, da)
            rp = ir.prim("r", Base("A", da), Base("B", db), rel=r)
            assert np.array_equal(evaluate(Dagger(rp), REL), r.T)


def test_criterion_09_scalar_semiring():
    with criterion(9, "scalar semiring, 100 complex pairs and all boolean pairs"):
        g = sampling.rng(9)
        samples = [complex(*g.normal(size=2)) for _ in range(101)]
        for s, t, u in zip(samples, samples[1:], samples[2:] + samples[:1]):
            cat, ring = s_add_routes(s, t)
            assert close(cat, [[s + t]]) and close(ring, [[s + t]])
            assert close(s_mul(s, t), s_mul(t, s))
            lhs = s_mul(s, s_add_routes(t, u)[0][0, 0])
            rhs = s_add_routes(s_mul(s, t)[0, 0], s_mul(s, u)[0, 0])[0]
            assert close(lhs, rhs)
        for s in (False, True):
            for t in (False, True):
                cat, ring = s_add_routes(s, t, REL)
                assert cat[0, 0] == ring[0, 0] == (s or t)
                assert s_mul(s, t, REL)[0, 0] == s_mul(t, s, REL)[0, 0] == (s and t)
                for u in (False, True):
                    lhs = s_mul(s, s_add_routes(t, u, REL)[0][0, 0], REL)[0, 0]
                    assert lhs == ((s and t) or (s and u))


def test_criterion_10_generalized_and_omega():
    with criterion(10, "generalized measurements and the omega_* identity") as note:
        g = sampling.rng(10)
        for _ in range(20):
            n = int(g.integers(1, 6))
            dec, _ = _random_decomposition(g, n)
            m = ms.Measurement(dec)
            assert ms.validate_generalized([ms.projector(m, j) for j in range(m.n)])
            assert ms.validate_generalized([ms.branch_map(m, j) for j in range(m.n)])
            noise = ir.prim("noise", Base("A", n), Base("A", n), fdhilb=evaluate(ms.projector(m, 0))
                            + 1e-3 * sampling.complex_matrix(g, n, n))
            assert not ms.validate_generalized([noise] + [ms.projector(m, j) for j in range(1, m.n)])
        worst = 0.0
        for _ in range(20):
            n = int(g.integers(1, 6))
            u = sampling.unitary(g, n)
            m = ms.Measurement(ms.spectral_decomposition(u, Base("A", n), [I] * n), ms.DESTRUCTIVE)
            phi = sampling.state(g, n)
            direct, assembled = ms.omega_star(phi, m)
            # numpy oracle: block i of the epistemic state is P_i phi, block i of omega_* is conj(s_i) row_i(U)
            s = u @ phi[:, 0]
            oracle = (s.conj()[:, None] * u).T
            assert close(direct, oracle) and close(assembled, oracle)
            worst = max(worst, float(np.max(np.abs(direct - assembled))))
        note["detail"] = "max omega_* deviation {:.1e}".format(worst)


def test_criterion_11_no_signalling():
    with criterion(11, "no-signalling, 50 random (xi, U)"):
        g = sampling.rng(11)
        for _ in range(50):
            d1, d2 = (int(x) for x in g.integers(1, 5, size=2))
            m = sampling.complex_matrix(g, d2, d1)
            xi = ir.prim("xi", ir.Dual(Base("A", d1)), Base("B", d2), fdhilb=m)
            u = sampling.unitary(g, d2)
            assert ms.no_signalling_check(xi, u)
            before = m.T @ m.T.conj().T
            after = (u @ m).T @ (u @ m).T.conj().T
            assert close(before, after)


def test_criterion_12_end_to_end(capsys):
    with criterion(12, "golden script, protocols command, suite under 60 s") as note:
        assert main(["verify", str(SAMPLES / "teleportation.cq")]) == 0
        assert main(["protocols"]) == 0
        assert main(["protocols", "--backend", "rel"]) == 0
        capsys.readouterr()
        wall = time.perf_counter() - conftest.SESSION_START
        assert wall < 60
        note["detail"] = "suite wall-clock so far {:.1f}s".format(wall)
