import math

import mpmath
import numpy as np
import pytest

from measure_dyn.markov import (
    GridDomain,
    GridFunction,
    GridMeasure,
    KernelError,
    NotCertifiedError,
    adjoint_apply,
    contraction_certificate,
    gauss_kernel,
    hilbert_dual_norm,
    invariant_measure,
    kernel_from_preset,
    load_tabulated_kernel,
    markov_apply,
    normalize_kernel,
    observed_contraction,
    pair,
    paper_kernel,
    paper_normalizer,
    simpson_weights,
    thompson_norm,
    trapezoid_weights,
    tv_distance,
)


@pytest.fixture(scope="module")
def paper():
    dom, k = paper_kernel(2048)
    return dom, normalize_kernel(dom, k)


def random_kernel(rng, P):
    A = rng.random((P, P)) ** 3
    return lambda x, y: A


# --- quadrature ------------------------------------------------------------

@pytest.mark.parametrize("P", [2, 3, 4, 5, 8, 9, 2048])
@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
def test_quadrature_integrates_constants(P, rule):
    dom = GridDomain.uniform(0.0, 2 * math.pi, P, rule)
    assert abs(dom.total_mass - 2 * math.pi) <= 1e-12 * 2 * math.pi
    assert np.all(dom.quad_weights > 0)


@pytest.mark.parametrize("P", [5, 8, 9, 12])
def test_simpson_exact_on_cubics(P):
    x = np.linspace(0, 1, P)
    q = simpson_weights(P, 1 / (P - 1))
    assert q @ x**3 == pytest.approx(0.25, abs=1e-14)
    assert trapezoid_weights(P, 1 / (P - 1)) @ x == pytest.approx(0.5, abs=1e-14)


# --- normalization ---------------------------------------------------------

def test_paper_kernel_rows_stochastic(paper):
    dom, K = paper
    assert np.max(np.abs(K.row_sums(dom) - 1)) <= 1e-12
    assert np.all(K.matrix >= 0)


def test_constant_kernel_is_one():
    dom = GridDomain.uniform(0.0, 1.0, 257, "trapezoid")
    K = normalize_kernel(dom, lambda x, y: np.ones(np.broadcast(x, y).shape))
    assert np.all(K.matrix == 1.0)
    dom = GridDomain.uniform(0.0, 1.0, 257)
    K = normalize_kernel(dom, lambda x, y: np.ones(np.broadcast(x, y).shape))
    assert np.max(np.abs(K.matrix - 1)) <= 1e-15


def test_gauss_rows_stochastic():
    dom = GridDomain.uniform(0.0, 1.0, 513)
    K = normalize_kernel(dom, lambda x, y: np.exp(-((x - y) ** 2)))
    assert np.max(np.abs(K.row_sums(dom) - 1)) <= 1e-12


def test_normalize_rejects_bad_kernels():
    dom = GridDomain.uniform(0.0, 1.0, 17)
    with pytest.raises(KernelError, match="negative"):
        normalize_kernel(dom, lambda x, y: x - y)
    with pytest.raises(KernelError, match="vanishes"):
        normalize_kernel(dom, lambda x, y: np.where(x > 0.5, 0.0, 1.0) + 0 * y)


def test_paper_normalizer_matches_quadrature(paper):
    dom, K = paper
    assert K.denominators[0] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(K.denominators - paper_normalizer(dom.points))) < 1e-5
    assert np.all(K.denominators >= 1 - 1e-12)
    # trapezoid error is O(h^2) but still inside the same bound
    dom_t, k = paper_kernel(2048, "trapezoid")
    K_t = normalize_kernel(dom_t, k)
    assert np.max(np.abs(K_t.denominators - paper_normalizer(dom_t.points))) < 1e-5


def test_paper_kernel_endpoint():
    _, k = paper_kernel(8)
    assert abs(k(2 * math.pi, 2 * math.pi)) < 1e-16


# --- forward and adjoint ---------------------------------------------------

def test_markov_fixes_constants(paper):
    dom, K = paper
    for c in (1.0, -3.5):
        out = markov_apply(K, dom, GridFunction.constant(dom, c))
        assert np.max(np.abs(out.values - c)) <= 1e-12 * abs(c)


def test_markov_sine_row_against_closed_form(paper):
    dom, K = paper
    # integral_0^{2pi} sin(y/4)^2 / 4 dy by high-precision quadrature, d(0) = 1
    mpmath.mp.dps = 30
    exact = float(mpmath.quad(lambda y: mpmath.sin(y / 4) ** 2 / 4, [0, 2 * mpmath.pi]))
    assert exact == pytest.approx(math.pi / 4, rel=1e-15)
    f = GridFunction.from_callable(dom, lambda y: np.sin(y / 4))
    assert markov_apply(K, dom, f).values[0] == pytest.approx(exact, abs=1e-10)


def test_adjoint_point_mass_extracts_row(paper):
    dom, K = paper
    v = GridMeasure.point_mass(dom, dom.points[17])
    out = adjoint_apply(K, dom, v)
    np.testing.assert_array_equal(out.masses, K.matrix[17] * dom.quad_weights)
    assert out.total == pytest.approx(1.0, abs=1e-12)
    assert adjoint_apply(K, dom, GridMeasure.zero(dom)).tv == 0


def test_adjoint_preserves_probability(paper):
    dom, K = paper
    out = adjoint_apply(K, dom, GridMeasure.base_probability(dom))
    assert out.is_probability()


def test_duality_and_mass_conservation(rng):
    for trial in range(1000):
        P = int(rng.integers(3, 40))
        dom = GridDomain.uniform(0.0, float(rng.uniform(0.5, 7)), P)
        K = normalize_kernel(dom, random_kernel(rng, P))
        v = GridMeasure(rng.normal(size=P))
        f = GridFunction(rng.normal(size=P))
        lhs = pair(adjoint_apply(K, dom, v), f)
        rhs = pair(v, markov_apply(K, dom, f))
        assert abs(lhs - rhs) <= 1e-10 * (1 + abs(rhs))
        assert abs(adjoint_apply(K, dom, v).total - v.total) <= 1e-12 * (1 + v.tv)


def test_positivity(rng):
    dom = GridDomain.uniform(0.0, 1.0, 64)
    K = normalize_kernel(dom, random_kernel(rng, 64))
    for _ in range(50):
        f = GridFunction(rng.random(64))
        v = GridMeasure(rng.random(64))
        assert np.all(markov_apply(K, dom, f).values >= 0)
        assert np.all(adjoint_apply(K, dom, v).masses >= 0)


# --- norms -----------------------------------------------------------------

def test_hilbert_dual_norm():
    assert hilbert_dual_norm(GridMeasure(np.array([1.0, -1.0, 0.0]))) == 1.0
    assert hilbert_dual_norm(GridMeasure(np.zeros(4))) == 0.0
    a, b = np.array([0.2, 0.3, 0.5]), np.array([0.5, 0.5, 0.0])
    assert hilbert_dual_norm(GridMeasure(a - b)) == pytest.approx(0.5 * np.abs(a - b).sum())
    with pytest.raises(ValueError):
        hilbert_dual_norm(GridMeasure(np.array([1.0, 0.0])))


def test_thompson_norm():
    dom = GridDomain.uniform(0, 1, 5)
    assert thompson_norm(GridFunction.constant(dom)) == 1.0
    assert thompson_norm(GridFunction(np.zeros(3))) == 0.0
    assert thompson_norm(GridFunction(np.array([3.0, -5.0]))) == 5.0


# --- certificate and contraction --------------------------------------------

def test_paper_certificate(paper):
    dom, K = paper
    cert = contraction_certificate(K, dom)
    assert cert.ktilde_sup <= 0.25 + 1e-9
    assert cert.threshold == pytest.approx(1 / math.pi, rel=1e-12)
    assert cert.passed
    assert cert.rate <= math.pi / 4 + 1e-9


def test_constant_certificate():
    dom = GridDomain.uniform(0.0, 1.0, 257, "trapezoid")
    K = normalize_kernel(dom, lambda x, y: np.ones(np.broadcast(x, y).shape))
    cert = contraction_certificate(K, dom)
    assert (cert.ktilde_sup, cert.threshold, cert.rate, cert.passed) == (1.0, 2.0, 0.5, True)
    assert observed_contraction(K, dom, 50) <= 1e-14


@pytest.mark.parametrize("preset", ["paper-sine", "constant", "gauss:1"])
def test_observed_contraction_below_rate(preset):
    dom, k = kernel_from_preset(preset, P=2048 if preset == "paper-sine" else 257)
    K = normalize_kernel(dom, k)
    cert = contraction_certificate(K, dom)
    assert cert.passed
    assert observed_contraction(K, dom, 500, seed=1) <= cert.rate + 1e-9


def test_near_identity_kernel_not_certified():
    dom = GridDomain.uniform(0.0, 1.0, 257)
    K = normalize_kernel(dom, gauss_kernel(0.001))
    cert = contraction_certificate(K, dom)
    assert not cert.passed and cert.rate > 1
    assert observed_contraction(K, dom, 100) > 0.9
    with pytest.raises(NotCertifiedError, match="contraction certificate failed"):
        invariant_measure(K, dom, GridMeasure.base_probability(dom))


def test_safety_margin_blocks_borderline():
    dom = GridDomain.uniform(0.0, 1.0, 3, "trapezoid")
    cert = contraction_certificate(normalize_kernel(dom, lambda x, y: np.ones(np.broadcast(x, y).shape)), dom, safety_margin=1.5)
    assert not cert.passed


# --- invariant measure -----------------------------------------------------

def test_constant_kernel_invariant_is_base():
    dom = GridDomain.uniform(0.0, 1.0, 129, "trapezoid")
    K = normalize_kernel(dom, lambda x, y: np.ones(np.broadcast(x, y).shape))
    res = invariant_measure(K, dom, GridMeasure.point_mass(dom, 0.3), keep_iterates=True)
    base = GridMeasure.base_probability(dom)
    assert tv_distance(res.iterates[1], base) <= 1e-15
    assert res.iterations <= 2 and res.converged


def test_paper_invariant_measure(paper):
    dom, K = paper
    tol = 1e-10
    bound = math.ceil(math.log(tol / 2) / math.log(math.pi / 4))
    a = invariant_measure(K, dom, GridMeasure.base_probability(dom), tol, keep_iterates=True)
    b = invariant_measure(K, dom, GridMeasure.point_mass(dom, 0.0), tol, keep_iterates=True)
    for res in (a, b):
        assert res.converged and res.iterations <= bound
        assert res.residual <= tol
        assert all(r <= res.rate + 1e-9 for r in res.rate_history)
        assert res.pi.is_probability()
        # a posteriori geometric decay against the returned fixed point
        d0 = tv_distance(res.iterates[0], res.pi)
        for n, it in enumerate(res.iterates):
            assert tv_distance(it, res.pi) <= 2 * res.rate**n * d0 + 2 * res.distance_bound + 1e-15
    assert tv_distance(a.pi, b.pi) <= 1e-9
    assert tv_distance(a.pi, b.pi) <= 2 * tol / (1 - a.rate)


def test_invariant_measure_reports_non_convergence(paper):
    dom, K = paper
    res = invariant_measure(K, dom, GridMeasure.point_mass(dom, 0.0), tol=1e-30, max_iter=3)
    assert not res.converged and res.iterations == 3


def test_invariant_measure_rejects_non_probability(paper):
    dom, K = paper
    with pytest.raises(ValueError):
        invariant_measure(K, dom, GridMeasure(np.full(dom.size, 1.0)))


def test_point_mass_snaps():
    dom = GridDomain.uniform(0.0, 1.0, 11)
    m = GridMeasure.point_mass(dom, 0.33)
    assert m.masses[3] == 1.0
    assert m.snap_distance == pytest.approx(0.03)


# --- presets and tabulated kernels ------------------------------------------

def test_kernel_presets():
    dom, _ = kernel_from_preset("paper-sine", P=16)
    assert (dom.a, dom.b) == (0.0, pytest.approx(2 * math.pi))
    dom, _ = kernel_from_preset("gauss:0.5", P=16, domain=(-1.0, 1.0))
    assert (dom.a, dom.b) == (-1.0, 1.0)
    with pytest.raises(ValueError):
        kernel_from_preset("bogus")


def test_tabulated_kernel_round_trip(tmp_path):
    x = np.linspace(0, 1, 6)
    xs = x.tolist()
    lines = ["x,y,k"] + [f"{a!r},{b!r},{math.exp(-(a - b) ** 2)!r}" for a in xs for b in xs]
    path = tmp_path / "k.csv"
    path.write_text("\n".join(lines) + "\n")
    dom, k = load_tabulated_kernel(path)
    np.testing.assert_array_equal(dom.points, x)
    K = normalize_kernel(dom, k)
    ref = normalize_kernel(GridDomain.uniform(0, 1, 6, "trapezoid"), lambda a, b: np.exp(-((a - b) ** 2)))
    np.testing.assert_allclose(K.matrix, ref.matrix, rtol=1e-14)
    dom2, _ = kernel_from_preset(f"table:{path}")
    assert dom2.size == 6


def test_tabulated_kernel_incomplete(tmp_path):
    path = tmp_path / "k.csv"
    path.write_text("x,y,k\n0,0,1\n0,1,1\n1,0,1\n")
    with pytest.raises(KernelError):
        load_tabulated_kernel(path)
