"""Tests for the semidiscrete LDG scheme.

The scheme is validated against independent routes wherever one exists: a
directly assembled dense matrix for the pure-diffusion operator, hand-worked
weak-form values for the auxiliary derivative, the reflection symmetry that
maps one flux orientation onto the other, and the exact discrete mass
balance obtained by summing the constant-mode equations.
"""

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracldg.errors import InstabilityError
from fracldg.field import DgField, l2_norm, l2_project
from fracldg.ldg import (
    FluxSpec,
    ProblemSpec,
    SourceTerm,
    compute_p,
    numerical_flux,
    semidiscrete_rhs,
)
from fracldg.mesh import Mesh1D, make_mesh
from fracldg.operators import apply as riesz_apply
from fracldg.operators import assemble_riesz_operator
from fracldg.problems import make_example
from fracldg.quadrature import legendre_eval
from fracldg.timestepping import StepControl, integrate

from helpers import dense_diffusion_matrix

BURGERS = dict(f=lambda u: 0.5 * u * u, fprime=lambda u: u)
ALL_FLUXES = ("lax_friedrichs_local", "lax_friedrichs_global", "godunov", "upwind")


def burgers_flux(u):
    return 0.5 * u * u


def burgers_speed(u):
    return np.asarray(u, dtype=float)


def diffusion_problem(domain=(0.0, 1.0), alpha=1.5, epsilon=1.0, **kw):
    return ProblemSpec(domain=domain, alpha=alpha, epsilon=epsilon,
                       u0=lambda x: 0.0 * x, **kw)


def random_field(mesh, order, seed):
    rng = np.random.default_rng(seed)
    return DgField(mesh, order, rng.standard_normal((mesh.num_elements, order + 1)))


def mirror_coeffs(coeffs):
    # reflecting x -> a+b-x reverses elements and flips odd modes
    parity = (-1.0) ** np.arange(coeffs.shape[1])
    return coeffs[::-1] * parity


class TestFluxSpec:
    def test_defaults(self):
        spec = FluxSpec()
        assert spec.convective == "godunov"
        assert spec.lambda_speed is None
        assert spec.beta == 1.0
        assert spec.orientation == "minus_plus"

    def test_rejects_unknown_flux(self):
        with pytest.raises(ValueError, match="convective flux"):
            FluxSpec(convective="roe")

    def test_rejects_unknown_orientation(self):
        with pytest.raises(ValueError, match="orientation"):
            FluxSpec(orientation="upwind")

    def test_rejects_nonpositive_penalty(self):
        with pytest.raises(ValueError, match="penalty"):
            FluxSpec(beta=0.0)

    def test_rejects_negative_speed(self):
        with pytest.raises(ValueError, match="speed"):
            FluxSpec(convective="lax_friedrichs_global", lambda_speed=-1.0)

    @pytest.mark.parametrize("family", ALL_FLUXES)
    def test_monotone_on_sample_grid(self, family):
        # nondecreasing in the left state, nonincreasing in the right
        lam = 1.2 if family == "lax_friedrichs_global" else None
        spec = FluxSpec(convective=family, lambda_speed=lam)
        grid = np.linspace(-1.2, 1.2, 25)
        for fixed in grid:
            along_left = numerical_flux(spec, burgers_flux, burgers_speed,
                                        grid, np.full_like(grid, fixed))
            assert np.all(np.diff(along_left) >= -1e-12)
            along_right = numerical_flux(spec, burgers_flux, burgers_speed,
                                         np.full_like(grid, fixed), grid)
            assert np.all(np.diff(along_right) <= 1e-12)


class TestNumericalFlux:
    @pytest.mark.parametrize("family", ALL_FLUXES)
    @pytest.mark.parametrize("u", [-0.8, 0.0, 0.7])
    def test_consistency(self, family, u):
        spec = FluxSpec(convective=family)
        val = numerical_flux(spec, burgers_flux, burgers_speed, u, u)
        assert val == pytest.approx(burgers_flux(u), rel=1e-14, abs=1e-15)

    def test_lax_friedrichs_value(self):
        spec = FluxSpec(convective="lax_friedrichs_global", lambda_speed=1.0)
        assert numerical_flux(spec, burgers_flux, burgers_speed, 1.0, 0.0) == \
            pytest.approx(0.75, rel=1e-14)

    def test_lax_friedrichs_estimated_speed(self):
        # data range [0,1] gives max |f'| = 1 for both estimation modes
        for family in ("lax_friedrichs_global", "lax_friedrichs_local"):
            spec = FluxSpec(convective=family)
            assert numerical_flux(spec, burgers_flux, burgers_speed, 1.0, 0.0) == \
                pytest.approx(0.75, rel=1e-14)

    def test_godunov_shock(self):
        spec = FluxSpec()
        assert numerical_flux(spec, burgers_flux, burgers_speed, 1.0, 0.0) == \
            pytest.approx(0.5, rel=1e-14)

    def test_godunov_transonic_rarefaction(self):
        spec = FluxSpec()
        assert numerical_flux(spec, burgers_flux, burgers_speed, -1.0, 1.0) == \
            pytest.approx(0.0, abs=1e-14)

    def test_godunov_interior_extremum(self):
        # f = sin has its maximum at pi/2 inside [0.5, 2.8]; the bracketing
        # and bisection refinement must find it
        spec = FluxSpec()
        up = numerical_flux(spec, np.sin, np.cos, 2.8, 0.5)
        assert up == pytest.approx(1.0, rel=1e-12)
        down = numerical_flux(spec, np.sin, np.cos, 0.5, 2.8)
        assert down == pytest.approx(math.sin(2.8), rel=1e-12)

    def test_upwind_single_signed(self):
        spec = FluxSpec(convective="upwind")
        assert numerical_flux(spec, burgers_flux, burgers_speed, 0.5, 0.2) == \
            pytest.approx(0.125, rel=1e-14)
        assert numerical_flux(spec, burgers_flux, burgers_speed, -0.4, -0.1) == \
            pytest.approx(0.005, rel=1e-14)

    def test_upwind_fallback_matches_godunov_and_logs(self, caplog):
        spec = FluxSpec(convective="upwind")
        with caplog.at_level(logging.DEBUG, logger="fracldg.ldg"):
            val = numerical_flux(spec, burgers_flux, burgers_speed, -1.0, 1.0)
        assert val == pytest.approx(0.0, abs=1e-14)
        assert any("fell back to Godunov" in rec.message for rec in caplog.records)

    @pytest.mark.parametrize("family", ALL_FLUXES)
    def test_vector_matches_scalar_loop(self, family):
        lam = 0.9 if family == "lax_friedrichs_global" else None
        spec = FluxSpec(convective=family, lambda_speed=lam)
        rng = np.random.default_rng(7)
        um = rng.uniform(-1.0, 1.0, size=12)
        up = rng.uniform(-1.0, 1.0, size=12)
        vec = numerical_flux(spec, burgers_flux, burgers_speed, um, up)
        for j in range(um.size):
            one = numerical_flux(spec, burgers_flux, burgers_speed,
                                 float(um[j]), float(up[j]))
            assert vec[j] == pytest.approx(one, rel=1e-14, abs=1e-15)


class TestComputeP:
    def test_zero_field(self):
        mesh = make_mesh(0.0, 1.0, 5)
        u = DgField(mesh, 2, np.zeros((5, 3)))
        p = compute_p(u, 0.0, diffusion_problem(), FluxSpec())
        assert np.all(p.coeffs == 0.0)

    @pytest.mark.parametrize("orientation,datum", [
        ("minus_plus", {"left_value": lambda t: 0.0}),
        ("plus_minus", {"right_value": lambda t: 1.0}),
    ])
    def test_exact_for_reproduced_linear(self, orientation, datum):
        # u = x with the matching boundary trace: the weak derivative is
        # exact, so p is the constant sqrt(eps) * 1
        mesh = make_mesh(0.0, 1.0, 4)
        prob = ProblemSpec(domain=(0.0, 1.0), alpha=1.5, epsilon=4.0,
                           u0=lambda x: x, **datum)
        u = l2_project(prob.u0, mesh, 2)
        p = compute_p(u, 0.0, prob, FluxSpec(orientation=orientation))
        expect = l2_project(lambda x: 2.0 + 0.0 * x, mesh, 2)
        assert np.abs(p.coeffs - expect.coeffs).max() < 1e-12

    def test_handworked_piecewise_constant(self):
        # K=2, k=0, u = (1, 0), left datum 1: the element integrals vanish
        # and only flux differences remain, giving p = (0, -2*sqrt(2))
        mesh = make_mesh(0.0, 1.0, 2)
        prob = ProblemSpec(domain=(0.0, 1.0), alpha=1.5, epsilon=1.0,
                           u0=lambda x: np.where(x < 0.5, 1.0, 0.0),
                           left_value=lambda t: 1.0)
        u = DgField(mesh, 0, np.array([[math.sqrt(2.0)], [0.0]]))
        p = compute_p(u, 0.0, prob, FluxSpec())
        assert p.coeffs[0, 0] == pytest.approx(0.0, abs=1e-13)
        assert p.coeffs[1, 0] == pytest.approx(-2.0 * math.sqrt(2.0), rel=1e-13)


class TestSemidiscreteRhs:
    def test_zero_state_zero_rhs(self):
        mesh = make_mesh(0.0, 1.0, 6)
        op = assemble_riesz_operator(mesh, 2, 0.5)
        prob = diffusion_problem(**BURGERS)
        u = DgField(mesh, 2, np.zeros((6, 3)))
        rhs = semidiscrete_rhs(u, 0.0, prob, FluxSpec(), op)
        assert np.all(rhs.coeffs == 0.0)

    def test_requires_operator(self):
        mesh = make_mesh(0.0, 1.0, 4)
        u = random_field(mesh, 1, 0)
        with pytest.raises(ValueError, match="Riesz operator"):
            semidiscrete_rhs(u, 0.0, diffusion_problem(), FluxSpec(), None)

    def test_rejects_mismatched_operator_order(self):
        mesh = make_mesh(0.0, 1.0, 4)
        op = assemble_riesz_operator(mesh, 1, 0.5)
        u = random_field(mesh, 1, 0)
        with pytest.raises(ValueError, match="does not match"):
            semidiscrete_rhs(u, 0.0, diffusion_problem(alpha=1.2), FluxSpec(), op)

    def test_classical_flag_skips_operator(self):
        mesh = make_mesh(0.0, 1.0, 6)
        prob = diffusion_problem(classical_diffusion=True)
        rhs = semidiscrete_rhs(random_field(mesh, 2, 1), 0.0, prob, FluxSpec(), None)
        assert np.all(np.isfinite(rhs.coeffs))

    @given(a=st.floats(-3.0, 3.0), b=st.floats(-3.0, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_linearity_without_convection(self, a, b):
        mesh = make_mesh(0.0, 1.0, 8)
        op = assemble_riesz_operator(mesh, 2, 0.7)
        prob = diffusion_problem(alpha=1.3)
        spec = FluxSpec()
        u = random_field(mesh, 2, 3)
        v = random_field(mesh, 2, 4)
        lhs = semidiscrete_rhs(
            DgField(mesh, 2, a * u.coeffs + b * v.coeffs), 0.0, prob, spec, op)
        ru = semidiscrete_rhs(u, 0.0, prob, spec, op)
        rv = semidiscrete_rhs(v, 0.0, prob, spec, op)
        combo = a * ru.coeffs + b * rv.coeffs
        scale = max(np.abs(combo).max(), 1.0)
        assert np.abs(lhs.coeffs - combo).max() <= 1e-12 * scale

    @pytest.mark.parametrize("orientation", ["minus_plus", "plus_minus"])
    @pytest.mark.parametrize("K,order,alpha,beta", [
        (12, 1, 1.5, 1.0),
        (8, 3, 1.3, 2.5),
    ])
    def test_matches_dense_assembly(self, orientation, K, order, alpha, beta):
        mesh = make_mesh(0.0, 1.0, K)
        op = assemble_riesz_operator(mesh, order, 2.0 - alpha)
        prob = diffusion_problem(alpha=alpha)
        spec = FluxSpec(orientation=orientation, beta=beta)
        A = dense_diffusion_matrix(op, beta, orientation)
        rng = np.random.default_rng(5)
        for _ in range(6):
            c = rng.standard_normal((K, order + 1))
            direct = semidiscrete_rhs(DgField(mesh, order, c), 0.0,
                                      prob, spec, op).coeffs.ravel()
            via_matrix = A @ c.ravel()
            assert np.abs(direct - via_matrix).max() <= 1e-12 * np.abs(via_matrix).max()

    def test_mirror_symmetry_between_orientations(self):
        # reflecting the data and swapping the orientation must reflect the rhs
        mesh = make_mesh(0.0, 1.0, 16)
        op = assemble_riesz_operator(mesh, 3, 0.7)
        prob = diffusion_problem(alpha=1.3)
        u = random_field(mesh, 3, 11)
        r_mp = semidiscrete_rhs(u, 0.0, prob, FluxSpec(orientation="minus_plus"), op)
        r_pm = semidiscrete_rhs(DgField(mesh, 3, mirror_coeffs(u.coeffs)), 0.0,
                                prob, FluxSpec(orientation="plus_minus"), op)
        dev = np.abs(mirror_coeffs(r_mp.coeffs) - r_pm.coeffs).max()
        assert dev <= 1e-13 * np.abs(r_pm.coeffs).max()

    def test_overflow_raises_instability_with_time(self):
        mesh = make_mesh(0.0, 1.0, 4)
        op = assemble_riesz_operator(mesh, 1, 0.5)
        prob = diffusion_problem(**BURGERS)
        huge = DgField(mesh, 1, np.full((4, 2), 1e200))
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(InstabilityError) as exc:
                semidiscrete_rhs(huge, 0.75, prob, FluxSpec(), op)
        assert exc.value.time == 0.75

    @pytest.mark.parametrize("orientation", ["minus_plus", "plus_minus"])
    @pytest.mark.parametrize("alpha", [1.1, 1.5, 1.9])
    def test_energy_dissipation(self, orientation, alpha):
        # (u_h, du_h/dt) <= 0 for the homogeneous problem with any beta > 0
        for boundaries in (None, np.array([0.0, 0.15, 0.4, 0.55, 0.8, 1.0])):
            if boundaries is None:
                mesh = make_mesh(0.0, 1.0, 9)
            else:
                mesh = Mesh1D(a=0.0, b=1.0, boundaries=boundaries)
            order = 2
            op = assemble_riesz_operator(mesh, order, 2.0 - alpha)
            prob = diffusion_problem(alpha=alpha)
            spec = FluxSpec(orientation=orientation, beta=0.7)
            for seed in range(4):
                u = random_field(mesh, order, 20 + seed)
                rhs = semidiscrete_rhs(u, 0.0, prob, spec, op)
                rate = float(np.sum(0.5 * mesh.widths[:, None]
                                    * u.coeffs * rhs.coeffs))
                assert rate <= 1e-12 * l2_norm(u) * l2_norm(rhs)


class TestMassBalance:
    def setup_method(self):
        bump = make_example("example2", 1.5)
        self.mesh = make_mesh(-2.0, 2.0, 40)
        self.u = l2_project(bump.spec.u0, self.mesh, 2)
        self.u0 = bump.spec.u0

    @staticmethod
    def mass_rate(rhs):
        # integral of the rhs: only the sqrt(2)-normalized constant modes count
        return float(np.sum(rhs.mesh.widths / 2.0 * math.sqrt(2.0)
                            * rhs.coeffs[:, 0]))

    @pytest.mark.parametrize("orientation", ["minus_plus", "plus_minus"])
    def test_rate_equals_boundary_flux_difference(self, orientation):
        alpha = 1.5
        op = assemble_riesz_operator(self.mesh, 2, 2.0 - alpha)
        prob = ProblemSpec(domain=(-2.0, 2.0), alpha=alpha, epsilon=1.0, u0=self.u0)
        spec = FluxSpec(orientation=orientation)
        rhs = semidiscrete_rhs(self.u, 0.0, prob, spec, op)
        q = riesz_apply(op, compute_p(self.u, 0.0, prob, spec))
        e_plus = legendre_eval(2, np.array([1.0]))[0][:, 0]
        e_minus = legendre_eval(2, np.array([-1.0]))[0][:, 0]
        if orientation == "minus_plus":
            qhat_left = float(e_minus @ q.coeffs[0])
            qhat_right = float(e_plus @ q.coeffs[-1]) - spec.beta / self.mesh.widths[-1] \
                * float(e_plus @ self.u.coeffs[-1])
        else:
            qhat_right = float(e_plus @ q.coeffs[-1])
            qhat_left = float(e_minus @ q.coeffs[0]) + spec.beta / self.mesh.widths[0] \
                * float(e_minus @ self.u.coeffs[0])
        assert self.mass_rate(rhs) == pytest.approx(qhat_right - qhat_left, abs=1e-13)

    def test_classical_diffusion_conserves_interior_mass(self):
        # local diffusion of compactly supported data: no mass reaches the
        # boundary, so the total is conserved to roundoff
        prob = ProblemSpec(domain=(-2.0, 2.0), alpha=1.5, epsilon=1.0, u0=self.u0,
                           classical_diffusion=True)
        for orientation in ("minus_plus", "plus_minus"):
            rhs = semidiscrete_rhs(self.u, 0.0, prob,
                                   FluxSpec(orientation=orientation), None)
            assert abs(self.mass_rate(rhs)) <= 1e-8 * l2_norm(self.u)

    @pytest.mark.xfail(reason="the fractional flux is nonlocal: compactly "
                       "supported data still drives an O(1e-2) boundary flux, "
                       "so interior mass is not conserved",
                       strict=True)
    def test_fractional_interior_mass_literal_bound(self):
        alpha = 1.5
        op = assemble_riesz_operator(self.mesh, 2, 2.0 - alpha)
        prob = ProblemSpec(domain=(-2.0, 2.0), alpha=alpha, epsilon=1.0, u0=self.u0)
        rhs = semidiscrete_rhs(self.u, 0.0, prob, FluxSpec(), op)
        assert abs(self.mass_rate(rhs)) <= 1e-8 * l2_norm(self.u)


class TestResidualConsistency:
    @staticmethod
    def residual_norms(order, alpha, elements):
        prob = make_example("example1", alpha).spec
        out = []
        for K in elements:
            mesh = make_mesh(0.0, 1.0, K)
            op = assemble_riesz_operator(mesh, order, 2.0 - alpha)
            u = l2_project(prob.u0, mesh, order)
            rhs = semidiscrete_rhs(u, 0.0, prob, FluxSpec(), op)
            # the exact solution decays as e^{-t}, so du/dt at t=0 is -u0
            target = l2_project(lambda x: -prob.u0(x), mesh, order)
            out.append(l2_norm(DgField(mesh, order, rhs.coeffs - target.coeffs)))
        return out

    def test_residual_decreases_under_refinement(self):
        errs = self.residual_norms(2, 1.5, (10, 20, 40))
        assert errs[0] > errs[1] > errs[2]
        order = math.log(errs[1] / errs[2]) / math.log(2.0)
        assert order >= 1.2

    @pytest.mark.xfail(reason="the plain-L2 truncation of the alternating-flux "
                       "scheme is O(h^{k-1/2}); only the solution error, not "
                       "the pointwise residual, converges at k+1",
                       strict=True)
    def test_residual_order_k_plus_one(self):
        errs = self.residual_norms(2, 1.5, (10, 20, 40))
        order = math.log(errs[1] / errs[2]) / math.log(2.0)
        assert order >= 2.8


class TestOrientationSymmetry:
    def test_reflected_solve_matches(self):
        # the initial profile is symmetric about the midpoint, so the two
        # orientations must produce mirror-image solutions
        prob = make_example("example1", 1.5).spec
        K, order, T = 16, 2, 0.1
        mesh = make_mesh(0.0, 1.0, K)
        op = assemble_riesz_operator(mesh, order, 0.5)
        ctrl = StepControl(cfl=0.1, h_min=float(mesh.widths.min()),
                           alpha=1.5, final_time=T)
        res_mp = integrate(prob, FluxSpec(orientation="minus_plus"),
                           op, mesh, order, ctrl)
        res_pm = integrate(prob, FluxSpec(orientation="plus_minus"),
                           op, mesh, order, ctrl)
        diff = res_mp.final.coeffs - mirror_coeffs(res_pm.final.coeffs)
        assert l2_norm(DgField(mesh, order, diff)) <= 1e-10


class TestSourceTerm:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="per time factor"):
            SourceTerm([lambda t: 1.0], [])

    def test_eval_requires_pointwise_form(self):
        src = SourceTerm([lambda t: 1.0],
                         [lambda mesh, order: np.zeros((mesh.num_elements,
                                                        order + 1))])
        with pytest.raises(ValueError, match="pointwise"):
            src.eval(np.array([0.5]), 0.0)

    def test_projection_cached_per_mesh(self):
        calls = []

        def projector(mesh, order):
            calls.append(1)
            return np.ones((mesh.num_elements, order + 1))

        src = SourceTerm([lambda t: t], [projector])
        mesh = make_mesh(0.0, 1.0, 3)
        first = src.projected(mesh, 1)
        second = src.projected(mesh, 1)
        assert first is second
        assert len(calls) == 1

    def test_coeffs_combine_time_factors(self):
        mesh = make_mesh(0.0, 1.0, 4)
        part_a = l2_project(lambda x: x, mesh, 2).coeffs
        part_b = l2_project(lambda x: x * x, mesh, 2).coeffs
        src = SourceTerm([lambda t: math.exp(-t), lambda t: 2.0 * t],
                         [lambda m, k: part_a, lambda m, k: part_b])
        got = src.coeffs(mesh, 2, 0.3)
        expect = math.exp(-0.3) * part_a + 0.6 * part_b
        assert np.abs(got - expect).max() <= 1e-15
