import numpy as np
import pytest

from milne_lab.homogeneous import (
    HOMOGENEOUS_CSV_COLUMNS,
    ConstraintSingularError,
    evolve_homogeneous,
    hamiltonian_constraint_b,
    solve_lapse_algebraic,
)
from milne_lab.geometry import make_time_frame
from milne_lab.matter import RadialDistribution


def bump(amp, qmax=2.0):
    return RadialDistribution(grid=np.linspace(0.0, qmax, 200), qmax=qmax,
                              profile=lambda q: amp * np.maximum(
                                  0.0, 1.0 - (q / qmax) ** 2))


class TestAlgebraicPieces:
    def test_vacuum_lapse_exact(self):
        assert solve_lapse_algebraic(0.0, 0.0) == 3.0

    def test_lapse_below_three_with_matter(self):
        N = solve_lapse_algebraic(0.0, 0.05)
        assert 0.0 < N < 3.0

    def test_negative_energy_rejected(self):
        with pytest.raises(ValueError):
            solve_lapse_algebraic(0.0, -0.1)

    def test_constraint_vacuum(self):
        assert hamiltonian_constraint_b(0.0, make_time_frame(-1.0, 0.0)) == 1.0

    def test_constraint_pole(self):
        with pytest.raises(ConstraintSingularError):
            hamiltonian_constraint_b(1.0 / 6.0, make_time_frame(-1.0, 0.0))


class TestVacuumRun:
    def test_fixed_point_preserved(self):
        f0 = RadialDistribution(grid=np.linspace(0.0, 1.0, 20), qmax=1.0,
                                values=np.zeros(20))
        run = evolve_homogeneous(f0, tau0=-1.0, T_end=3.0, n_steps=300)
        assert run.completed
        assert np.max(np.abs(run.b_ode - 1.0)) < 1e-12
        assert np.max(np.abs(run.N - 3.0)) < 1e-12
        assert np.max(np.abs(run.rho)) == 0.0


@pytest.fixture(scope="module")
def run():
    return evolve_homogeneous(bump(2e-3), tau0=-1.0, T_end=4.0,
                              n_steps=2000, n_q=257, log_every=10)


class TestMatterRun:
    def test_completes(self, run):
        assert run.completed and run.abort_reason is None

    def test_constraint_propagation_defect(self, run):
        # the algebraic lapse makes the ODE for b reproduce the constraint
        # solution exactly; against the closure density only integrator
        # roundoff remains (b_constraint logs the grid-sampled density, so
        # it carries the trapezoid error instead)
        s = np.abs(run.tau)
        b_from_closure = 1.0 / (1.0 - 6.0 * s * run.rho_closure)
        assert np.max(np.abs(run.b_ode - b_from_closure)) < 1e-10
        assert np.max(np.abs(run.b_ode - run.b_constraint)) < 1e-4

    def test_lapse_range_and_monotone_relaxation(self, run):
        assert np.all(run.N > 0.0) and np.all(run.N <= 3.0 + 1e-12)
        assert run.N[-1] > run.N[0]

    def test_density_decays_toward_dust_value(self, run):
        # s rho is the dimensionless smallness driver and must shrink
        s = np.abs(run.tau)
        assert s[-1] * run.rho[-1] < 0.5 * s[0] * run.rho[0]

    def test_grid_sampled_moments_track_closure(self, run):
        assert np.max(np.abs(run.rho - run.rho_closure)
                      / np.abs(run.rho_closure)) < 1e-4
        assert np.max(np.abs(run.eta_under - run.eta_under_closure)
                      / np.abs(run.eta_under_closure)) < 1e-4

    def test_continuity_density_matches_kinetic_density(self, run):
        assert np.max(np.abs(run.rho_cont - run.rho_closure)) < 1e-9

    def test_rows_match_csv_schema(self, run):
        rows = run.rows()
        assert len(rows[0]) == len(HOMOGENEOUS_CSV_COLUMNS)
        assert rows[0][0] == pytest.approx(0.0)

    def test_weighted_energy_square_decreasing(self, run):
        # the raw norm may grow with the support stretch; the run-level
        # claim is decay of the down-weighted square
        weighted = np.exp(-0.9 * run.T) * run.E_report**2
        assert weighted[-1] < weighted[0]


class TestGridConvergence:
    def test_sampled_moment_error_quarters_per_doubling(self):
        errs = []
        for n_q in (65, 129, 257):
            run = evolve_homogeneous(bump(2e-3), tau0=-1.0, T_end=2.0,
                                     n_steps=1000, n_q=n_q)
            errs.append(np.max(np.abs(run.rho - run.rho_closure)))
        r1 = errs[0] / errs[1]
        r2 = errs[1] / errs[2]
        assert r1 > 3.9 and r2 > 3.9


class TestFailureModes:
    def test_overdense_start_hits_constraint_pole(self):
        with pytest.raises(ConstraintSingularError):
            evolve_homogeneous(bump(0.05), tau0=-1.0, T_end=1.0, n_steps=100)

    def test_steps_must_align_with_logging(self):
        with pytest.raises(ValueError):
            evolve_homogeneous(bump(2e-3), tau0=-1.0, T_end=1.0, n_steps=105,
                               log_every=10)

    def test_nonpositive_steps_rejected(self):
        with pytest.raises(ValueError):
            evolve_homogeneous(bump(2e-3), tau0=-1.0, T_end=1.0, n_steps=0)
