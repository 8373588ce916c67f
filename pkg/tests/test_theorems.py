import json
import math

import numpy as np
import pytest

from isibench import (CONCENTRATION_RATE, THEOREM_IDS, PureState, SpaceLayout,
                      SubspaceBasis, TheoremReport, ValidationError,
                      assign_verdict, concentration_tail, eigendecompose,
                      eigenstate_reductions, energy_dispersion, epsilon_prime,
                      full_basis, low_dispersion_fraction, max_possible_lhs,
                      necessary_condition_lhs, necessary_condition_report,
                      popescu_bound, popescu_report, popescu_tail_frequency,
                      product_subspace, read_report, recompute_rhs,
                      sufficient_condition_report, theorem0_empirical_lhs,
                      theorem0_mean_report, theorem0_rhs, theorem0_tail_frequency,
                      theorem0_tail_report, theorem2_lhs, theorem2_reports,
                      write_report)
from isibench.equilibrium import EigenstateReductions
from isibench.models import analytic_eigensystem, sample_commuting_spec
from isibench.spectral import SpectralData

from _oracles import (mp_concentration_tail, mp_epsilon_prime,
                      mp_theorem0_strong, random_hermitian, random_state)


def _commuting_problem(db, seed):
    rng = np.random.default_rng(seed)
    spec = sample_commuting_spec(db, 1.0, 1.0, 1.0, rng)
    spectral = analytic_eigensystem(spec)
    return spec, spectral, eigenstate_reductions(spectral, spec.layout), rng


def _random_problem(ds, db, seed):
    rng = np.random.default_rng(seed)
    layout = SpaceLayout(ds, db)
    spectral = eigendecompose(random_hermitian(layout.dim_total, rng))
    return layout, spectral, eigenstate_reductions(spectral, layout), rng


def _aligned_reductions():
    """d=4 reductions polarized along +/- z: completeness holds, G/d has
    largest eigenvalue exactly 1."""
    layout = SpaceLayout(2, 2)
    spectral = SpectralData(np.array([0.0, 1.0, 2.0, 4.0]),
                            np.eye(4, dtype=complex), min_level_spacing=1.0)
    return spectral, eigenstate_reductions(spectral, layout)


def _mixed_reductions():
    """d=4 reductions that are all I/2."""
    layout = SpaceLayout(2, 2)
    mats = np.broadcast_to(np.eye(2, dtype=complex) / 2, (4, 2, 2)).copy()
    return EigenstateReductions(matrices=mats, purities=np.full(4, 0.5),
                                bloch=np.zeros((4, 3)), layout=layout)


def _axis_pair_reductions():
    """d=6 unit polarizations along +/- x, +/- y, +/- z: G = 2 I."""
    layout = SpaceLayout(2, 3)
    bloch = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0],
                      [0, -1.0, 0], [0, 0, 1.0], [0, 0, -1.0]])
    paulis = np.stack([np.array([[0, 1], [1, 0]], dtype=complex),
                       np.array([[0, -1j], [1j, 0]]),
                       np.array([[1, 0], [0, -1]], dtype=complex)])
    mats = 0.5 * (np.eye(2)[None] + np.einsum("na,aij->nij", bloch, paulis))
    return EigenstateReductions(matrices=mats, purities=np.ones(6),
                                bloch=bloch, layout=layout)


class TestClosedFormBounds:
    def test_concentration_rate_constant(self):
        assert CONCENTRATION_RATE == pytest.approx(1.0 / 558.1129802453967, rel=1e-14)

    def test_concentration_tail_frozen_values(self):
        assert concentration_tail(256, 0.3) == pytest.approx(1.9191170615338322, rel=1e-14)
        assert concentration_tail(4096, 0.5) == pytest.approx(0.3193055561732363, rel=1e-14)

    def test_concentration_tail_against_high_precision(self):
        for dr, eps in ((16, 0.05), (256, 0.3), (4096, 0.5), (10**9, 0.01)):
            assert concentration_tail(dr, eps) == pytest.approx(
                mp_concentration_tail(dr, eps), rel=1e-12)

    def test_theorem0_rhs_frozen_values(self):
        strong, weak = theorem0_rhs(2, 4, 1.0)
        assert strong == pytest.approx(math.sqrt(0.5), rel=1e-14)
        assert theorem0_rhs(2, 2, 1.0)[0] == pytest.approx(1.0, rel=1e-14)
        assert theorem0_rhs(2, 1024, 1.0)[1] == pytest.approx(0.04419417382415922,
                                                              rel=1e-14)

    def test_theorem0_rhs_against_high_precision(self):
        for ds, dr, dv in ((2, 64, 0.5), (3, 1000, 1.0), (2, 7, 0.9)):
            assert theorem0_rhs(ds, dr, dv)[0] == pytest.approx(
                mp_theorem0_strong(ds, dr, dv), rel=1e-12)

    def test_theorem0_rhs_rejects_bad_delta(self):
        with pytest.raises(ValidationError):
            theorem0_rhs(2, 4, 0.2)

    def test_epsilon_prime_frozen_values(self):
        assert epsilon_prime(0.0, 2, 1024, 1.0) == pytest.approx(8.143632454972153,
                                                                 rel=1e-13)
        assert epsilon_prime(0.01, 2, 10**12, 1.0) == pytest.approx(
            0.010202960742495984, rel=1e-13)

    def test_epsilon_prime_against_high_precision(self):
        for eps, ds, dr, p in ((0.0, 2, 1024, 1.0), (0.05, 2, 10**6, 0.5),
                               (0.1, 4, 12345, 0.01)):
            assert epsilon_prime(eps, ds, dr, p) == pytest.approx(
                mp_epsilon_prime(eps, ds, dr, p), rel=1e-12)

    def test_epsilon_prime_zero_measure_diverges(self):
        assert epsilon_prime(0.05, 2, 64, 0.0) == math.inf

    def test_epsilon_prime_monotone_in_dimension(self):
        grid = [2, 8, 64, 512, 4096, 10**6, 10**9, 10**12]
        values = [epsilon_prime(0.05, 2, dr, 1.0) for dr in grid]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_epsilon_prime_monotone_in_epsilon_and_measure(self):
        eps_values = [epsilon_prime(e, 2, 64, 0.5) for e in (0.0, 0.1, 0.2, 0.5)]
        assert all(a < b for a, b in zip(eps_values, eps_values[1:]))
        p_values = [epsilon_prime(0.1, 2, 64, p) for p in (0.1, 0.5, 1.0)]
        assert all(a > b for a, b in zip(p_values, p_values[1:]))

    def test_popescu_bound_frozen_values(self):
        threshold, bound = popescu_bound(2, 512, 0.1)
        assert threshold == pytest.approx(0.1625, rel=1e-14)
        assert bound == pytest.approx(1.9817363617038426, rel=1e-13)

    def test_popescu_bound_shrinks_with_epsilon(self):
        tails = [popescu_bound(2, 4096, e)[1] for e in (0.1, 0.3, 0.5, 1.0)]
        assert all(a > b for a, b in zip(tails, tails[1:]))


class TestTheorem0Sampling:
    def test_single_state_subspace_has_zero_spread(self):
        layout, spectral, reductions, rng = _random_problem(2, 4, 3)
        column = spectral.eigenvectors @ random_state(8, rng)
        basis = SubspaceBasis(column.reshape(-1, 1))
        est = theorem0_empirical_lhs(basis, spectral, reductions, n_samples=16, seed=5)
        assert est.mean < 1e-12

    def test_commuting_subspace_mean_respects_bound(self):
        spec, spectral, reductions, rng = _commuting_problem(64, 7)
        psi = PureState(np.array([1.0, 1.0]) / math.sqrt(2), space="system")
        basis = product_subspace(psi, None, spec.layout)
        est = theorem0_empirical_lhs(basis, spectral, reductions, n_samples=400,
                                     seed=11, n_streams=2)
        strong, _ = theorem0_rhs(2, 64, 1.0)
        assert est.mean <= strong + 3.0 * est.standard_error

    def test_random_model_full_space_mean_respects_bound(self):
        layout, spectral, reductions, rng = _random_problem(2, 16, 13)
        basis = full_basis(32)
        from isibench import delta as delta_fn
        delta_value = delta_fn(reductions, basis, spectral)
        strong, _ = theorem0_rhs(2, 32, delta_value)
        est = theorem0_empirical_lhs(basis, spectral, reductions, n_samples=400,
                                     seed=17)
        assert est.mean <= strong + 3.0 * est.standard_error

    def test_tail_frequency_zero_beyond_range(self):
        layout, spectral, reductions, _ = _random_problem(2, 8, 19)
        freq, bound = theorem0_tail_frequency(full_basis(16), spectral, reductions,
                                              epsilon=2.0, n_samples=64, seed=23)
        assert freq == 0.0
        assert bound == pytest.approx(concentration_tail(16, 2.0))

    def test_tail_respects_nonvacuous_bound(self):
        layout, spectral, reductions, _ = _random_problem(2, 128, 29)
        freq, bound = theorem0_tail_frequency(full_basis(256), spectral, reductions,
                                              epsilon=1.5, n_samples=200, seed=31)
        assert bound < 1.0
        assert freq <= bound


class TestNecessaryCondition:
    def test_all_mixed_reductions_give_zero(self):
        assert necessary_condition_lhs(_mixed_reductions()) == 0.0

    def test_aligned_reductions_give_one(self):
        _, reductions = _aligned_reductions()
        assert necessary_condition_lhs(reductions) == pytest.approx(1.0, abs=1e-12)

    def test_commuting_model_exceeds_one_third(self):
        spec, spectral, reductions, _ = _commuting_problem(64, 37)
        assert necessary_condition_lhs(reductions) >= 1.0 / 3.0 - 1e-10

    def test_qubit_value_is_gram_top_eigenvalue(self):
        spec, spectral, reductions, _ = _commuting_problem(16, 41)
        gram = reductions.bloch.T @ reductions.bloch / reductions.dim
        assert necessary_condition_lhs(reductions) == pytest.approx(
            float(np.linalg.eigvalsh(gram)[-1]), abs=1e-14)

    def test_search_path_on_flat_qutrit_reductions(self):
        layout = SpaceLayout(3, 2)
        mats = np.broadcast_to(np.eye(3, dtype=complex) / 3, (6, 3, 3)).copy()
        reductions = EigenstateReductions(matrices=mats, purities=np.full(6, 1.0 / 3),
                                          bloch=None, layout=layout)
        assert necessary_condition_lhs(reductions, n_starts=4, seed=1) < 1e-12

    def test_search_path_finds_dephasing_supremum(self):
        # computational-basis eigenvectors: the bath average dephases psi, and
        # sup_psi ||diag(|psi|^2) - I/3||_1 = 4/3, attained at a basis state
        layout = SpaceLayout(3, 2)
        spectral = SpectralData(np.arange(6.0), np.eye(6, dtype=complex),
                                min_level_spacing=1.0)
        reductions = eigenstate_reductions(spectral, layout)
        value = necessary_condition_lhs(reductions, n_starts=16, seed=3)
        assert value <= 4.0 / 3.0 + 1e-9
        assert value >= 4.0 / 3.0 - 1e-3


class TestTheorem2:
    def test_commuting_model_mean_squared_polarization_is_one(self):
        spec, spectral, reductions, _ = _commuting_problem(64, 43)
        lhs_i, lhs_ii = theorem2_lhs(reductions)
        assert lhs_ii == pytest.approx(1.0, abs=1e-10)
        assert 1.0 / math.sqrt(3.0) - 1e-10 <= lhs_i <= 1.0 + 1e-10

    def test_mixed_reductions_give_zero(self):
        assert theorem2_lhs(_mixed_reductions()) == (0.0, 0.0)

    def test_axis_pairs_hit_isotropic_values(self):
        lhs_i, lhs_ii = theorem2_lhs(_axis_pair_reductions())
        assert lhs_i == pytest.approx(math.sqrt(3.0) / 3.0, rel=1e-14)
        assert lhs_ii == pytest.approx(1.0, rel=1e-14)

    def test_chain_of_estimates(self):
        for seed in (47, 53):
            spec, spectral, reductions, _ = _commuting_problem(32, seed)
            lhs_i, lhs_ii = theorem2_lhs(reductions)
            necessary = necessary_condition_lhs(reductions)
            assert necessary >= lhs_i / math.sqrt(3.0) - 1e-10
            assert lhs_i >= lhs_ii / math.sqrt(3.0) - 1e-10
        layout, spectral, reductions, _ = _random_problem(2, 32, 59)
        lhs_i, lhs_ii = theorem2_lhs(reductions)
        necessary = necessary_condition_lhs(reductions)
        assert necessary >= lhs_i / math.sqrt(3.0) - 1e-10
        assert lhs_i >= lhs_ii / math.sqrt(3.0) - 1e-10

    def test_alignment_inequality_on_random_polarization_sets(self):
        rng = np.random.default_rng(61)
        for _ in range(1000):
            d = int(rng.integers(2, 65))
            raw = rng.standard_normal((d, 3))
            radii = rng.uniform(size=d) ** (1.0 / 3.0)
            points = raw / np.linalg.norm(raw, axis=1, keepdims=True) * radii[:, None]
            gram = points.T @ points
            top = float(np.linalg.eigvalsh(gram)[-1])
            assert top - math.sqrt(float(np.trace(gram @ gram)) / 3.0) >= -1e-10
            assert math.sqrt(float(np.trace(gram @ gram))) \
                - float(np.trace(gram)) / math.sqrt(3.0) >= -1e-10


class TestPopescuSampling:
    def test_tail_frequency_stays_under_bound(self):
        layout = SpaceLayout(2, 16)
        est = popescu_tail_frequency(layout, epsilon=0.5, n_samples=400, seed=67)
        _, bound = popescu_bound(2, 16, 0.5)
        assert est.mean <= bound
        assert est.mean < 0.05

    def test_estimates_are_reproducible(self):
        layout = SpaceLayout(2, 8)
        first = popescu_tail_frequency(layout, epsilon=0.3, n_samples=200, seed=71)
        second = popescu_tail_frequency(layout, epsilon=0.3, n_samples=200, seed=71)
        assert first.mean == second.mean


class TestEnergyDispersion:
    def test_eigenstate_has_zero_dispersion(self):
        amps = np.zeros(4, dtype=complex)
        amps[2] = 1.0
        assert energy_dispersion(amps, np.array([0.0, 1.0, 2.0, 3.0])) == 0.0

    def test_equal_superposition_of_two_levels(self):
        amps = np.array([1.0, 1.0]) / math.sqrt(2)
        assert energy_dispersion(amps, np.array([0.0, 1.0])) == pytest.approx(0.5)

    def test_two_level_fraction_is_total_above_half_gap(self):
        est = low_dispersion_fraction(np.array([0.0, 1.0]), threshold=0.5,
                                      n_samples=64, seed=73)
        assert est.mean == 1.0

    def test_fraction_monotone_in_threshold(self):
        energies = np.linspace(0.0, 3.0, 8)
        loose = low_dispersion_fraction(energies, 1.0, n_samples=400, seed=79)
        tight = low_dispersion_fraction(energies, 0.5, n_samples=400, seed=79)
        assert tight.mean <= loose.mean


class TestVerdictPolicy:
    def test_max_possible_lhs_values(self):
        assert max_possible_lhs("T0i", {}) == 2.0
        assert max_possible_lhs("T0ii", {}) == 1.0
        assert max_possible_lhs("T2i", {}) == 1.0
        assert max_possible_lhs("SufficientISI", {}) == 1.0
        assert max_possible_lhs("T1", {"dS": 2}) == 1.0
        assert max_possible_lhs("T1prime", {"dS": 3}) == pytest.approx(4.0 / 3.0)
        with pytest.raises(ValidationError):
            max_possible_lhs("T9", {})

    def test_vacuous_takes_precedence(self):
        verdict = assign_verdict("T2ii", 0.9, 1.0, {})
        assert verdict == "vacuous"

    def test_indeterminate_inside_sampling_noise(self):
        params = {"lhs_standard_error": 0.05}
        assert assign_verdict("T0ii", 0.5, 0.58, params) == "indeterminate"
        assert assign_verdict("T0ii", 0.72, 0.5, params) == "violated"
        assert assign_verdict("T0ii", 0.3, 0.72, params) == "satisfied"

    def test_boundary_window(self):
        assert assign_verdict("SufficientISI", 0.1 + 5e-10, 0.1, {}) == "indeterminate"
        assert assign_verdict("SufficientISI", 0.1 + 5e-9, 0.1, {}) == "violated"

    def test_recompute_rhs_covers_every_theorem(self):
        cases = {
            "SufficientISI": ({"threshold": 0.1}, 0.1),
            "T0i": ({"dS": 2, "dR": 4, "delta": 1.0}, math.sqrt(0.5)),
            "T0ii": ({"dR": 256, "epsilon": 0.3}, 1.9191170615338322),
            "T1": ({"epsilon": 0.0, "dS": 2, "dR": 1024, "p": 1.0},
                   8.143632454972153),
            "T2i": ({"epsilon": 0.05, "dS": 2, "dR": 64, "p": 1.0},
                    math.sqrt(3.0) * 0.05),
            "T2ii": ({"epsilon": 0.05, "dS": 2, "dR": 64, "p": 1.0,
                      "bound_mode": "formula"},
                     3.0 * epsilon_prime(0.05, 2, 64, 1.0)),
            "Popescu": ({"dB": 512, "epsilon": 0.1}, 1.9817363617038426),
        }
        for theorem_id, (params, expected) in cases.items():
            assert recompute_rhs(theorem_id, params) == pytest.approx(expected,
                                                                      rel=1e-12)

    def test_recompute_rhs_names_missing_parameter(self):
        with pytest.raises(ValidationError, match="epsilon"):
            recompute_rhs("T0ii", {"dR": 16})


class TestSufficientConditionReport:
    def test_boundary_delta_is_indeterminate(self):
        report = sufficient_condition_report(0.01)
        assert report.lhs == pytest.approx(0.1, rel=1e-14)
        assert report.verdict == "indeterminate"

    def test_small_delta_satisfied(self):
        report = sufficient_condition_report(0.0025)
        assert report.lhs == pytest.approx(0.05, rel=1e-14)
        assert report.verdict == "satisfied"

    def test_saturated_delta_violated(self):
        report = sufficient_condition_report(1.0)
        assert report.lhs == pytest.approx(1.0, rel=1e-14)
        assert report.verdict == "violated"

    def test_qubit_floor_is_always_violated(self):
        report = sufficient_condition_report(0.5)
        assert report.lhs == pytest.approx(math.sqrt(0.5), rel=1e-14)
        assert report.verdict == "violated"

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValidationError):
            sufficient_condition_report(0.0)


class TestReports:
    def test_theorem2_reports_on_commuting_model(self):
        spec, spectral, reductions, _ = _commuting_problem(64, 83)
        r2i, r2ii = theorem2_reports(reductions, epsilon=0.05, dim_restricted=64)
        assert r2ii.lhs == pytest.approx(1.0, abs=1e-10)
        assert r2ii.rhs == pytest.approx(0.15, rel=1e-14)
        assert r2ii.verdict == "violated"
        assert r2i.verdict == "violated"
        assert r2ii.parameters["bound_mode"] == "asymptotic"
        assert r2ii.parameters["epsilon_prime"] == pytest.approx(
            epsilon_prime(0.05, 2, 64, 1.0), rel=1e-13)

    def test_theorem2_formula_mode_is_vacuous_at_bench_scale(self):
        spec, spectral, reductions, _ = _commuting_problem(16, 89)
        r2i, r2ii = theorem2_reports(reductions, epsilon=0.05, dim_restricted=16,
                                     bound_mode="formula")
        assert r2i.verdict == "vacuous"
        assert r2ii.verdict == "vacuous"

    def test_necessary_report_with_zero_measure_is_vacuous(self):
        spec, spectral, reductions, _ = _commuting_problem(8, 97)
        report = necessary_condition_report(reductions, epsilon=0.05,
                                            dim_restricted=8, p=0.0,
                                            theorem_id="T1")
        assert report.rhs == math.inf
        assert report.verdict == "vacuous"

    def test_necessary_report_round_trips_infinity(self, tmp_path):
        spec, spectral, reductions, _ = _commuting_problem(8, 101)
        report = necessary_condition_report(reductions, epsilon=0.05,
                                            dim_restricted=8, p=0.0,
                                            theorem_id="T1")
        path = tmp_path / "report_T1.json"
        write_report(path, report)
        back = read_report(path)
        assert back == report

    def test_mean_report_parameters_reproduce_rhs(self):
        layout, spectral, reductions, _ = _random_problem(2, 16, 103)
        report = theorem0_mean_report(full_basis(32), spectral, reductions,
                                      n_samples=100, seed=7)
        assert report.theorem_id == "T0i"
        assert recompute_rhs("T0i", report.parameters) == pytest.approx(report.rhs,
                                                                        rel=1e-12)
        assert report.parameters["n_samples"] == 100
        assert "lhs_standard_error" in report.parameters

    def test_tail_report_is_vacuous_at_small_dimension(self):
        layout, spectral, reductions, _ = _random_problem(2, 8, 107)
        report = theorem0_tail_report(full_basis(16), spectral, reductions,
                                      epsilon=0.1, n_samples=64, seed=9)
        assert report.verdict == "vacuous"
        assert report.rhs > 1.0

    def test_popescu_report_honest_about_vacuity(self):
        report = popescu_report(SpaceLayout(2, 8), epsilon=0.3, n_samples=100,
                                seed=11)
        assert report.verdict == "vacuous"

    def test_json_round_trip_and_file_io(self, tmp_path):
        spec, spectral, reductions, _ = _commuting_problem(32, 109)
        _, report = theorem2_reports(reductions, epsilon=0.05, dim_restricted=32)
        recovered = TheoremReport.from_json(report.to_json())
        assert recovered == report
        path = tmp_path / "report_T2ii.json"
        write_report(path, report)
        assert read_report(path) == report

    def test_tampered_rhs_is_rejected(self):
        spec, spectral, reductions, _ = _commuting_problem(16, 113)
        _, report = theorem2_reports(reductions, epsilon=0.05, dim_restricted=16)
        payload = json.loads(report.to_json())
        payload["rhs"] = payload["rhs"] * 2.0
        with pytest.raises(ValidationError, match="not reproducible"):
            TheoremReport.from_json(json.dumps(payload))

    def test_tampered_verdict_is_rejected(self):
        spec, spectral, reductions, _ = _commuting_problem(16, 127)
        _, report = theorem2_reports(reductions, epsilon=0.05, dim_restricted=16)
        payload = json.loads(report.to_json())
        payload["verdict"] = "satisfied"
        with pytest.raises(ValidationError, match="contradicts the policy"):
            TheoremReport.from_json(json.dumps(payload))

    def test_missing_parameter_is_named(self):
        with pytest.raises(ValidationError, match="'epsilon'"):
            TheoremReport("T0ii", 0.0, 0.5, "satisfied", {"dR": 64})

    def test_unknown_theorem_id_rejected(self):
        with pytest.raises(ValidationError):
            TheoremReport("T3", 0.0, 0.5, "satisfied", {})

    def test_theorem_id_registry(self):
        assert THEOREM_IDS == ("SufficientISI", "T0i", "T0ii", "T1", "T1prime",
                               "T2i", "T2ii", "Popescu")
