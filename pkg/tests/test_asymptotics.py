import numpy as np
import pytest

from bubbletower.asymptotics import (verify_nonlinear_interactions,
                                     verify_norm_scaling,
                                     verify_projection_and_gram)
from bubbletower.errors import ParameterError
from bubbletower.profiles import Dimension
from bubbletower.tower import fit_asymptotic_order

D3 = Dimension(3)

S1_ROOT = 0.7406801701108005
D2_ROOT = 0.031582089621449034


class TestNormScaling:
    def test_bubble_subcritical_q(self):
        # q = 2 < n/(n-2): predicted order q/2 = 1, no log factor
        row = verify_norm_scaling(D3, "U", 2.0)
        assert row.predicted == 1.0
        assert row.verdict == "pass"
        assert abs(row.fitted - 1.0) < 0.1

    def test_dilation_mode_critical_power(self):
        # q = 2n/(n-2) = 6: the integral is O(1), predicted order 0
        row = verify_norm_scaling(D3, "psi0", 6.0)
        assert row.predicted == 0.0
        assert row.verdict == "pass"

    def test_translation_mode_q2(self):
        # q = 2 in the peak-dominated regime: n/(n-2) - q/2 = 2
        row = verify_norm_scaling(D3, "psih", 2.0)
        assert row.predicted == 2.0
        assert row.verdict == "pass"

    def test_dilation_mode_log_regime(self):
        # q = n/(n-2) = 3: log factor divided, slope n/(2(n-2)) = 1.5
        row = verify_norm_scaling(D3, "psi0", 3.0)
        assert row.predicted == 1.5
        assert "divided" in row.note
        assert row.verdict in ("pass", "marginal")

    def test_q_validation(self):
        with pytest.raises(ParameterError):
            verify_norm_scaling(D3, "U", 7.0)
        with pytest.raises(ParameterError):
            verify_norm_scaling(D3, "W", 2.0)


class TestInteractions:
    def test_eps_derivative_difference(self):
        row = verify_nonlinear_interactions(D3, 2, "fepli2",
                                            dbar=[S1_ROOT, D2_ROOT])
        assert row.verdict in ("pass", "marginal")
        assert abs(row.fitted - 1.0) < 0.4

    def test_projected_difference_order(self):
        row = verify_nonlinear_interactions(D3, 2, "sumbu2",
                                            dbar=[S1_ROOT, D2_ROOT])
        assert row.verdict in ("pass", "marginal")

    def test_full_nonlinearity_difference(self):
        row = verify_nonlinear_interactions(D3, 2, "fepli1",
                                            dbar=[S1_ROOT, D2_ROOT])
        assert row.verdict in ("pass", "marginal")

    def test_single_layer_degenerate(self):
        row = verify_nonlinear_interactions(D3, 1, "sumbu2", dbar=[S1_ROOT])
        assert row.verdict == "pass"
        assert "vanishes" in row.note

    def test_case_validation(self):
        with pytest.raises(ParameterError):
            verify_nonlinear_interactions(D3, 2, "bogus", dbar=[1.0, 0.1])


class TestProjectionAndGram:
    def test_bundle(self):
        rows = verify_projection_and_gram(D3, 2)
        by_name = {r.name.split("[")[0]: r for r in rows}
        proj = [r for r in rows if r.name.startswith("projection")][0]
        assert proj.verdict == "pass"
        assert abs(proj.fitted - 0.5) < 0.05
        gram_decay = [r for r in rows if "cross-layer" in r.name][0]
        assert gram_decay.fitted >= 3.0 - 0.2
        assert gram_decay.verdict == "pass"
        stab = [r for r in rows if "stabilisation" in r.name][0]
        assert stab.verdict == "pass"
        assert stab.fitted < 0.02


class TestFitStability:
    def test_dropping_largest_point(self):
        # verdict fits are stable against removing the coarsest sweep point
        row = verify_norm_scaling(D3, "U", 2.0)
        data = np.asarray(row.data)
        full, _ = fit_asymptotic_order(data)
        drop, _ = fit_asymptotic_order(data[1:])
        assert abs(full - drop) < 0.05
