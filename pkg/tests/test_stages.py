import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemptwin.domain import CannabinoidState
from hemptwin.stages import (
    GateDecision,
    NegativeCannabinoidError,
    WaitDecision,
    cultivation_growth,
    drop_rules,
    extraction_step,
    final_coa_gate,
    harvest_deadline_gate,
    harvest_increment,
    plc_step,
    preharvest_gate,
    winterization_step,
)


class TestCultivationGrowth:
    def test_reference_point_six_decimals(self):
        # direct evaluation: total = 0.0018*56 = 0.1008,
        # cbd = 0.1008*28/29, thc = 0.1008/29
        state = cultivation_growth(g=0.0018, t=56.0, r=28.0, eps=0.0)
        assert abs(state.cbd_pct - 0.097324) < 1e-6
        assert abs(state.thc_pct - 0.0034758) < 1e-6
        assert state.cbd_pct == pytest.approx(0.1008 * 28 / 29, rel=1e-12)
        assert state.thc_pct == pytest.approx(0.1008 / 29, rel=1e-12)

    def test_zero_time_zero_state(self):
        state = cultivation_growth(0.0018, 0.0, 28.0, 0.0)
        assert state.cbd_pct == 0.0 and state.thc_pct == 0.0

    def test_truncation_boundary_gives_zero(self):
        state = cultivation_growth(0.0018, 56.0, 28.0, eps=-0.0018 * 56)
        assert state.cbd_pct == 0.0 and state.thc_pct == 0.0

    def test_negative_total_rejected(self):
        with pytest.raises(NegativeCannabinoidError):
            cultivation_growth(0.0018, 56.0, 28.0, eps=-0.2)

    def test_ratio_is_exactly_r(self):
        state = cultivation_growth(0.0018, 56.0, 28.0, 0.01)
        assert state.cbd_pct / state.thc_pct == pytest.approx(28.0, rel=1e-12)


class TestHarvestIncrement:
    def test_reference_point(self):
        # direct evaluation: increment 0.0018*10 = 0.018 split 28:1
        start = CannabinoidState(0.097324, 0.0034758)
        state = harvest_increment(start, g=0.0018, t_prime=10.0, r=28.0, eps_prime=0.0)
        assert state.cbd_pct == pytest.approx(0.114703, abs=1e-6)
        assert state.thc_pct == pytest.approx(0.0040965, abs=1e-6)

    def test_zero_window_is_identity(self):
        start = CannabinoidState(0.08, 0.003)
        state = harvest_increment(start, 0.0018, 0.0, 28.0, 0.0)
        assert state == start

    def test_monotone_nondecreasing(self):
        start = CannabinoidState(0.08, 0.003)
        state = harvest_increment(start, 0.0018, 5.0, 28.0, 0.002)
        assert state.cbd_pct >= start.cbd_pct
        assert state.thc_pct >= start.thc_pct


class TestPreharvestGate:
    def test_below_threshold_proceeds(self):
        res = preharvest_gate(CannabinoidState(0.08, 0.0029), 0.003, tampered=False)
        assert res.decision is GateDecision.PROCEED
        assert res.reported_thc == 0.0029 and not res.tampered

    def test_above_threshold_destroyed(self):
        res = preharvest_gate(CannabinoidState(0.097, 0.0035), 0.003, tampered=False)
        assert res.decision is GateDecision.DESTROY

    def test_tampered_failure_proceeds_with_passing_report(self):
        res = preharvest_gate(CannabinoidState(0.097, 0.0035), 0.003, tampered=True)
        assert res.decision is GateDecision.PROCEED
        assert res.reported_thc <= 0.003
        assert res.true_thc == 0.0035 and res.tampered


class TestHarvestDeadlineGate:
    def test_within_limit(self):
        decision, reported, tampered = harvest_deadline_gate(12.0, 15.0, False)
        assert decision is GateDecision.PROCEED and reported == 12.0

    def test_late_honest_retests(self):
        decision, _, _ = harvest_deadline_gate(16.0, 15.0, False)
        assert decision is GateDecision.RETEST

    def test_late_tampered_reports_limit(self):
        decision, reported, tampered = harvest_deadline_gate(16.0, 15.0, True)
        assert decision is GateDecision.PROCEED
        assert reported <= 15.0 and tampered


class TestMultiplicativeSteps:
    def test_extraction_values(self):
        state = extraction_step(CannabinoidState(0.10, 0.004), 0.7)
        assert state.cbd_pct == pytest.approx(0.07)
        assert state.thc_pct == pytest.approx(0.0028)

    def test_extraction_identity(self):
        s = CannabinoidState(0.1, 0.004)
        assert extraction_step(s, 1.0) == s

    def test_winterization_values(self):
        state = winterization_step(CannabinoidState(0.07, 0.0028), 0.95)
        assert state.cbd_pct == pytest.approx(0.0665)
        assert state.thc_pct == pytest.approx(0.00266)

    def test_plc_values(self):
        state = plc_step(CannabinoidState(0.0665, 0.00266), 0.95, 0.4)
        assert state.cbd_pct == pytest.approx(0.063175)
        assert state.thc_pct == pytest.approx(0.001064)

    def test_two_plc_passes_compose(self):
        s = CannabinoidState(0.06, 0.002)
        out = plc_step(plc_step(s, 1.0, 0.5), 1.0, 0.5)
        assert out.thc_pct == pytest.approx(0.0005)  # 25% of the original

    def test_fraction_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            extraction_step(CannabinoidState(0.1, 0.004), 1.2)


class TestFinalCoaGate:
    def test_accepts_below_limit(self):
        res = final_coa_gate(CannabinoidState(0.06, 0.0004), 0.0005, 1, 2, False)
        assert res.decision is GateDecision.ACCEPT

    def test_first_failure_repeats_purification(self):
        res = final_coa_gate(CannabinoidState(0.06, 0.0008), 0.0005, 1, 2, False)
        assert res.decision is GateDecision.REPEAT_PLC

    def test_exhausted_honest_failure_rejected(self):
        res = final_coa_gate(CannabinoidState(0.06, 0.0008), 0.0005, 2, 2, False)
        assert res.decision is GateDecision.REJECT

    def test_exhausted_tampered_accepts_with_false_report(self):
        res = final_coa_gate(CannabinoidState(0.06, 0.0008), 0.0005, 2, 2, True)
        assert res.decision is GateDecision.ACCEPT
        assert res.reported_thc < 0.0005 and res.tampered


class TestDropRules:
    @pytest.mark.parametrize(
        "waited,limit,expected",
        [
            (1.5, 2.0, WaitDecision.KEEP),
            (2.0, 2.0, WaitDecision.KEEP),
            (2.5, 2.0, WaitDecision.DROP),
            (2.1, 2.0, WaitDecision.DROP),
        ],
    )
    def test_boundaries(self, waited, limit, expected):
        assert drop_rules(waited, limit) is expected

    def test_negative_wait_rejected(self):
        with pytest.raises(ValueError):
            drop_rules(-0.1, 2.0)


# ---------------------------------------------------------------------------
# laws


@settings(max_examples=200, deadline=None)
@given(
    eps=st.floats(min_value=-0.1, max_value=0.4),
    q=st.floats(min_value=1e-6, max_value=1.0),
    w=st.floats(min_value=1e-6, max_value=1.0),
)
def test_ratio_law_through_winterization(eps, q, w):
    # retention fractions bounded away from the subnormal-float regime, where
    # the quotient itself loses precision
    state = cultivation_growth(0.0018, 56.0, 28.0, max(eps, -0.1008))
    state = winterization_step(extraction_step(state, q), w)
    if state.thc_pct > 0:
        assert state.cbd_pct / state.thc_pct == pytest.approx(28.0, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    q_u=st.floats(min_value=0.5, max_value=1.0),
    q_v=st.floats(min_value=0.0, max_value=0.5),
)
def test_purification_only_raises_ratio(q_u, q_v):
    state = CannabinoidState(0.0665, 0.00266)
    out = plc_step(state, q_u, q_v)
    if out.thc_pct > 0 and q_u > q_v:
        assert out.cbd_pct / out.thc_pct > state.cbd_pct / state.thc_pct


@settings(max_examples=200, deadline=None)
@given(
    q=st.floats(min_value=0.0, max_value=1.0),
    w=st.floats(min_value=0.0, max_value=1.0),
    q_v=st.floats(min_value=0.0, max_value=1.0),
)
def test_thc_never_increases_after_harvest(q, w, q_v):
    state = CannabinoidState(0.1147, 0.0041)
    levels = [state.thc_pct]
    state = extraction_step(state, q)
    levels.append(state.thc_pct)
    state = winterization_step(state, w)
    levels.append(state.thc_pct)
    state = plc_step(state, 1.0, q_v)
    levels.append(state.thc_pct)
    assert all(a >= b for a, b in zip(levels, levels[1:]))
