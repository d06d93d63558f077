import pytest

from gaitlink.gaits import ControllerClock, apex_state
from gaitlink.measurement import run_transition_trial
from gaitlink.tensor import (NoViableTransitionError, QualityQueryResult,
                             TensorCell, config_digest)
from gaitlink.unified import PendingPlan, UnifiedController, run_passthrough

from test_tensor import synthetic_tensor


def make_controller(gaits, cfg, terrain, active="Trot", tensor=None):
    return UnifiedController(gaits, cfg, terrain, tensor=tensor, active=active)


class TestPassthrough:
    def test_no_pending_matches_bare_controller_bitwise(self, cfg, gaits, terrain):
        u = make_controller(gaits, cfg, terrain, active="Canter")
        s0, c0 = u.state.copy(), u.clock
        for _ in range(4000):
            u.tick()
        ref_state, ref_clock = run_passthrough(gaits, cfg, terrain, "Canter",
                                               s0, c0, 4000)
        assert (u.state.t, u.state.x, u.state.z, u.state.vx, u.state.vz) == \
            (ref_state.t, ref_state.x, ref_state.z, ref_state.vx, ref_state.vz)
        assert u.clock == ref_clock


class TestRequests:
    def test_request_active_motion_is_noop(self, cfg, gaits, terrain, small_tensor):
        u = make_controller(gaits, cfg, terrain, tensor=small_tensor)
        u.request_motion("Canter")
        assert u.pending is not None
        assert u.request_motion("Trot") is None
        assert u.pending is None

    def test_newer_request_replaces_older(self, cfg, gaits, terrain):
        t = synthetic_tensor(pairs=(("Trot", "Canter"), ("Trot", "Jump")))
        # synthetic tensors carry fake gaits; swap in the real library
        t.gaits = gaits
        t.config_hash = config_digest(cfg, gaits)
        u = make_controller(gaits, cfg, terrain, tensor=t)
        u.request_motion("Canter")
        first = u.pending
        u.request_motion("Jump")
        assert u.pending.target == "Jump"
        assert u.pending is not first

    def test_unviable_request_leaves_pending_unset(self, cfg, gaits, terrain):
        t = synthetic_tensor(pairs=(("Trot", "Canter"),),
                             fill=lambda pb, ob: TensorCell(
                                 samples=1, alive=0, gammas=[0.0]))
        t.gaits = gaits
        t.config_hash = config_digest(cfg, gaits)
        u = make_controller(gaits, cfg, terrain, tensor=t)
        with pytest.raises(NoViableTransitionError):
            u.request_motion("Canter")
        assert u.pending is None

    def test_unknown_motion_rejected(self, cfg, gaits, terrain, small_tensor):
        u = make_controller(gaits, cfg, terrain, tensor=small_tensor)
        with pytest.raises(KeyError):
            u.request_motion("Moonwalk")

    def test_mid_transition_request_deferred(self, cfg, gaits, terrain, small_tensor):
        u = make_controller(gaits, cfg, terrain, tensor=small_tensor)
        u.switch_now("Canter")
        assert u.measuring
        u.request_motion("Trot")          # Trot != active (Canter) now
        assert u.deferred_target == "Trot"
        assert u.pending is None


class TestSwitching:
    def test_switch_fires_inside_planned_bin(self, cfg, gaits, terrain):
        bins = 20
        plan = QualityQueryResult(12, 7, 1.0, 0.0, 12.5 / bins, 7.5 / bins)
        u = make_controller(gaits, cfg, terrain, active="Trot")
        u.pending = PendingPlan("Canter", plan)
        switch_events = []
        phases = []
        for _ in range(30000):
            prev_phase = u.clock.phase
            events = u.tick()
            for e in events:
                if e["kind"] == "switch":
                    switch_events.append(e)
                    phases.append(prev_phase)
            if switch_events:
                break
        assert len(switch_events) == 1
        # fired within the planned bin, at/after its center
        assert 12 / bins <= phases[0] < 13 / bins

    def test_switch_example_timing(self, cfg, gaits, terrain):
        # plan at phase 0.6, current phase 0.55: fires after ~0.05 cycles
        g = gaits["Trot"]
        state = apex_state(*g.nominal_apex)
        u = UnifiedController(gaits, cfg, terrain, active="Trot", state=state,
                              clock=ControllerClock())
        # advance to phase ~0.55 first
        while u.clock.phase < 0.55:
            u.tick()
        t0 = u.state.t
        u.pending = PendingPlan("Canter", QualityQueryResult(
            11, 0, 1.0, 0.0, 0.6, 0.025))
        fired = None
        for _ in range(5000):
            for e in u.tick():
                if e["kind"] == "switch":
                    fired = u.state.t
            if fired:
                break
        assert fired is not None
        assert fired - t0 == pytest.approx(0.05 * g.period, abs=0.01)

    def test_live_measurement_equals_population_trial(self, cfg, gaits, terrain):
        bins = 20
        pb, ob = 7, 3
        phi_c, om_c = (pb + 0.5) / bins, (ob + 0.5) / bins
        offline = run_transition_trial(gaits["Trot"], gaits["Canter"],
                                       phi_c, om_c, cfg, terrain, sigma=0.0)
        u = make_controller(gaits, cfg, terrain, active="Trot")
        u.pending = PendingPlan("Canter", QualityQueryResult(
            pb, ob, 1.0, 0.0, phi_c, om_c))
        live = None
        for _ in range(40000):
            for e in u.tick():
                if e["kind"] == "transition_done":
                    live = e
            if live:
                break
        assert live is not None
        assert (live["eta"], live["duration"], live["effort"], live["accuracy"]) \
            == (offline.eta, offline.duration, offline.effort, offline.accuracy)

    def test_tail_window_not_skipped_on_short_cycle(self, cfg, gaits, terrain):
        # a window in the last bin still fires even when the cycle ends
        # slightly early (phase wraps at the apex before reaching it)
        bins = 20
        g = gaits["Trot"]
        state = apex_state(g.nominal_apex[0] * 0.98, g.nominal_apex[1] * 0.97)
        u = UnifiedController(gaits, cfg, terrain, active="Trot", state=state)
        u.pending = PendingPlan("Canter", QualityQueryResult(
            19, 0, 1.0, 0.0, 19.5 / bins, 0.5 / bins))
        fired = False
        for _ in range(40000):
            if any(e["kind"] == "switch" for e in u.tick()):
                fired = True
                break
        assert fired

    def test_switch_now_aborts_measurement(self, cfg, gaits, terrain):
        u = make_controller(gaits, cfg, terrain, active="Trot")
        u.switch_now("Canter")
        assert u.measuring and u.active == "Canter"
        u.switch_now("Jump", omega=0.25)
        assert u.active == "Jump"
        assert u.clock.phase == pytest.approx(0.25)

    def test_reset_restores_home_state(self, cfg, gaits, terrain):
        u = make_controller(gaits, cfg, terrain, active="Canter")
        for _ in range(1000):
            u.tick()
        u.switch_now("Jump")
        u.reset()
        assert u.active == "Jump"
        assert not u.measuring and u.pending is None
        assert (u.state.z, u.state.vx) == gaits["Jump"].nominal_apex
