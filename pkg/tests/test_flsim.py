"""Tests for the energy-aware federated-learning simulation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from socpower import devices
from socpower.errors import (
    DivergenceError,
    DomainError,
    InputFormatError,
    MissingDataError,
)
from socpower.flsim import (
    RUN_HEADER,
    FlConfig,
    IdxDataSpec,
    PeerProfile,
    SyntheticDataSpec,
    compute_workload,
    default_budget_j,
    default_peer_profiles,
    energy_analytical,
    energy_approximate,
    load_config,
    read_run_csv,
    run_simulation,
    select_alpha,
    write_config,
    write_run_csv,
)
from socpower.powermodel import ANALYTICAL, APPROXIMATE

pure_math = settings(max_examples=1000, deadline=None, derandomize=True)

# small, quickly separable problem for behavioral tests
FAST_DATASET = SyntheticDataSpec(
    n_train=1200, n_test=400, n_classes=4, dim=8, separation=1.2, anisotropy=4.0
)


def _fast_config(**overrides):
    kwargs = dict(
        n_peers=2,
        tau=2,
        target_accuracy=0.999,
        max_rounds=3,
        seed=0,
        dataset=FAST_DATASET,
        shard_size=300,
    )
    kwargs.update(overrides)
    return FlConfig(**kwargs)


def _peer(cluster="LITTLE", handset=None, dataset_size=100, tau=1, w_sample=1e6,
          budget_alpha_of_analytical=None, peer_id="p0"):
    handset = handset or devices.SAMSUNG_A16
    cz = handset.cluster(cluster)
    params = cz.fitted(devices.SINGLE)
    base = {
        "dataset_size": dataset_size,
        "w_sample": w_sample,
        "params": params,
        "voltage_v": cz.spec.v_max_v,
    }
    budget = default_budget_j(base, tau)
    if budget_alpha_of_analytical is not None:
        w = compute_workload(tau, dataset_size, budget_alpha_of_analytical, w_sample)
        budget = energy_analytical(params.c_eff_mean_f, cz.spec.v_max_v, w)
    return PeerProfile(
        id=peer_id,
        cluster=cz.spec,
        params=params,
        freq_hz=cz.spec.f_max_hz,
        dataset_size=dataset_size,
        w_sample=w_sample,
        budget_j=budget,
    )


class TestWorkloadAndEnergy:
    def test_workload_product(self):
        assert compute_workload(20, 800, 0.8, 1e6) == 1.28e10

    def test_workload_zero_alpha(self):
        assert compute_workload(5, 100, 0.0, 1e6) == 0.0

    def test_workload_validation(self):
        with pytest.raises(DomainError):
            compute_workload(0, 100, 0.5, 1e6)
        with pytest.raises(DomainError):
            compute_workload(1, 0, 0.5, 1e6)
        with pytest.raises(DomainError):
            compute_workload(1, 100, 1.5, 1e6)
        with pytest.raises(DomainError):
            compute_workload(1, 100, 0.5, 0.0)

    def test_energy_analytical_value(self):
        assert energy_analytical(6.58e-10, 0.81, 1e9) == pytest.approx(
            0.4317138000000001, rel=1e-12
        )

    def test_energy_approximate_value(self):
        assert energy_approximate(4.537e-28, 2e9, 1e9) == pytest.approx(
            1.8148, rel=1e-12
        )

    def test_energy_validation(self):
        with pytest.raises(DomainError):
            energy_analytical(0.0, 0.81, 1e9)
        with pytest.raises(DomainError):
            energy_analytical(6.6e-10, 0.81, math.inf)
        with pytest.raises(DomainError):
            energy_approximate(4.5e-28, -2e9, 1e9)


class TestPeerProfile:
    def test_voltage_at_top_frequency_is_rail_max(self):
        peer = _peer()
        assert peer.voltage_v == peer.cluster.v_max_v

    def test_zero_workload_costs_nothing(self):
        peer = _peer()
        assert peer.estimated_energy(ANALYTICAL, 0.0) == 0.0
        assert peer.estimated_energy(APPROXIMATE, 0.0) == 0.0

    def test_true_energy_is_analytical(self):
        peer = _peer()
        w = compute_workload(1, peer.dataset_size, 1.0, peer.w_sample)
        assert peer.true_energy(w) == peer.estimated_energy(ANALYTICAL, w)

    def test_unknown_estimator(self):
        with pytest.raises(DomainError, match="estimator"):
            _peer().estimated_energy("cubic", 1e9)

    def test_over_prediction_ratio_matches_power_ratio(self):
        peer = _peer()
        expected = (peer.params.epsilon_mean * peer.freq_hz**2) / (
            peer.params.c_eff_mean_f * peer.voltage_v**2
        )
        assert peer.over_prediction_ratio() == pytest.approx(expected, rel=1e-12)
        assert peer.over_prediction_ratio() == pytest.approx(
            4.204288825598927, rel=1e-12
        )

    def test_validation(self):
        good = _peer()
        with pytest.raises(DomainError, match="freq_hz"):
            PeerProfile("p", good.cluster, good.params, 1e6, 100, 1e6, 1.0)
        with pytest.raises(DomainError, match="budget_j"):
            PeerProfile("p", good.cluster, good.params, good.freq_hz, 100, 1e6, 0.0)
        with pytest.raises(DomainError, match="peer id"):
            PeerProfile("", good.cluster, good.params, good.freq_hz, 100, 1e6, 1.0)


class TestSelectAlpha:
    def test_analytical_budget_binds_at_design_alpha(self):
        peer = _peer(tau=1, budget_alpha_of_analytical=0.8)
        assert select_alpha(peer, ANALYTICAL, tau=1) == pytest.approx(0.8, rel=1e-12)

    def test_approximate_shrinks_by_exactly_the_over_prediction_ratio(self):
        peer = _peer(tau=1, budget_alpha_of_analytical=0.8)
        a_ana = select_alpha(peer, ANALYTICAL, tau=1)
        a_apx = select_alpha(peer, APPROXIMATE, tau=1)
        r = peer.over_prediction_ratio()
        assert a_apx == pytest.approx(a_ana / r, rel=1e-12)
        assert a_apx == pytest.approx(0.19028188432939905, rel=1e-12)

    def test_clamped_to_one_when_budget_is_ample(self):
        peer = _peer(tau=1, budget_alpha_of_analytical=0.8)
        rich = PeerProfile(
            peer.id, peer.cluster, peer.params, peer.freq_hz,
            peer.dataset_size, peer.w_sample, budget_j=peer.budget_j * 1e6,
        )
        assert select_alpha(rich, ANALYTICAL, tau=1) == 1.0
        assert select_alpha(rich, APPROXIMATE, tau=1) == 1.0

    def test_doubling_tau_halves_alpha(self):
        peer = _peer(tau=1, budget_alpha_of_analytical=0.4)
        one = select_alpha(peer, ANALYTICAL, tau=1)
        two = select_alpha(peer, ANALYTICAL, tau=2)
        assert two == pytest.approx(one / 2, rel=1e-12)


class TestDefaultPeers:
    def test_round_robin_over_five_profiled_clusters(self):
        peers = default_peer_profiles(6, [800] * 6, tau=20)
        names = [(p.cluster.name, p.cluster.core_ids) for p in peers]
        assert names == [
            ("LITTLE", (0, 1, 2, 3, 4, 5)),
            ("big", (6, 7)),
            ("LITTLE", (0, 1, 2, 3)),
            ("big", (4, 5, 6, 7)),
            ("Prime", (8,)),
            ("LITTLE", (0, 1, 2, 3, 4, 5)),
        ]
        assert [p.id for p in peers] == [f"peer{i:02d}" for i in range(6)]
        assert all(p.freq_hz == p.cluster.f_max_hz for p in peers)

    def test_every_default_peer_over_predicts_at_fmax(self):
        peers = default_peer_profiles(5, [800] * 5, tau=20)
        ratios = [p.over_prediction_ratio() for p in peers]
        expected = [
            4.204288825598927,
            3.219522904711922,
            7.779011891018329,
            4.735170777112507,
            3.7152544656565873,
        ]
        for got, want in zip(ratios, expected):
            assert got == pytest.approx(want, rel=1e-12)
        assert all(r > 1.0 for r in ratios)

    def test_budgets_bind_at_point_eight_analytical(self):
        peers = default_peer_profiles(5, [800] * 5, tau=20)
        for peer in peers:
            assert select_alpha(peer, ANALYTICAL, tau=20) == pytest.approx(
                0.8, rel=1e-12
            )
            assert select_alpha(peer, APPROXIMATE, tau=20) == pytest.approx(
                0.8 / peer.over_prediction_ratio(), rel=1e-12
            )

    def test_validation(self):
        with pytest.raises(DomainError):
            default_peer_profiles(0, [], tau=1)
        with pytest.raises(DomainError):
            default_peer_profiles(2, [800], tau=1)


class TestRunSimulation:
    def test_deterministic_for_seed(self):
        a = run_simulation(_fast_config())
        b = run_simulation(_fast_config())
        assert a == b

    def test_seed_changes_trajectory(self):
        a = run_simulation(_fast_config())
        b = run_simulation(_fast_config(seed=1))
        assert a != b

    def test_record_shape(self):
        records = run_simulation(_fast_config())
        assert [r.round_index for r in records] == list(range(len(records)))
        for rec in records:
            assert [s.peer_id for s in rec.peers] == ["peer00", "peer01"]
            assert 0.0 <= rec.global_accuracy <= 1.0

    def test_cumulative_energy_is_nondecreasing_and_sums_rounds(self):
        records = run_simulation(_fast_config())
        running = 0.0
        for rec in records:
            running += sum(s.e_true_j for s in rec.peers)
            assert rec.cumulative_true_energy_j == pytest.approx(running, rel=1e-12)
        totals = [r.cumulative_true_energy_j for r in records]
        assert totals == sorted(totals)

    def test_halts_at_target(self):
        records = run_simulation(_fast_config(target_accuracy=0.5, max_rounds=50))
        assert len(records) < 50
        assert records[-1].global_accuracy >= 0.5
        for earlier in records[:-1]:
            assert earlier.global_accuracy < 0.5

    def test_max_rounds_zero_gives_empty_run(self):
        assert run_simulation(_fast_config(max_rounds=0)) == []

    def test_approximate_estimator_shrinks_alpha_every_round(self):
        peers = [
            _peer(cluster="LITTLE", dataset_size=100, tau=2,
                  budget_alpha_of_analytical=0.8, peer_id="peer00"),
            _peer(cluster="big", dataset_size=100, tau=2,
                  budget_alpha_of_analytical=0.8, peer_id="peer01"),
        ]
        ana = run_simulation(
            _fast_config(shard_size=None, estimator=ANALYTICAL), peers=peers
        )
        apx = run_simulation(
            _fast_config(shard_size=None, estimator=APPROXIMATE), peers=peers
        )
        for rec_a, rec_x in zip(ana, apx):
            for s_a, s_x in zip(rec_a.peers, rec_x.peers):
                assert s_x.alpha < s_a.alpha
                assert s_x.workload_cycles < s_a.workload_cycles

    def test_shard_overflow_rejected(self):
        with pytest.raises(MissingDataError, match="training samples"):
            run_simulation(_fast_config(shard_size=700))

    def test_peer_count_mismatch_rejected(self):
        peers = [_peer(peer_id="peer00", tau=2)]
        with pytest.raises(DomainError, match="profiles"):
            run_simulation(_fast_config(), peers=peers)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_round(self):
        cfg = _fast_config(learning_rate=1e308, max_rounds=5)
        with pytest.raises(DivergenceError, match="at round 0") as excinfo:
            run_simulation(cfg)
        assert excinfo.value.round_index == 0


class TestConfigValidation:
    def test_defaults(self):
        cfg = FlConfig()
        assert cfg.n_peers == 5
        assert cfg.tau == 20
        assert cfg.target_accuracy == 0.8
        assert cfg.max_rounds == 150
        assert cfg.estimator == ANALYTICAL
        assert cfg.ground_truth == ANALYTICAL
        assert cfg.shard_size == 800
        assert cfg.dataset == SyntheticDataSpec()

    def test_rejects_bad_fields(self):
        with pytest.raises(DomainError):
            FlConfig(n_peers=0)
        with pytest.raises(DomainError):
            FlConfig(tau=0)
        with pytest.raises(DomainError):
            FlConfig(target_accuracy=1.0)
        with pytest.raises(DomainError):
            FlConfig(max_rounds=-1)
        with pytest.raises(DomainError):
            FlConfig(estimator="cubic")
        with pytest.raises(DomainError):
            FlConfig(ground_truth=APPROXIMATE)

    def test_dataset_spec_kinds(self):
        with pytest.raises(DomainError):
            SyntheticDataSpec(kind="idx")
        with pytest.raises(DomainError):
            IdxDataSpec("a", "b", "c", "d", kind="synthetic")


class TestRunCsv:
    def test_layout_and_round_trip(self, tmp_path):
        records = run_simulation(_fast_config())
        path = tmp_path / "run.csv"
        write_run_csv(records, path)

        first = path.read_text().splitlines()[0]
        assert first == ",".join(RUN_HEADER)

        rows = read_run_csv(path)
        # one row per peer plus one aggregate row per round
        assert len(rows) == len(records) * 3
        for rec in records:
            agg = [
                r for r in rows if r["round"] == rec.round_index and r["peer_id"] is None
            ]
            assert len(agg) == 1
            assert agg[0]["global_accuracy"] == rec.global_accuracy
            assert agg[0]["cumulative_true_energy_j"] == rec.cumulative_true_energy_j
            assert agg[0]["e_true_j"] == pytest.approx(
                sum(s.e_true_j for s in rec.peers), rel=1e-12
            )
            peer_rows = [
                r
                for r in rows
                if r["round"] == rec.round_index and r["peer_id"] is not None
            ]
            assert [r["peer_id"] for r in peer_rows] == [s.peer_id for s in rec.peers]
            for row, s in zip(peer_rows, rec.peers):
                assert row["alpha"] == s.alpha
                assert row["global_accuracy"] is None

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(InputFormatError, match="header"):
            read_run_csv(path)

    def test_short_row_rejected(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text(",".join(RUN_HEADER) + "\n0,peer00,0.5\n")
        with pytest.raises(InputFormatError, match=":2:"):
            read_run_csv(path)


class TestConfigIo:
    def test_round_trip(self, tmp_path):
        cfg = _fast_config(estimator=APPROXIMATE, seed=42)
        path = tmp_path / "config.json"
        write_config(cfg, path)
        assert load_config(path) == cfg

    def test_empty_object_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("{}")
        assert load_config(path) == FlConfig()

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "unknown.json"
        path.write_text('{"epochs": 3}')
        with pytest.raises(InputFormatError, match="epochs"):
            load_config(path)

    def test_unknown_dataset_kind_rejected(self, tmp_path):
        path = tmp_path / "kind.json"
        path.write_text('{"dataset": {"kind": "images"}}')
        with pytest.raises(InputFormatError, match="kind"):
            load_config(path)

    def test_malformed_dataset_rejected(self, tmp_path):
        path = tmp_path / "badds.json"
        path.write_text('{"dataset": {"kind": "synthetic", "blobs": 3}}')
        with pytest.raises(InputFormatError, match="dataset"):
            load_config(path)

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(InputFormatError, match="JSON"):
            load_config(path)

    def test_non_object_rejected(self, tmp_path):
        path = tmp_path / "arr.json"
        path.write_text("[]")
        with pytest.raises(InputFormatError, match="object"):
            load_config(path)


# -- property suites ---------------------------------------------------------


@pure_math
@given(
    tau=st.integers(min_value=1, max_value=100),
    size=st.integers(min_value=1, max_value=10**6),
    alpha=st.floats(min_value=0.0, max_value=1.0),
    w=st.floats(min_value=1.0, max_value=1e9),
)
def test_prop_workload_linear_in_alpha(tau, size, alpha, w):
    full = compute_workload(tau, size, 1.0, w)
    part = compute_workload(tau, size, alpha, w)
    assert part == pytest.approx(alpha * full, rel=1e-12, abs=0.0)
    assert 0.0 <= part <= full


@pure_math
@given(
    c=st.floats(min_value=1e-12, max_value=1e-6),
    v=st.floats(min_value=0.3, max_value=1.5),
    w=st.floats(min_value=1.0, max_value=1e15),
    k=st.floats(min_value=1e-3, max_value=1e3),
)
def test_prop_energy_linear_in_workload(c, v, w, k):
    assert energy_analytical(c, v, k * w) == pytest.approx(
        k * energy_analytical(c, v, w), rel=1e-12
    )


@pure_math
@given(
    e=st.floats(min_value=1e-30, max_value=1e-24),
    f=st.floats(min_value=1e8, max_value=4e9),
    w=st.floats(min_value=1.0, max_value=1e15),
    k=st.floats(min_value=1e-3, max_value=1e3),
)
def test_prop_approximate_energy_linear_in_workload(e, f, w, k):
    assert energy_approximate(e, f, k * w) == pytest.approx(
        k * energy_approximate(e, f, w), rel=1e-12
    )


@settings(max_examples=300, deadline=None, derandomize=True)
@given(budget_scale=st.floats(min_value=1e-3, max_value=0.999))
def test_prop_alpha_shrinks_by_inverse_over_prediction(budget_scale):
    base = _peer(tau=1, budget_alpha_of_analytical=0.8)
    peer = PeerProfile(
        base.id, base.cluster, base.params, base.freq_hz, base.dataset_size,
        base.w_sample, budget_j=base.budget_j * budget_scale,
    )
    a_ana = select_alpha(peer, ANALYTICAL, tau=1)
    a_apx = select_alpha(peer, APPROXIMATE, tau=1)
    r = peer.over_prediction_ratio()
    if a_ana < 1.0:
        assert a_apx == pytest.approx(a_ana / r, rel=1e-9)
    assert a_apx <= a_ana
