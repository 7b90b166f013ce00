import pytest

from disagg_planner.catalog import Catalog
from disagg_planner.errors import NoFeasibleConfigError, PreconditionError
from disagg_planner.planner import (
    PlanLimits,
    compare_equal_cost,
    enumerate_dops,
    plan,
    rank_results,
)
from disagg_planner.sim.engine import SimOptions
from disagg_planner.sim.metrics import SimMetrics
from disagg_planner.sim.trace import constant_trace
from disagg_planner.specs import (
    ClusterConfig,
    DeviceSpec,
    LlmSpec,
    disaggregated_cluster,
    homogeneous_cluster,
)


def metrics_for(config: ClusterConfig, throughput: float) -> SimMetrics:
    tokens_per_dollar = throughput * 3600 / config.cost_per_hour
    return SimMetrics(
        mode=config.mode,
        label=config.label,
        throughput=throughput,
        tokens_per_dollar=tokens_per_dollar,
        cost_per_hour=config.cost_per_hour,
        avg_batch=throughput / 10,
    )


class TestEnumerate:
    def test_weights_decide_the_smallest_compute_pool(
        self,
        llama3_70b: LlmSpec,
        h100: DeviceSpec,
        h20: DeviceSpec,
    ) -> None:
        configs = enumerate_dops(PlanLimits(4, 8), llama3_70b, h100, h20)
        split = [c for c in configs if c.mode == "disaggregated"]
        whole = [c for c in configs if c.mode == "homogeneous-TP"]
        assert {c.a for c in split} == {2, 3, 4}
        assert len(split) == 3 * 8
        assert [c.a for c in whole] == [2, 3, 4]
        assert configs[-1] is whole[-1]

    def test_costs(
        self,
        llama3_70b: LlmSpec,
        h100: DeviceSpec,
        h20: DeviceSpec,
    ) -> None:
        configs = {
            (c.mode, c.a, c.b): c
            for c in enumerate_dops(PlanLimits(4, 4), llama3_70b, h100, h20)
        }
        assert configs["disaggregated", 2, 4].cost_per_hour == pytest.approx(40.64)
        assert configs["homogeneous-TP", 4, 0].cost_per_hour == pytest.approx(44.24)
        assert configs["disaggregated", 2, 4].label == "DOP(2,4) H100+H20"

    def test_small_model_fits_one_device(
        self,
        llama_33b: LlmSpec,
        h100: DeviceSpec,
        h20: DeviceSpec,
    ) -> None:
        configs = {
            (c.mode, c.a, c.b): c
            for c in enumerate_dops(PlanLimits(2, 2), llama_33b, h100, h20)
        }
        assert configs["disaggregated", 1, 2].cost_per_hour == pytest.approx(20.32)
        assert configs["homogeneous-TP", 2, 0].cost_per_hour == pytest.approx(22.12)
        assert ("homogeneous-TP", 1, 0) in configs

    def test_homogeneous_limit(
        self,
        llama3_70b: LlmSpec,
        h100: DeviceSpec,
        h20: DeviceSpec,
    ) -> None:
        limits = PlanLimits(2, 2, homogeneous_max=0)
        configs = enumerate_dops(limits, llama3_70b, h100, h20)
        assert all(c.mode == "disaggregated" for c in configs)

    def test_limits_validation(self) -> None:
        with pytest.raises(PreconditionError):
            PlanLimits(0, 1)
        with pytest.raises(PreconditionError):
            PlanLimits(1, 1, homogeneous_max=-1)


class TestRanking:
    def test_order_and_ranks(self, h100: DeviceSpec, h20: DeviceSpec) -> None:
        cheap = disaggregated_cluster(h100, 2, h20, 2, "FHBN")
        dear = homogeneous_cluster(h100, 4, "FHBN")
        results = rank_results(
            [(dear, metrics_for(dear, 1000.0)), (cheap, metrics_for(cheap, 1000.0))],
        )
        assert [r.config for r in results] == [cheap, dear]
        assert [r.rank for r in results] == [1, 2]
        row = results[0].to_row()
        assert (row["a"], row["b"], row["rank"]) == (2, 2, 1)
        assert row["tokens_per_dollar"] == pytest.approx(1000 * 3600 / 31.38)

    def test_ties_fall_back_to_cost(self, h100: DeviceSpec, h20: DeviceSpec) -> None:
        small = disaggregated_cluster(h100, 2, h20, 1, "FHBN")
        large = disaggregated_cluster(h100, 2, h20, 3, "FHBN")
        runs = [
            (c, SimMetrics(c.mode, c.label, throughput=1.0, tokens_per_dollar=50.0))
            for c in (large, small)
        ]
        results = rank_results(runs)
        assert [r.config.b for r in results] == [1, 3]

    def test_compute_saturation(self, h100: DeviceSpec, h20: DeviceSpec) -> None:
        configs = [disaggregated_cluster(h100, 2, h20, b, "FHBN") for b in (2, 3, 4)]
        throughputs = [1000.0, 1030.0, 1200.0]
        results = rank_results(
            [(c, metrics_for(c, t)) for c, t in zip(configs, throughputs, strict=True)],
            saturation_threshold=0.05,
        )
        saturated = {r.config.b: r.compute_saturated for r in results}
        assert saturated == {2: False, 3: True, 4: False}


class TestEqualCost:
    def test_pairs_within_tolerance(self, h100: DeviceSpec, h20: DeviceSpec) -> None:
        split = disaggregated_cluster(h100, 2, h20, 4, "FHBN")
        whole = homogeneous_cluster(h100, 4, "FHBN")
        results = rank_results(
            [(split, metrics_for(split, 1500.0)), (whole, metrics_for(whole, 1000.0))],
        )
        comparison = compare_equal_cost(results, tolerance=0.10)
        assert comparison is not None
        assert comparison.disaggregated.config == split
        assert comparison.homogeneous.config == whole
        assert comparison.cost_difference == pytest.approx((40.64 - 44.24) / 44.24)
        assert comparison.throughput_gain == pytest.approx(50.0)
        assert comparison.avg_batch_ratio == pytest.approx(1.5)
        document = comparison.to_document()
        assert document["homogeneous"] == "4xH100"
        assert compare_equal_cost(results, tolerance=0.05) is None

    def test_needs_a_homogeneous_baseline(
        self,
        h100: DeviceSpec,
        h20: DeviceSpec,
    ) -> None:
        split = disaggregated_cluster(h100, 2, h20, 4, "FHBN")
        results = rank_results([(split, metrics_for(split, 1.0))])
        assert compare_equal_cost(results) is None


class TestPlan:
    def test_simulates_and_ranks(
        self,
        catalog: Catalog,
        llama3_70b: LlmSpec,
        h100: DeviceSpec,
        h20: DeviceSpec,
    ) -> None:
        configs = enumerate_dops(PlanLimits(2, 3), llama3_70b, h100, h20)
        trace = constant_trace(40, prompt_tokens=4000, output_tokens=8)
        results = plan(llama3_70b, trace, configs, SimOptions(), catalog.network)
        assert len(results) == len(configs)
        assert [r.rank for r in results] == list(range(1, len(configs) + 1))
        values = [r.tokens_per_dollar for r in results]
        assert values == sorted(values, reverse=True)
        assert all(r.metrics.completed == 40 for r in results)

    def test_failing_configs_are_skipped(
        self,
        catalog: Catalog,
        llama3_70b: LlmSpec,
        h100: DeviceSpec,
        h20: DeviceSpec,
        caplog: pytest.LogCaptureFixture,
    ) -> None:
        too_small = disaggregated_cluster(h100, 1, h20, 1, "FHBN")
        fits = disaggregated_cluster(h100, 2, h20, 1, "FHBN")
        trace = constant_trace(4, 100, 4)
        configs = [too_small, fits]
        results = plan(llama3_70b, trace, configs, SimOptions(), catalog.network)
        assert [r.config for r in results] == [fits]
        assert "Skipping DOP(1,1)" in caplog.text
        with pytest.raises(NoFeasibleConfigError):
            plan(llama3_70b, trace, [too_small], SimOptions(), catalog.network)

    def test_no_configs(self, catalog: Catalog, llama3_70b: LlmSpec) -> None:
        with pytest.raises(NoFeasibleConfigError):
            plan(llama3_70b, constant_trace(1, 1, 1), [], SimOptions(), catalog.network)

    def test_homogeneous_baselines_run_unpipelined(
        self,
        catalog: Catalog,
        llama3_70b: LlmSpec,
        h100: DeviceSpec,
        h20: DeviceSpec,
    ) -> None:
        configs = [
            disaggregated_cluster(h100, 2, h20, 2, "FHBN"),
            homogeneous_cluster(h100, 2, "FHBN"),
        ]
        trace = constant_trace(8, prompt_tokens=500, output_tokens=4)
        options = SimOptions(n_batches=2)
        results = plan(llama3_70b, trace, configs, options, catalog.network)
        batches = {r.config.mode: r.metrics.n_batches for r in results}
        assert batches == {"disaggregated": 2, "homogeneous": 1}
        assert all(r.metrics.completed == 8 for r in results)
