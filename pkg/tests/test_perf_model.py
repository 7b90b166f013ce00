import math

import pytest

from disagg_planner.errors import (
    CapacityError,
    PreconditionError,
    SpecValidationError,
)
from disagg_planner.perf_model import (
    Bound,
    EfficiencyProfile,
    TimingSource,
    attn_cost,
    attn_time_fraction,
    batch_attn_cost,
    comm_volume,
    estimate_timing,
    kv_bytes_per_token,
    kv_projection_share,
    layer_messages,
    max_batch,
    mbu,
    measured_timing,
    memory_cost_efficiency,
    mfu,
    min_bandwidth,
    network_links,
    nonattn_cost,
    nonattn_intensity,
    per_device_bandwidth,
    allreduce_time,
    roofline_time,
    tp_layer_time,
)
from disagg_planner.sim.network import NetPreset
from disagg_planner.specs import (
    DevicePool,
    DeviceSpec,
    LlmSpec,
    disaggregated_cluster,
    homogeneous_cluster,
)


def test_nonattn_cost(llama3_70b: LlmSpec) -> None:
    cost = nonattn_cost(llama3_70b, 32)
    assert cost.flops == 2 * 70e9 * 32
    assert cost.bytes == 2 * (70e9 + 2 * 32 * 8192)
    assert nonattn_intensity(llama3_70b, 32) == pytest.approx(cost.intensity)


def test_nonattn_intensity_grows_with_batch(llama3_70b: LlmSpec) -> None:
    intensities = [nonattn_intensity(llama3_70b, b) for b in (1, 8, 64, 512)]
    assert intensities == sorted(intensities)
    # Weight reads dominate: roughly one flop per byte per request.
    assert intensities[0] == pytest.approx(1.0, rel=1e-3)


def test_attention_intensity_is_independent_of_batch(
    llama3_70b: LlmSpec,
    llama_65b: LlmSpec,
) -> None:
    # 2G / e flops per byte.
    assert attn_cost(llama3_70b, 1, 1024).intensity == 8.0
    assert attn_cost(llama3_70b, 256, 8192).intensity == 8.0
    assert attn_cost(llama_65b, 64, 4096).intensity == 1.0


def test_batch_attention_cost_sums_contexts(llama3_70b: LlmSpec) -> None:
    mixed = batch_attn_cost(llama3_70b, [1000, 3000])
    assert mixed == attn_cost(llama3_70b, 2, 2000)
    assert batch_attn_cost(llama3_70b, []).bytes == 0


def test_roofline_small_batch_is_bandwidth_bound(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
    peak: EfficiencyProfile,
) -> None:
    pool = DevicePool(h100, 1)
    cost = nonattn_cost(llama3_70b, 32)
    time = roofline_time(cost, pool, peak, "gemm")
    assert time.bound == Bound.bandwidth
    assert time.seconds == pytest.approx(cost.bytes / 3.35e12)
    assert mbu(cost.bytes, time.seconds, pool) == pytest.approx(1.0)
    assert mfu(cost.flops, time.seconds, pool) == pytest.approx(
        cost.flops / (cost.bytes / 3.35e12) / 989e12,
    )


def test_roofline_large_batch_is_compute_bound(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
    peak: EfficiencyProfile,
) -> None:
    pool = DevicePool(h100, 2)
    time = roofline_time(nonattn_cost(llama3_70b, 2048), pool, peak, "gemm")
    assert time.bound == Bound.compute
    assert time.seconds == pytest.approx(2 * 70e9 * 2048 / (2 * 989e12))


def test_efficiency_scales_time(llama3_70b: LlmSpec, h20: DeviceSpec) -> None:
    pool = DevicePool(h20, 4)
    cost = attn_cost(llama3_70b, 128, 4096)
    full = roofline_time(cost, pool, EfficiencyProfile(1.0, 1.0), "attention")
    derated = roofline_time(cost, pool, EfficiencyProfile(1.0, 0.5), "attention")
    assert derated.seconds == pytest.approx(2 * full.seconds)


def test_compute_bound_gemm_uses_its_own_fraction(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
) -> None:
    pool = DevicePool(h100, 2)
    cost = nonattn_cost(llama3_70b, 2048)
    time = roofline_time(cost, pool, EfficiencyProfile(1.0, 1.0, 0.5), "gemm")
    assert time.bound == Bound.compute
    assert mfu(cost.flops, time.seconds, pool) == pytest.approx(0.5)


def test_decode_gemms_stay_far_below_peak_flops(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
) -> None:
    pool = DevicePool(h100, 1)
    cost = nonattn_cost(llama3_70b, 64)
    time = roofline_time(cost, pool, EfficiencyProfile(), "gemm")
    assert time.bound == Bound.bandwidth
    assert mfu(cost.flops, time.seconds, pool) < 0.20


def test_attention_reaches_its_bandwidth_fraction(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
) -> None:
    pool = DevicePool(h100, 1)
    cost = attn_cost(llama3_70b, 20, 4096)
    time = roofline_time(cost, pool, EfficiencyProfile(attn_mbu=0.7), "attention")
    assert time.bound == Bound.bandwidth
    assert mbu(cost.bytes, time.seconds, pool) >= 0.70


def test_efficiency_fractions_are_validated() -> None:
    with pytest.raises(SpecValidationError):
        EfficiencyProfile(gemm_mfu=0.0)
    with pytest.raises(SpecValidationError):
        EfficiencyProfile(attn_mbu=1.5)


def test_ring_allreduce_time(h100: DeviceSpec, h20: DeviceSpec) -> None:
    assert allreduce_time(1e9, DevicePool(h100, 4), 8e-6) == pytest.approx(
        1.5 * 1e9 / 450e9 + 8e-6,
    )
    assert allreduce_time(1e9, DevicePool(h100, 1), 8e-6) == 0.0


def test_tensor_parallel_layer_time(llama3_70b: LlmSpec, h100: DeviceSpec) -> None:
    activations = 2 * 64 * 8192
    assert tp_layer_time(llama3_70b, 64, DevicePool(h100, 2), 0.0) == pytest.approx(
        2 * activations / 450e9,
    )
    assert tp_layer_time(llama3_70b, 64, DevicePool(h100, 1), 8e-6) == 0.0
    with pytest.raises(PreconditionError):
        tp_layer_time(llama3_70b, 0, DevicePool(h100, 2), 0.0)


def test_utilization_needs_positive_time(h100: DeviceSpec) -> None:
    with pytest.raises(PreconditionError):
        mfu(1e12, 0.0, DevicePool(h100, 1))


def test_utilization_above_one_warns(
    h100: DeviceSpec,
    caplog: pytest.LogCaptureFixture,
) -> None:
    assert mbu(10e12, 1.0, DevicePool(h100, 1)) > 1
    assert "exceeds 1" in caplog.text


def test_kv_bytes_per_token(llama3_70b: LlmSpec, llama_65b: LlmSpec) -> None:
    assert kv_bytes_per_token(llama3_70b) == 327_680
    assert kv_bytes_per_token(llama_65b) == 2_621_440


def test_kv_capacity_of_one_h100(llama3_70b: LlmSpec, h100: DeviceSpec) -> None:
    assert max_batch(h100.mem_bytes, 0, llama3_70b, 8192, headroom=0) == 29


def test_max_batch_after_weights(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
    h20: DeviceSpec,
) -> None:
    weights = llama3_70b.weight_bytes
    homogeneous = max_batch(4 * h100.mem_bytes, weights, llama3_70b, 8192, 0)
    disaggregated = max_batch(4 * h20.mem_bytes, 0, llama3_70b, 8192, 0)
    assert homogeneous == 67
    assert disaggregated == 143
    assert disaggregated / homogeneous == pytest.approx(2.13, abs=0.01)


def test_max_batch_rejects_oversized_weights(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
) -> None:
    with pytest.raises(CapacityError):
        max_batch(h100.mem_bytes, llama3_70b.weight_bytes, llama3_70b, 8192)


def test_max_batch_headroom(llama3_70b: LlmSpec, h20: DeviceSpec) -> None:
    assert max_batch(h20.mem_bytes, 0, llama3_70b, 8192, headroom=0.5) == math.floor(
        48e9 / (327_680 * 8192),
    )


def test_comm_volume(llama3_70b: LlmSpec, llama_65b: LlmSpec) -> None:
    volume = comm_volume(llama3_70b, 300)
    assert volume == 884_736_000
    assert isinstance(volume, int)
    # With G = 1 K and V are as large as Q and the output.
    assert comm_volume(llama_65b, 1) == 4 * 2 * 8192 * 80
    with pytest.raises(PreconditionError):
        comm_volume(llama3_70b, 0)


def test_layer_messages_add_up_to_comm_volume(llama3_70b: LlmSpec) -> None:
    messages = layer_messages(llama3_70b, 300)
    total = (messages.send_bytes + messages.out_bytes) * llama3_70b.layers
    assert total == comm_volume(llama3_70b, 300)
    assert messages.kv_bytes == messages.q_bytes // 4


def test_min_bandwidth_with_measured_times(llama3_70b: LlmSpec) -> None:
    timing = measured_timing(0.100, 0.050)
    assert timing.source == TimingSource.measured
    bandwidth = min_bandwidth(llama3_70b, 300, 8192, 0.2, timing)
    assert bandwidth / 1e9 == pytest.approx(29.49, abs=0.01)
    assert per_device_bandwidth(bandwidth, 4) == pytest.approx(bandwidth / 4)


def test_min_bandwidth_preconditions(llama3_70b: LlmSpec) -> None:
    with pytest.raises(PreconditionError):
        min_bandwidth(llama3_70b, 300, 8192, 0.0, measured_timing(0.1, 0.05))
    with pytest.raises(PreconditionError):
        min_bandwidth(llama3_70b, 300, 8192, 0.2, measured_timing(0.1, 0.0))


def test_min_bandwidth_does_not_grow_with_context(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
    h20: DeviceSpec,
) -> None:
    cluster = disaggregated_cluster(h100, 2, h20, 4, "FHBN")
    eff = EfficiencyProfile()
    needs = [
        min_bandwidth(
            llama3_70b,
            300,
            seq_len,
            0.2,
            estimate_timing(llama3_70b, cluster, [seq_len] * 300, eff),
        )
        for seq_len in (2048, 8192, 32768)
    ]
    assert needs == sorted(needs, reverse=True)


def test_estimate_timing_network_share(
    llama3_70b: LlmSpec,
    h100: DeviceSpec,
    h20: DeviceSpec,
    fhbn: NetPreset,
) -> None:
    eff = EfficiencyProfile()
    contexts = [4096] * 64
    split = estimate_timing(
        llama3_70b,
        disaggregated_cluster(h100, 2, h20, 4, "FHBN"),
        contexts,
        eff,
        fhbn,
    )
    assert split.t_net > 0
    assert split.source == TimingSource.roofline
    assert split.bound_attn == Bound.bandwidth
    assert split.total == pytest.approx(split.t_model + split.t_attn + split.t_net)
    whole = estimate_timing(
        llama3_70b, homogeneous_cluster(h100, 4, "FHBN"), contexts, eff, fhbn
    )
    assert whole.t_net == 0
    assert 0 < attn_time_fraction(whole) < 1


def test_network_links(h100: DeviceSpec, h20: DeviceSpec, fhbn: NetPreset) -> None:
    link, links = network_links(disaggregated_cluster(h100, 2, h20, 4, "FHBN"), fhbn)
    assert links == 2
    # 400 Gb/s NICs carry 50 GB/s, above the preset.
    assert link == fhbn
    slow = NetPreset("fast", 1e-6, 100e9)
    capped, _ = network_links(disaggregated_cluster(h100, 2, h20, 4, "fast"), slow)
    assert capped.achievable_bw == 50e9


def test_kv_projection_share(llama3_70b: LlmSpec, llama_65b: LlmSpec) -> None:
    assert kv_projection_share(llama3_70b) == pytest.approx(
        2 * 8192 * 1024 / (70e9 / 80),
    )
    assert kv_projection_share(llama_65b) > 8 * kv_projection_share(llama3_70b)


def test_memory_cost_efficiency(h100: DeviceSpec, h20: DeviceSpec) -> None:
    bought = memory_cost_efficiency(h100)
    assert bought["basis"] == "purchase"
    assert bought["usd_per_gb"] == pytest.approx(36500 / 80)
    rented = memory_cost_efficiency(h20)
    assert rented["basis"] == "hourly"
    assert rented["usd_per_gbps"] == pytest.approx(4.63 / 4000)
