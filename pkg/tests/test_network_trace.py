from pathlib import Path

import pytest

from disagg_planner.catalog import Catalog
from disagg_planner.errors import PreconditionError, SchemaError, SpecValidationError
from disagg_planner.sim.network import NetPreset, capped_preset, xfer_time
from disagg_planner.sim.trace import (
    TraceProfile,
    constant_trace,
    gen_trace,
    read_trace,
    trace_summary,
    write_trace,
)


@pytest.mark.parametrize(
    ("name", "round_trip"),
    [("FHBN", 33.0e-6), ("NCCL-GDR", 66.6e-6)],
)
def test_round_trip_of_small_messages(
    catalog: Catalog,
    name: str,
    round_trip: float,
) -> None:
    preset = catalog.network(name)
    assert 2 * xfer_time(0, preset) == pytest.approx(round_trip, abs=1e-12)
    assert preset.round_trip == pytest.approx(round_trip, abs=1e-12)


@pytest.mark.parametrize(
    ("name", "bandwidth"),
    [("FHBN", 45.7e9), ("NCCL-GDR", 35.5e9)],
)
def test_large_message_bandwidth(catalog: Catalog, name: str, bandwidth: float) -> None:
    preset = catalog.network(name)
    incremental = 1e9 / (xfer_time(2e9, preset) - xfer_time(1e9, preset))
    assert incremental == pytest.approx(bandwidth, rel=1e-3)


def test_effective_bandwidth_of_one_gigabyte(fhbn: NetPreset) -> None:
    assert 1e9 / xfer_time(1e9, fhbn) == pytest.approx(45.7e9, rel=1e-3)


def test_parallel_links_split_payload(fhbn: NetPreset) -> None:
    one = xfer_time(1e9, fhbn) - fhbn.base_latency
    four = xfer_time(1e9, fhbn, links=4) - fhbn.base_latency
    assert four == pytest.approx(one / 4)
    with pytest.raises(PreconditionError):
        xfer_time(1.0, fhbn, links=0)
    with pytest.raises(PreconditionError):
        xfer_time(-1.0, fhbn)


def test_ideal_network_is_free(ideal: NetPreset) -> None:
    assert xfer_time(1e12, ideal) == 0.0
    assert capped_preset(ideal, 1e9) == ideal


def test_capped_preset(fhbn: NetPreset) -> None:
    assert capped_preset(fhbn, 25e9).achievable_bw == 25e9
    assert capped_preset(fhbn, 100e9) == fhbn


def test_preset_validation() -> None:
    with pytest.raises(SpecValidationError):
        NetPreset("broken", -1.0, 1e9)
    with pytest.raises(SpecValidationError):
        NetPreset("broken", 0.0, 0.0)


def test_gen_trace_is_deterministic(catalog: Catalog) -> None:
    profile = catalog.trace_profile("Azure-Conv").with_overrides(n_requests=500, seed=3)
    assert gen_trace(profile) == gen_trace(profile)
    assert gen_trace(profile) != gen_trace(profile.with_overrides(seed=4))


def test_gen_trace_matches_profile_means(catalog: Catalog) -> None:
    profile = catalog.trace_profile("Azure-Conv").with_overrides(
        n_requests=20000,
        arrival_rate=50.0,
        seed=11,
    )
    records = gen_trace(profile)
    summary = trace_summary(records)
    assert summary["n_requests"] == 20000
    assert summary["mean_prompt"] == pytest.approx(1154.7, rel=0.03)
    assert summary["mean_output"] == pytest.approx(211.1, rel=0.03)
    assert len(records) / records[-1].arrival_s == pytest.approx(50.0, rel=0.03)
    arrivals = [r.arrival_s for r in records]
    assert arrivals == sorted(arrivals)
    assert min(r.prompt_tokens for r in records) >= 1


def test_trace_profile_validation() -> None:
    with pytest.raises(SpecValidationError):
        TraceProfile("empty", 0, 100.0, 10.0, 1.0)
    with pytest.raises(SpecValidationError):
        TraceProfile("bad", 10, 100.0, 10.0, 1.0, sigma=-0.1)


def test_trace_csv_keeps_records(tmp_path: Path, catalog: Catalog) -> None:
    records = gen_trace(
        catalog.trace_profile("Kimi-TA").with_overrides(n_requests=50, seed=1),
    )
    path = tmp_path / "trace.csv"
    write_trace(records, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == (
        "request_id,arrival_s,prompt_tokens,output_tokens"
    )
    assert read_trace(path) == records


def test_trace_csv_header_is_checked(tmp_path: Path) -> None:
    path = tmp_path / "trace.csv"
    path.write_text("id,arrival,prompt,output\nr,0,1,1\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        read_trace(path)


def test_constant_trace() -> None:
    records = constant_trace(3, 100, 10, interval_s=0.5)
    assert [r.arrival_s for r in records] == [0.0, 0.5, 1.0]
    assert {r.final_tokens for r in records} == {110}
    assert trace_summary(()) == {
        "n_requests": 0,
        "mean_prompt": 0.0,
        "mean_output": 0.0,
    }
