import json
import logging
from pathlib import Path
from typing import Any

import pytest

from disagg_planner.catalog import Catalog, get_catalog, load_catalog
from disagg_planner.errors import CatalogLookupError, SchemaError, SpecValidationError
from disagg_planner.specs import (
    ClusterConfig,
    DevicePool,
    DeviceSpec,
    TraceRecord,
    WorkloadPoint,
    disaggregated_cluster,
    homogeneous_cluster,
    load_cluster_config,
    load_device_spec,
    load_llm_spec,
)

LLAMA3_70B = {
    "name": "LLaMA3-70B",
    "n_params": 70e9,
    "hidden_dim": 8192,
    "layers": 80,
    "gqa_group": 8,
    "bytes_per_elem": 2,
    "weight_bytes": 137.5e9,
}


def test_model_document_defaults_num_heads(caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.WARNING, logger="disagg_planner.specs"):
        spec = load_llm_spec(LLAMA3_70B)
    (record,) = [r for r in caplog.records if "num_heads not given" in r.getMessage()]
    assert record.levelno == logging.WARNING
    assert spec.n_params == 70_000_000_000
    assert spec.num_heads == 64
    assert spec.num_heads_assumed
    assert spec.kv_heads == 8
    assert spec.head_dim == 128
    assert spec.kv_dim == 1024


def test_model_document_with_num_heads() -> None:
    spec = load_llm_spec(LLAMA3_70B | {"num_heads": 32})
    assert spec.num_heads == 32
    assert not spec.num_heads_assumed
    assert spec.head_dim == 256


@pytest.mark.parametrize(
    "document",
    [
        {k: v for k, v in LLAMA3_70B.items() if k != "layers"},
        LLAMA3_70B | {"experts": 8},
        LLAMA3_70B | {"layers": "eighty"},
        LLAMA3_70B | {"layers": True},
    ],
)
def test_model_document_schema(document: dict[str, object]) -> None:
    with pytest.raises(SchemaError):
        load_llm_spec(document)


@pytest.mark.parametrize(
    ("changes", "field"),
    [
        ({"bytes_per_elem": 3}, "bytes_per_elem"),
        ({"gqa_group": 0}, "gqa_group"),
        ({"hidden_dim": 0, "num_heads": 64}, "hidden_dim"),
        ({"weight_bytes": 200e9}, "weight_bytes"),
        ({"num_heads": 60}, "num_heads"),
        ({"num_heads": 64, "gqa_group": 7}, "gqa_group"),
    ],
)
def test_model_invariants(changes: dict[str, object], field: str) -> None:
    with pytest.raises(SpecValidationError) as error:
        load_llm_spec(LLAMA3_70B | changes)
    assert error.value.field == field


def test_device_rejects_non_positive_values(h100: DeviceSpec) -> None:
    document = h100.to_document() | {"mem_bw": 0}
    with pytest.raises(SpecValidationError):
        DeviceSpec(**document)


def test_cluster_cost_and_label(h100: DeviceSpec, h20: DeviceSpec) -> None:
    cluster = disaggregated_cluster(h100, 2, h20, 4, "FHBN")
    assert (cluster.a, cluster.b) == (2, 4)
    assert cluster.cost_per_hour == pytest.approx(40.64)
    assert cluster.label == "DOP(2,4) H100+H20"
    assert cluster.attention_pool.device.name == "H20"

    baseline = homogeneous_cluster(h100, 4, "FHBN")
    assert baseline.cost_per_hour == pytest.approx(44.24)
    assert baseline.label == "4xH100"
    assert baseline.b == 0
    assert baseline.attention_pool == baseline.compute_pool


def test_cluster_mode_rules(h100: DeviceSpec, h20: DeviceSpec) -> None:
    with pytest.raises(SpecValidationError):
        ClusterConfig(
            compute_devices=(DevicePool(h100, 2),),
            memory_devices=(),
            network="FHBN",
            mode="disaggregated",
        )
    with pytest.raises(SpecValidationError):
        ClusterConfig(
            compute_devices=(DevicePool(h100, 2),),
            memory_devices=(DevicePool(h20, 1),),
            network="FHBN",
            mode="homogeneous-TP",
        )


def test_cluster_rejects_mixed_pools(h100: DeviceSpec, h20: DeviceSpec) -> None:
    with pytest.raises(SpecValidationError):
        ClusterConfig(
            compute_devices=(DevicePool(h100, 1), DevicePool(h20, 1)),
            memory_devices=(DevicePool(h20, 1),),
            network="FHBN",
            mode="disaggregated",
        )


def test_cluster_document(catalog: Catalog) -> None:
    cluster = load_cluster_config(
        {
            "compute_devices": [{"device": "h100", "count": 2}],
            "memory_devices": [{"device": "H20", "count": 4}],
            "network": "FHBN",
            "mode": "disaggregated",
        },
        catalog,
    )
    assert cluster.label == "DOP(2,4) H100+H20"
    with pytest.raises(SchemaError):
        load_cluster_config(
            {"compute_devices": [{"device": "H100", "count": 2}], "mode": "tp"},
            catalog,
        )


def test_trace_record_invariants() -> None:
    record = TraceRecord("r", 0.5, 100, 10)
    assert record.final_tokens == 110
    with pytest.raises(SpecValidationError):
        TraceRecord("r", 0.5, 0, 10)
    with pytest.raises(SpecValidationError):
        TraceRecord("r", -1.0, 10, 10)


def through_json(document: dict[str, Any]) -> Any:  # noqa: ANN401
    return json.loads(json.dumps(document))


def test_bundled_models_state_their_heads(catalog: Catalog) -> None:
    assert not any(m.num_heads_assumed for m in catalog.models.values())
    assert catalog.model("LLaMA-33B").head_dim == 128


@pytest.mark.parametrize("name", ["LLaMA-33B", "LLaMA-65B", "LLaMA3-70B"])
def test_model_document_round_trip(catalog: Catalog, name: str) -> None:
    spec = catalog.model(name)
    assert load_llm_spec(through_json(spec.to_document())) == spec


@pytest.mark.parametrize("name", ["H100", "H20", "TPU-v6e"])
def test_device_document_round_trip(catalog: Catalog, name: str) -> None:
    spec = catalog.device(name)
    assert load_device_spec(through_json(spec.to_document())) == spec


def test_cluster_document_round_trip(
    catalog: Catalog,
    h100: DeviceSpec,
    h20: DeviceSpec,
) -> None:
    for cluster in (
        disaggregated_cluster(h100, 2, h20, 4, "FHBN"),
        homogeneous_cluster(h100, 4, "NCCL-GDR"),
    ):
        document = through_json(cluster.to_document())
        assert load_cluster_config(document, catalog) == cluster


def test_workload_point_invariants() -> None:
    point = WorkloadPoint(batch=300, seq_len=8192)
    assert (point.batch, point.seq_len) == (300, 8192)
    with pytest.raises(SpecValidationError):
        WorkloadPoint(batch=0, seq_len=8192)
    with pytest.raises(SpecValidationError):
        WorkloadPoint(batch=1, seq_len=0)


def test_catalog_lookup_is_case_insensitive(catalog: Catalog) -> None:
    assert catalog.model("llama3-70b").name == "LLaMA3-70B"
    assert catalog.device("h20").price_note
    assert catalog.lookup("TPU-V6E").power_w is None
    assert catalog.trace_profile("azure-conv").n_requests == 19366


def test_catalog_lookup_suggests(catalog: Catalog) -> None:
    with pytest.raises(CatalogLookupError, match="did you mean"):
        catalog.device("H10")


def test_user_catalog_replaces_entries(tmp_path: Path, h100: DeviceSpec) -> None:
    path = tmp_path / "catalog.json"
    cheaper = h100.to_document() | {"price_per_hour": 5.0}
    path.write_text(json.dumps({"devices": [cheaper]}), encoding="utf-8")
    merged = get_catalog(path)
    assert merged.device("H100").price_per_hour == 5.0
    assert merged.device("H20").price_per_hour == 4.63
    assert merged.network("ideal").base_latency == 0.0


def test_catalog_sections_must_be_lists() -> None:
    with pytest.raises(SchemaError):
        load_catalog({"devices": {}})
