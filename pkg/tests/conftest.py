import pytest

from disagg_planner.catalog import Catalog, builtin_catalog
from disagg_planner.perf_model import EfficiencyProfile
from disagg_planner.sim.network import NetPreset
from disagg_planner.specs import DeviceSpec, LlmSpec


@pytest.fixture
def catalog() -> Catalog:
    return builtin_catalog()


@pytest.fixture
def llama3_70b(catalog: Catalog) -> LlmSpec:
    return catalog.model("LLaMA3-70B")


@pytest.fixture
def llama_65b(catalog: Catalog) -> LlmSpec:
    return catalog.model("LLaMA-65B")


@pytest.fixture
def llama_33b(catalog: Catalog) -> LlmSpec:
    return catalog.model("LLaMA-33B")


@pytest.fixture
def h100(catalog: Catalog) -> DeviceSpec:
    return catalog.device("H100")


@pytest.fixture
def h20(catalog: Catalog) -> DeviceSpec:
    return catalog.device("H20")


@pytest.fixture
def fhbn(catalog: Catalog) -> NetPreset:
    return catalog.network("FHBN")


@pytest.fixture
def ideal(catalog: Catalog) -> NetPreset:
    return catalog.network("ideal")


@pytest.fixture
def peak() -> EfficiencyProfile:
    """Every operator reaching the device peak."""
    return EfficiencyProfile(gemm_eff=1.0, attn_mbu=1.0, gemm_mfu=1.0)
