import pytest

from uvmsim import MIB, MachineConfig


@pytest.fixture
def small_machine():
    """Desk-scale machine: 64 MiB GPU, 1 GiB CPU, no driver baseline."""
    return MachineConfig(cpu_capacity=1024 * MIB, gpu_capacity=64 * MIB,
                         gpu_reserved_baseline=0)


@pytest.fixture
def machine_4k():
    return MachineConfig(cpu_capacity=1024 * MIB, gpu_capacity=64 * MIB,
                         gpu_reserved_baseline=0, system_page_size=4096)
