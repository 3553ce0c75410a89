import pytest

from qexec import NoiseSpec, ProviderConfig, QuantumExecutor, VirtualProvider, parse_qasm
from qexec.server import RemoteServer, ServerConfig

BELL_QASM = """\
OPENQASM 2.0;
include "qelib1.inc";
qreg q[2];
creg c[2];
h q[0];
cx q[0],q[1];
measure q -> c;
"""

GHZ3_QASM = """\
OPENQASM 2.0;
qreg q[3];
creg c[3];
h q[0];
cx q[0],q[1];
cx q[0],q[2];
measure q -> c;
"""


@pytest.fixture
def bell():
    return parse_qasm(BELL_QASM, name="bell")


@pytest.fixture
def ghz3():
    return parse_qasm(GHZ3_QASM, name="ghz3")


def local_provider_configs(p_noise: float = 0.05) -> list[ProviderConfig]:
    return [
        ProviderConfig(provider_id="local_ideal", kind="local_ideal"),
        ProviderConfig(provider_id="local_noisy", kind="local_noisy", noise=NoiseSpec(p_noise)),
    ]


@pytest.fixture
def local_registry():
    registry = VirtualProvider()
    for config in local_provider_configs():
        registry.register_provider(config)
    return registry


@pytest.fixture
def local_executor():
    return QuantumExecutor(providers=local_provider_configs())


@pytest.fixture
def remote_server():
    server = RemoteServer(ServerConfig()).start()
    yield server
    server.stop()


@pytest.fixture
def delayed_server():
    server = RemoteServer(ServerConfig(delay=0.5)).start()
    yield server
    server.stop()
