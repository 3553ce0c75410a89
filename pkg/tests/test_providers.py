import time

import pytest

from qexec import Circuit, NoiseSpec, ProviderConfig, VirtualProvider
from qexec.errors import (
    BackendOfflineError,
    CircuitError,
    DuplicateProviderError,
    JobFailedError,
    JobNotReadyError,
    ProviderConfigError,
    UnknownBackendError,
    UnknownJobError,
)
from qexec.providers import JobHandle, JobState


def wait_terminal(registry, handle, timeout=5.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = registry.status(handle)
        if status.state.terminal:
            return status
        time.sleep(0.005)
    pytest.fail("job did not reach a terminal state")


# --------------------------------------------------------------------------
# register_provider
# --------------------------------------------------------------------------


def test_register_builtin_discoverable():
    registry = VirtualProvider()
    provider_id = registry.register_provider(ProviderConfig("local_ideal", "local_ideal"))
    assert provider_id == "local_ideal"
    listing = registry.get_backends()
    assert [d.backend_name for d in listing["local_ideal"]] == ["statevector"]


def test_register_duplicate_rejected():
    registry = VirtualProvider()
    registry.register_provider(ProviderConfig("local_ideal", "local_ideal"))
    with pytest.raises(DuplicateProviderError):
        registry.register_provider(ProviderConfig("local_ideal", "local_ideal"))


def test_register_remote_requires_endpoint():
    with pytest.raises(ProviderConfigError, match="endpoint"):
        VirtualProvider().register_provider(ProviderConfig("r1", "remote_http"))


def test_register_noisy_requires_noise():
    with pytest.raises(ProviderConfigError, match="noise"):
        VirtualProvider().register_provider(ProviderConfig("n1", "local_noisy"))


def test_register_unknown_kind():
    with pytest.raises(ProviderConfigError, match="unknown provider kind"):
        VirtualProvider().register_provider(ProviderConfig("x", "quantum_cloud"))


def test_provider_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ProviderConfigError, match="unknown keys"):
        ProviderConfig.from_dict("p", {"kind": "local_ideal", "color": "red"})


# --------------------------------------------------------------------------
# get_backends
# --------------------------------------------------------------------------


def test_get_backends_builtins_always_online(local_registry):
    listing = local_registry.get_backends(online_only=True)
    assert {p: [d.backend_name for d in ds] for p, ds in listing.items()} == {
        "local_ideal": ["statevector"],
        "local_noisy": ["noisy_statevector"],
    }
    assert listing["local_ideal"][0].is_ideal_simulator
    assert not listing["local_noisy"][0].is_ideal_simulator


def test_get_backends_offline_mock_filtered():
    registry = VirtualProvider()
    registry.register_provider(ProviderConfig("local_ideal", "local_ideal"))
    registry.register_provider(ProviderConfig("mock", "mock_delay", delay=0.1, online=False))
    online = registry.get_backends(online_only=True)
    assert "mock" not in online
    everything = registry.get_backends(online_only=False)
    assert everything["mock"][0].online is False


def test_get_backends_empty_registry():
    assert VirtualProvider().get_backends() == {}


def test_get_backends_deterministic(local_registry):
    assert local_registry.get_backends() == local_registry.get_backends()


# --------------------------------------------------------------------------
# submit / status / result
# --------------------------------------------------------------------------


def test_submit_returns_live_handle(local_registry, bell):
    handle = local_registry.submit("local_ideal", "statevector", bell, 1024, {"seed": 1})
    assert isinstance(handle, JobHandle)
    assert handle.provider_id == "local_ideal"
    status = local_registry.status(handle)
    assert status.state in (JobState.QUEUED, JobState.RUNNING, JobState.DONE)


def test_submit_circuit_too_wide(local_registry):
    with pytest.raises(CircuitError, match="exceeds"):
        local_registry.submit("local_ideal", "statevector", Circuit(width=25), 10)


def test_submit_unknown_provider(local_registry, bell):
    with pytest.raises(UnknownBackendError):
        local_registry.submit("nope", "statevector", bell, 10)


def test_submit_offline_backend_rejected(bell):
    registry = VirtualProvider()
    registry.register_provider(ProviderConfig("mock", "mock_delay", delay=0.1, online=False))
    with pytest.raises(BackendOfflineError):
        registry.submit("mock", "delayed_statevector", bell, 10)


def test_submit_zero_shots(local_registry, bell):
    with pytest.raises(ValueError, match="shots"):
        local_registry.submit("local_ideal", "statevector", bell, 0)


def test_local_job_completes(local_registry, bell):
    handle = local_registry.submit("local_ideal", "statevector", bell, 1024, {"seed": 3})
    status = wait_terminal(local_registry, handle)
    assert status.state is JobState.DONE
    counts = local_registry.result(handle)
    assert sum(counts.values()) == 1024
    assert set(counts) <= {"00", "11"}


def test_mock_delay_polled_immediately(bell):
    registry = VirtualProvider()
    registry.register_provider(ProviderConfig("mock", "mock_delay", delay=0.5))
    handle = registry.submit("mock", "delayed_statevector", bell, 16)
    assert registry.status(handle).state in (JobState.QUEUED, JobState.RUNNING)
    with pytest.raises(JobNotReadyError):
        registry.result(handle)
    assert wait_terminal(registry, handle).state is JobState.DONE


def test_foreign_handle_rejected(local_registry):
    foreign = JobHandle("job-999999", "local_ideal", "statevector", time.time())
    with pytest.raises(UnknownJobError):
        local_registry.status(foreign)


def test_failed_job_carries_message(local_registry):
    # Valid-width but internally inconsistent circuit: passes submission
    # checks, fails in the kernel, surfaces as FAILED with the reason.
    from qexec import Gate, GateOp

    bad = Circuit(width=2, gates=(GateOp(Gate.H, (7,)),), name="oob")
    handle = local_registry.submit("local_ideal", "statevector", bad, 10)
    status = wait_terminal(local_registry, handle)
    assert status.state is JobState.FAILED
    assert "out of range" in (status.error_message or "")
    with pytest.raises(JobFailedError, match="out of range"):
        local_registry.result(handle)


def test_status_monotonic_sequence(bell):
    registry = VirtualProvider()
    registry.register_provider(ProviderConfig("mock", "mock_delay", delay=0.15))
    handle = registry.submit("mock", "delayed_statevector", bell, 8)
    rank = {JobState.QUEUED: 0, JobState.RUNNING: 1, JobState.DONE: 2, JobState.FAILED: 2}
    observed = []
    deadline = time.time() + 3
    while time.time() < deadline:
        observed.append(registry.status(handle).state)
        if observed[-1].terminal:
            break
        time.sleep(0.01)
    ranks = [rank[s] for s in observed]
    assert ranks == sorted(ranks)
    assert observed[-1] is JobState.DONE


def test_submission_isolation_distinct_ids(local_registry, bell):
    handles = [
        local_registry.submit("local_ideal", "statevector", bell, 4, {"seed": i})
        for i in range(10)
    ]
    assert len({h.job_id for h in handles}) == 10


def test_noisy_backend_executes_with_noise(local_registry, bell):
    handle = local_registry.submit("local_noisy", "noisy_statevector", bell, 4096, {"seed": 7})
    wait_terminal(local_registry, handle)
    counts = local_registry.result(handle)
    assert sum(counts.values()) == 4096


# --------------------------------------------------------------------------
# remote discovery degradation
# --------------------------------------------------------------------------


def test_remote_discovery_failure_degrades_to_absent():
    registry = VirtualProvider()
    registry.register_provider(
        ProviderConfig("dead", "remote_http", endpoint="http://127.0.0.1:1")
    )
    # Never discovered: provider contributes nothing rather than raising.
    assert registry.get_backends() == {}
    assert registry.get_backends(online_only=True) == {}


def test_remote_discovery_failure_marks_known_backends_offline(remote_server, bell):
    registry = VirtualProvider()
    registry.register_provider(
        ProviderConfig("remote", "remote_http", endpoint=remote_server.endpoint)
    )
    online = registry.get_backends(online_only=True)
    assert [d.backend_name for d in online["remote"]] == ["noisy_statevector", "statevector"]
    remote_server.stop()
    after = registry.get_backends()
    assert all(not d.online for d in after["remote"])
    assert registry.get_backends(online_only=True) == {}
