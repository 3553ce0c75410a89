"""Virtual provider: one registry over heterogeneous execution backends.

Backend discovery, credential/config handling, and job submission live
behind a single API so the executor never touches provider-specific quirks.
Four provider kinds ship built-in:

* ``local_ideal``   - in-process ideal statevector simulator
* ``local_noisy``   - in-process trajectory-noise simulator
* ``mock_delay``    - completes jobs after a configured delay (async testing)
* ``remote_http``   - client for the qexec remote job service wire protocol

Submission is non-blocking for every kind: jobs enter QUEUED immediately and
progress QUEUED -> RUNNING -> DONE/FAILED, observable through status().
The registry is shared state, safe for concurrent submit/status/result.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

import requests

from .circuit import Circuit, serialize_qasm
from .errors import (
    BackendOfflineError,
    CircuitError,
    DuplicateProviderError,
    JobFailedError,
    JobNotReadyError,
    ProviderConfigError,
    ProviderError,
    UnknownBackendError,
    UnknownJobError,
)
from .simulator import MAX_WIDTH_DEFAULT, NoiseSpec, sample, sample_noisy

__all__ = [
    "JobState",
    "JobStatus",
    "JobHandle",
    "BackendDescriptor",
    "ProviderConfig",
    "VirtualProvider",
]

logger = logging.getLogger(__name__)

_JOB_COUNTER = itertools.count(1)  # never reused within the process


class JobState(str, Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    DONE = "DONE"
    FAILED = "FAILED"

    @property
    def terminal(self) -> bool:
        return self in (JobState.DONE, JobState.FAILED)


_STATE_RANK = {JobState.QUEUED: 0, JobState.RUNNING: 1, JobState.DONE: 2, JobState.FAILED: 2}


@dataclass(frozen=True)
class JobStatus:
    state: JobState
    error_message: str | None = None


@dataclass(frozen=True)
class JobHandle:
    job_id: str
    provider_id: str
    backend_name: str
    submitted_at: float


@dataclass(frozen=True)
class BackendDescriptor:
    provider_id: str
    backend_name: str
    online: bool
    max_qubits: int
    is_ideal_simulator: bool
    queue_latency_hint: float | None = None


@dataclass(frozen=True)
class ProviderConfig:
    """Declarative provider configuration, ingestible from the providers file."""

    provider_id: str
    kind: str
    credentials: dict[str, str] = field(default_factory=dict)
    endpoint: str | None = None
    noise: NoiseSpec | None = None
    delay: float | None = None
    max_qubits: int = MAX_WIDTH_DEFAULT
    online: bool = True

    @classmethod
    def from_dict(cls, provider_id: str, data: Mapping[str, Any]) -> "ProviderConfig":
        known = {"kind", "endpoint", "api_key", "noise", "delay", "max_qubits", "online"}
        unknown = set(data) - known
        if unknown:
            raise ProviderConfigError(
                f"provider {provider_id!r}: unknown keys {sorted(unknown)}"
            )
        noise = data.get("noise")
        if isinstance(noise, Mapping):
            noise = NoiseSpec(float(noise.get("p_depolarizing", 0.0)))
        elif noise is not None:
            noise = NoiseSpec(float(noise))
        credentials = {}
        if "api_key" in data:
            credentials["api_key"] = str(data["api_key"])
        return cls(
            provider_id=provider_id,
            kind=str(data.get("kind", "")),
            credentials=credentials,
            endpoint=data.get("endpoint"),
            noise=noise,
            delay=float(data["delay"]) if "delay" in data else None,
            max_qubits=int(data.get("max_qubits", MAX_WIDTH_DEFAULT)),
            online=bool(data.get("online", True)),
        )


# --------------------------------------------------------------------------
# Shared in-memory job table (local adapter kinds)
# --------------------------------------------------------------------------


class _JobRecord:
    __slots__ = ("state", "counts", "error")

    def __init__(self):
        self.state = JobState.QUEUED
        self.counts: dict[str, int] | None = None
        self.error: str | None = None


class _JobTable:
    """Thread-safe job store enforcing monotone state transitions."""

    def __init__(self):
        self._jobs: dict[str, _JobRecord] = {}
        self._lock = threading.Lock()

    def create(self, job_id: str) -> None:
        with self._lock:
            self._jobs[job_id] = _JobRecord()

    def _transition(self, job_id: str, state: JobState) -> _JobRecord:
        record = self._jobs[job_id]
        if _STATE_RANK[state] < _STATE_RANK[record.state] or record.state.terminal:
            raise RuntimeError(f"illegal transition {record.state} -> {state}")
        record.state = state
        return record

    def set_running(self, job_id: str) -> None:
        with self._lock:
            self._transition(job_id, JobState.RUNNING)

    def set_done(self, job_id: str, counts: dict[str, int]) -> None:
        with self._lock:
            self._transition(job_id, JobState.DONE).counts = counts

    def set_failed(self, job_id: str, message: str) -> None:
        with self._lock:
            self._transition(job_id, JobState.FAILED).error = message

    def status(self, job_id: str) -> JobStatus:
        with self._lock:
            record = self._jobs[job_id]
            return JobStatus(record.state, record.error)

    def result(self, job_id: str) -> dict[str, int]:
        with self._lock:
            record = self._jobs[job_id]
            if record.state is JobState.FAILED:
                raise JobFailedError(record.error or "job failed")
            if record.state is not JobState.DONE:
                raise JobNotReadyError(f"job is {record.state.value}")
            assert record.counts is not None
            return dict(record.counts)


# --------------------------------------------------------------------------
# Adapters
# --------------------------------------------------------------------------


class LocalSimulatorAdapter:
    """In-process simulator provider; one worker so jobs run in submission order."""

    def __init__(self, config: ProviderConfig):
        self.provider_id = config.provider_id
        self._noise = config.noise
        self._max_qubits = config.max_qubits
        self._online = config.online
        self._backend_name = "noisy_statevector" if config.kind == "local_noisy" else "statevector"
        self._is_ideal = config.kind == "local_ideal"
        self._table = _JobTable()
        self._pool = ThreadPoolExecutor(
            max_workers=1, thread_name_prefix=f"{self.provider_id}-worker"
        )

    def backends(self) -> list[BackendDescriptor]:
        return [
            BackendDescriptor(
                provider_id=self.provider_id,
                backend_name=self._backend_name,
                online=self._online,
                max_qubits=self._max_qubits,
                is_ideal_simulator=self._is_ideal,
                queue_latency_hint=0.0,
            )
        ]

    def submit(
        self, backend_name: str, circuit: Circuit, shots: int, options: Mapping[str, Any]
    ) -> str:
        job_id = f"{self.provider_id}-{next(_JOB_COUNTER)}"
        self._table.create(job_id)
        seed = int(options.get("seed", 0))
        self._pool.submit(self._execute, job_id, circuit, shots, seed)
        return job_id

    def _execute(self, job_id: str, circuit: Circuit, shots: int, seed: int) -> None:
        self._table.set_running(job_id)
        try:
            if self._noise is not None:
                counts = sample_noisy(circuit, shots, self._noise, seed, self._max_qubits)
            else:
                counts = sample(circuit, shots, seed, self._max_qubits)
            self._table.set_done(job_id, counts)
        except Exception as exc:
            self._table.set_failed(job_id, str(exc))

    def status(self, job_id: str) -> JobStatus:
        return self._table.status(job_id)

    def result(self, job_id: str) -> dict[str, int]:
        return self._table.result(job_id)


class MockDelayAdapter:
    """Completes jobs a fixed delay after submission, on independent timers.

    Exists to exercise asynchronous paths: in-flight jobs stay observable in
    QUEUED/RUNNING, and N concurrent jobs finish in ~one delay, not N.
    """

    backend_name = "delayed_statevector"

    def __init__(self, config: ProviderConfig):
        self.provider_id = config.provider_id
        self._delay = config.delay if config.delay is not None else 0.0
        self._max_qubits = config.max_qubits
        self._online = config.online
        self._table = _JobTable()

    def backends(self) -> list[BackendDescriptor]:
        return [
            BackendDescriptor(
                provider_id=self.provider_id,
                backend_name=self.backend_name,
                online=self._online,
                max_qubits=self._max_qubits,
                is_ideal_simulator=False,
                queue_latency_hint=self._delay,
            )
        ]

    def submit(
        self, backend_name: str, circuit: Circuit, shots: int, options: Mapping[str, Any]
    ) -> str:
        job_id = f"{self.provider_id}-{next(_JOB_COUNTER)}"
        self._table.create(job_id)
        seed = int(options.get("seed", 0))
        timer = threading.Timer(self._delay, self._complete, args=(job_id, circuit, shots, seed))
        timer.daemon = True
        timer.start()
        return job_id

    def _complete(self, job_id: str, circuit: Circuit, shots: int, seed: int) -> None:
        self._table.set_running(job_id)
        try:
            self._table.set_done(job_id, sample(circuit, shots, seed, self._max_qubits))
        except Exception as exc:
            self._table.set_failed(job_id, str(exc))

    def status(self, job_id: str) -> JobStatus:
        return self._table.status(job_id)

    def result(self, job_id: str) -> dict[str, int]:
        return self._table.result(job_id)


class RemoteHttpAdapter:
    """Client for the qexec remote job service wire protocol."""

    def __init__(self, config: ProviderConfig, timeout: float = 10.0):
        self.provider_id = config.provider_id
        self._endpoint = (config.endpoint or "").rstrip("/")
        self._timeout = timeout
        self._session = requests.Session()
        api_key = config.credentials.get("api_key")
        if api_key:
            self._session.headers["X-API-Key"] = api_key
        self._lock = threading.Lock()
        self._last_known: list[BackendDescriptor] = []

    def backends(self) -> list[BackendDescriptor]:
        try:
            response = self._session.get(f"{self._endpoint}/backends", timeout=self._timeout)
            response.raise_for_status()
            listing = response.json()
        except Exception as exc:
            # Discovery failure degrades to offline instead of raising, so one
            # dead provider cannot break an all-backends sweep.
            logger.debug("discovery failed for %s: %s", self.provider_id, exc)
            with self._lock:
                return [
                    BackendDescriptor(
                        provider_id=d.provider_id,
                        backend_name=d.backend_name,
                        online=False,
                        max_qubits=d.max_qubits,
                        is_ideal_simulator=d.is_ideal_simulator,
                        queue_latency_hint=d.queue_latency_hint,
                    )
                    for d in self._last_known
                ]
        descriptors = [
            BackendDescriptor(
                provider_id=self.provider_id,
                backend_name=entry["name"],
                online=bool(entry.get("online", True)),
                max_qubits=int(entry.get("max_qubits", MAX_WIDTH_DEFAULT)),
                is_ideal_simulator=bool(entry.get("is_ideal_simulator", False)),
                queue_latency_hint=None,
            )
            for entry in listing
        ]
        with self._lock:
            self._last_known = descriptors
        return descriptors

    def submit(
        self, backend_name: str, circuit: Circuit, shots: int, options: Mapping[str, Any]
    ) -> str:
        body = {
            "backend": backend_name,
            "qasm": serialize_qasm(circuit),
            "shots": shots,
            "seed": int(options.get("seed", 0)),
        }
        try:
            response = self._session.post(
                f"{self._endpoint}/jobs", json=body, timeout=self._timeout
            )
        except requests.RequestException as exc:
            raise ProviderError(f"remote submission failed: {exc}") from exc
        if response.status_code == 404:
            raise UnknownBackendError(f"remote backend {backend_name!r} not found")
        if response.status_code != 201:
            raise ProviderError(f"remote submission rejected ({response.status_code}): {response.text}")
        try:
            return str(response.json()["job_id"])
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed submission response: {exc}") from exc

    def status(self, job_id: str) -> JobStatus:
        try:
            response = self._session.get(f"{self._endpoint}/jobs/{job_id}", timeout=self._timeout)
        except requests.RequestException as exc:
            return JobStatus(JobState.FAILED, f"remote status check failed: {exc}")
        if response.status_code == 404:
            # Server restarted and lost the job; treat as failed.
            return JobStatus(JobState.FAILED, "remote job not found")
        try:
            payload = response.json()
            return JobStatus(JobState(payload["state"]), payload.get("error"))
        except (ValueError, KeyError) as exc:
            return JobStatus(JobState.FAILED, f"malformed status response: {exc}")

    def result(self, job_id: str) -> dict[str, int]:
        try:
            response = self._session.get(
                f"{self._endpoint}/jobs/{job_id}/result", timeout=self._timeout
            )
        except requests.RequestException as exc:
            raise JobFailedError(f"remote result fetch failed: {exc}") from exc
        if response.status_code == 200:
            return {str(k): int(v) for k, v in response.json().items()}
        if response.status_code == 409:
            raise JobNotReadyError("remote job not ready")
        if response.status_code == 410:
            raise JobFailedError(response.json().get("error", "remote job failed"))
        raise JobFailedError(f"remote job gone ({response.status_code})")


_ADAPTER_KINDS = {
    "local_ideal": LocalSimulatorAdapter,
    "local_noisy": LocalSimulatorAdapter,
    "mock_delay": MockDelayAdapter,
    "remote_http": RemoteHttpAdapter,
}


def _build_adapter(config: ProviderConfig):
    if config.kind not in _ADAPTER_KINDS:
        raise ProviderConfigError(
            f"unknown provider kind {config.kind!r} (expected one of {sorted(_ADAPTER_KINDS)})"
        )
    if config.kind == "remote_http" and not config.endpoint:
        raise ProviderConfigError(f"provider {config.provider_id!r}: remote_http requires endpoint")
    if config.kind == "local_noisy" and config.noise is None:
        raise ProviderConfigError(f"provider {config.provider_id!r}: local_noisy requires noise")
    return _ADAPTER_KINDS[config.kind](config)


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------


class VirtualProvider:
    """Registry of provider adapters plus process-unique job handles."""

    def __init__(self):
        self._adapters: dict[str, Any] = {}
        self._handles: dict[str, tuple[Any, str]] = {}
        self._lock = threading.Lock()

    def register_provider(self, config: ProviderConfig) -> str:
        """Make a provider's backends discoverable; credentials live for the session only."""
        with self._lock:
            if config.provider_id in self._adapters:
                raise DuplicateProviderError(f"provider {config.provider_id!r} already registered")
            self._adapters[config.provider_id] = _build_adapter(config)
        return config.provider_id

    def providers(self) -> list[str]:
        with self._lock:
            return sorted(self._adapters)

    def get_backends(self, online_only: bool = False) -> dict[str, list[BackendDescriptor]]:
        """Discover backends across all providers, deterministically ordered.

        Providers with no (matching) backends are omitted from the map.
        """
        out: dict[str, list[BackendDescriptor]] = {}
        with self._lock:
            adapters = dict(self._adapters)
        for provider_id in sorted(adapters):
            descriptors = sorted(adapters[provider_id].backends(), key=lambda d: d.backend_name)
            if online_only:
                descriptors = [d for d in descriptors if d.online]
            if descriptors:
                out[provider_id] = descriptors
        return out

    def find_backend(self, provider_id: str, backend_name: str) -> BackendDescriptor | None:
        with self._lock:
            adapter = self._adapters.get(provider_id)
        if adapter is None:
            return None
        for descriptor in adapter.backends():
            if descriptor.backend_name == backend_name:
                return descriptor
        return None

    def submit(
        self,
        provider_id: str,
        backend_name: str,
        circuit: Circuit,
        shots: int,
        options: Mapping[str, Any] | None = None,
    ) -> JobHandle:
        """Non-blocking submission; the job enters QUEUED on the target backend."""
        if shots < 1:
            raise ValueError(f"shots must be >= 1, got {shots}")
        descriptor = self.find_backend(provider_id, backend_name)
        if descriptor is None:
            raise UnknownBackendError(f"unknown backend {provider_id}/{backend_name}")
        if not descriptor.online:
            raise BackendOfflineError(f"backend {provider_id}/{backend_name} is offline")
        if circuit.width > descriptor.max_qubits:
            raise CircuitError(
                f"circuit {circuit.name!r} width {circuit.width} exceeds "
                f"{provider_id}/{backend_name} limit {descriptor.max_qubits}"
            )
        with self._lock:
            adapter = self._adapters[provider_id]
        provider_job_id = adapter.submit(backend_name, circuit, shots, options or {})
        handle = JobHandle(
            job_id=f"job-{next(_JOB_COUNTER)}",
            provider_id=provider_id,
            backend_name=backend_name,
            submitted_at=time.time(),
        )
        with self._lock:
            self._handles[handle.job_id] = (adapter, provider_job_id)
        return handle

    def _entry(self, handle: JobHandle) -> tuple[Any, str]:
        with self._lock:
            entry = self._handles.get(handle.job_id)
        if entry is None:
            raise UnknownJobError(f"handle {handle.job_id!r} was not issued by this registry")
        return entry

    def status(self, handle: JobHandle) -> JobStatus:
        adapter, provider_job_id = self._entry(handle)
        return adapter.status(provider_job_id)

    def result(self, handle: JobHandle) -> dict[str, int]:
        """Counts for a DONE job; raises JobNotReadyError / JobFailedError otherwise."""
        adapter, provider_job_id = self._entry(handle)
        return adapter.result(provider_job_id)
