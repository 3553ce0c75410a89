"""The principal orchestrator: wires registry, policies, dispatch, collector.

Runs are declarative (run_experiment with an ExperimentSpec) or explicit
(run_dispatch with a pre-built Dispatch). Either way, execution is lane-per-
backend: each distinct backend gets a worker that submits its jobs in order
and then polls them to completion, so parallel runs overlap across backends
while same-backend submission order is preserved. Job k's seed is
base_seed + ordinal(k), making serial and parallel runs of the same plan
bit-identical on local simulators regardless of scheduling.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .circuit import Circuit
from .collector import ResultCollector
from .dispatch import Dispatch
from .errors import (
    DispatchValidationError,
    ExperimentError,
    PolicyError,
    ProviderError,
    UnknownBackendError,
)
from .policies import PolicyRegistry
from .providers import JobState, ProviderConfig, VirtualProvider

__all__ = ["ExperimentSpec", "QuantumExecutor"]

logger = logging.getLogger(__name__)

_POLL_INITIAL = 0.002
_POLL_MAX = 0.05


@dataclass
class ExperimentSpec:
    """Declarative experiment: what to run, where, and under which policies."""

    circuits: list[Circuit] | Circuit
    shots: int
    backends: Mapping[str, list[str]]
    split_policy: str = "multiplier"
    merge_policy: str | None = None
    parallel: bool = True
    wait: bool = True
    base_seed: int = 0
    policy_context: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.circuits, Circuit):
            self.circuits = [self.circuits]
        self.circuits = list(self.circuits)


class QuantumExecutor:
    """User-facing entry point: provider configuration, policies, runs."""

    def __init__(
        self,
        providers: Iterable[ProviderConfig] | None = None,
        virtual_provider: VirtualProvider | None = None,
    ):
        self.virtual_provider = virtual_provider or VirtualProvider()
        self.policies = PolicyRegistry()
        for config in providers or ():
            self.virtual_provider.register_provider(config)

    # -- provider passthroughs ----------------------------------------------

    def register_provider(self, config: ProviderConfig) -> str:
        return self.virtual_provider.register_provider(config)

    def get_backends(self, online_only: bool = False):
        return self.virtual_provider.get_backends(online_only=online_only)

    # -- policies -------------------------------------------------------------

    def add_policy(
        self,
        name: str,
        kind: str | None = None,
        fn: Callable | None = None,
        *,
        split_policy: Callable | None = None,
        merge_policy: Callable | None = None,
    ) -> None:
        """Register a runtime policy, by (name, kind, fn) or keyword form
        add_policy(name=..., split_policy=fn) / add_policy(name=..., merge_policy=fn)."""
        if split_policy is not None:
            kind, fn = "split", split_policy
        elif merge_policy is not None:
            kind, fn = "merge", merge_policy
        if kind is None or fn is None:
            raise PolicyError("add_policy needs kind and fn (or split_policy=/merge_policy=)")
        self.policies.register(name, kind, fn)

    # -- runs -----------------------------------------------------------------

    def run_experiment(self, spec: ExperimentSpec | None = None, **kwargs) -> ResultCollector:
        """Resolve targets, build the dispatch via the split policy, execute.

        Accepts an ExperimentSpec or the same fields as keywords. All policy
        and backend resolution happens before anything is submitted.
        """
        if spec is None:
            spec = ExperimentSpec(**kwargs)
        split_fn = self.policies.resolve_split(spec.split_policy)
        merge_fn = (
            self.policies.resolve_merge(spec.merge_policy) if spec.merge_policy else None
        )

        targets: list[tuple[str, str]] = []
        for provider_id in sorted(spec.backends):
            for backend_name in sorted(spec.backends[provider_id]):
                if self.virtual_provider.find_backend(provider_id, backend_name) is None:
                    raise UnknownBackendError(f"unknown backend {provider_id}/{backend_name}")
                targets.append((provider_id, backend_name))

        dispatch = split_fn(spec.circuits, spec.shots, targets, spec.policy_context)
        foreign = set(dispatch.backends()) - set(targets)
        if foreign:
            names = ", ".join(f"{p}/{b}" for p, b in sorted(foreign))
            raise ExperimentError(
                f"split policy {spec.split_policy!r} referenced targets outside the experiment: {names}"
            )

        return self.run_dispatch(
            dispatch,
            parallel=spec.parallel,
            wait=spec.wait,
            merge_policy=(spec.merge_policy, merge_fn) if merge_fn else None,
            base_seed=spec.base_seed,
            policy_context=spec.policy_context,
        )

    def run_dispatch(
        self,
        dispatch: Dispatch,
        parallel: bool = True,
        wait: bool = True,
        merge_policy: str | tuple[str, Callable] | None = None,
        base_seed: int = 0,
        policy_context: Mapping[str, Any] | None = None,
    ) -> ResultCollector:
        """Submit every job of a validated dispatch and return the collector.

        parallel=True runs one worker lane per distinct backend; wait=True
        blocks until the run is terminal, wait=False returns a live collector
        whose completion progresses in the background.
        """
        merge_name, merge_fn = self._resolve_merge(merge_policy)
        if dispatch.total_jobs() > 0 and not self.virtual_provider.providers():
            raise ProviderError("no providers registered")
        violations = dispatch.validate_against(self.virtual_provider)
        if violations:
            raise DispatchValidationError(violations)

        context = dict(policy_context or {})
        context.setdefault("backend_info", {}).update(self._backend_info(dispatch))
        collector = ResultCollector(
            dispatch, merge_policy=merge_name, merge_fn=merge_fn, policy_context=context
        )

        lanes = dispatch.backends()
        if lanes:
            pool = ThreadPoolExecutor(
                max_workers=len(lanes) if parallel else 1, thread_name_prefix="qexec-lane"
            )
            for provider_id, backend_name in lanes:
                pool.submit(
                    self._run_lane,
                    provider_id,
                    backend_name,
                    dispatch.jobs_for(provider_id, backend_name),
                    base_seed,
                    collector,
                )
            pool.shutdown(wait=False)
        if wait:
            collector.wait()
        return collector

    def _resolve_merge(self, merge_policy) -> tuple[str | None, Callable | None]:
        if merge_policy is None:
            return None, None
        if isinstance(merge_policy, tuple):
            return merge_policy
        if callable(merge_policy):
            return getattr(merge_policy, "__name__", "merge"), merge_policy
        return merge_policy, self.policies.resolve_merge(merge_policy)

    def _backend_info(self, dispatch: Dispatch) -> dict[str, dict]:
        info: dict[str, dict] = {}
        for provider_id, backend_name in dispatch.backends():
            descriptor = self.virtual_provider.find_backend(provider_id, backend_name)
            if descriptor is not None:
                info[f"{provider_id}/{backend_name}"] = {
                    "is_ideal_simulator": descriptor.is_ideal_simulator,
                    "online": descriptor.online,
                    "max_qubits": descriptor.max_qubits,
                }
        return info

    def _run_lane(
        self,
        provider_id: str,
        backend_name: str,
        specs: list,
        base_seed: int,
        collector: ResultCollector,
    ) -> None:
        """Submit this backend's jobs in order, then poll all to completion."""
        try:
            pending = []
            for spec in specs:
                options = dict(spec.options)
                options["seed"] = base_seed + spec.ordinal
                try:
                    handle = self.virtual_provider.submit(
                        provider_id, backend_name, spec.circuit, spec.shots, options
                    )
                    collector.record_submitted(spec.ordinal, handle)
                    pending.append((spec, handle))
                except Exception as exc:
                    collector.record_failed(spec.ordinal, str(exc))

            interval = _POLL_INITIAL
            while pending:
                still_pending = []
                for spec, handle in pending:
                    try:
                        status = self.virtual_provider.status(handle)
                    except Exception as exc:
                        collector.record_failed(spec.ordinal, str(exc))
                        continue
                    if status.state is JobState.DONE:
                        try:
                            counts = self.virtual_provider.result(handle)
                            collector.record_result(spec.ordinal, counts)
                        except Exception as exc:
                            collector.record_failed(spec.ordinal, str(exc))
                    elif status.state is JobState.FAILED:
                        collector.record_failed(
                            spec.ordinal, status.error_message or "job failed"
                        )
                    else:
                        collector.record_status(spec.ordinal, status)
                        still_pending.append((spec, handle))
                pending = still_pending
                if pending:
                    time.sleep(interval)
                    interval = min(interval * 1.5, _POLL_MAX)
        except Exception as exc:  # last resort: never leave the run non-terminal
            logger.exception("lane %s/%s crashed", provider_id, backend_name)
            for spec in specs:
                collector.record_failed(spec.ordinal, f"lane failure: {exc}")
