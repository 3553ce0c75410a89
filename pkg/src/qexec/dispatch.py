"""The dispatch plan: a validated, ordered assignment of circuits to targets.

A Dispatch is a value, not a live run: it separates planning from execution
and serializes to JSON for the CLI run store. Canonical iteration order is
providers lexicographic, backends lexicographic, jobs by insertion; every
module that flattens a dispatch (seeding, result trees, tables) uses it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator

from .circuit import Circuit, parse_qasm, serialize_qasm, validate
from .errors import DispatchError

__all__ = ["JobSpec", "Dispatch"]


@dataclass
class JobSpec:
    """One planned job: circuit, shot count, backend-specific options.

    ``ordinal`` is the job's 0-based position in the canonical flattened
    order over the whole dispatch; it is recomputed on every add_job so the
    ordinals always form a gapless permutation of 0..N-1.
    """

    circuit: Circuit
    shots: int
    options: dict[str, Any] = field(default_factory=dict)
    ordinal: int = -1


class Dispatch:
    """Ordered assignment provider_id -> backend_name -> list of JobSpec."""

    def __init__(self):
        self._assignments: dict[str, dict[str, list[JobSpec]]] = {}

    def add_job(
        self,
        provider_id: str,
        backend_name: str,
        circuit: Circuit,
        shots: int,
        options: dict[str, Any] | None = None,
    ) -> "Dispatch":
        """Append a job to that backend's list; duplicates are legal (repeat runs)."""
        if shots < 1:
            raise DispatchError(f"shots must be >= 1, got {shots}")
        violations = validate(circuit)
        if violations:
            raise DispatchError(f"invalid circuit {circuit.name!r}: " + "; ".join(violations))
        backend_jobs = self._assignments.setdefault(provider_id, {}).setdefault(backend_name, [])
        backend_jobs.append(JobSpec(circuit=circuit, shots=shots, options=dict(options or {})))
        self._renumber()
        return self

    def _renumber(self) -> None:
        for ordinal, (_, _, spec) in enumerate(self.jobs()):
            spec.ordinal = ordinal

    def jobs(self) -> Iterator[tuple[str, str, JobSpec]]:
        """Yield (provider_id, backend_name, spec) in canonical order."""
        for provider_id in sorted(self._assignments):
            backends = self._assignments[provider_id]
            for backend_name in sorted(backends):
                for spec in backends[backend_name]:
                    yield provider_id, backend_name, spec

    def backends(self) -> list[tuple[str, str]]:
        """Distinct (provider_id, backend_name) targets in canonical order."""
        return [
            (provider_id, backend_name)
            for provider_id in sorted(self._assignments)
            for backend_name in sorted(self._assignments[provider_id])
        ]

    def jobs_for(self, provider_id: str, backend_name: str) -> list[JobSpec]:
        return list(self._assignments.get(provider_id, {}).get(backend_name, []))

    def total_jobs(self) -> int:
        return sum(1 for _ in self.jobs())

    def total_shots(self) -> int:
        return sum(spec.shots for _, _, spec in self.jobs())

    def validate_against(self, registry) -> list[str]:
        """Pre-flight check against a provider registry; nothing is submitted.

        Reports unknown backends, offline backends, and width overflows as
        human-readable violation strings.
        """
        violations: list[str] = []
        for provider_id, backend_name, spec in self.jobs():
            descriptor = registry.find_backend(provider_id, backend_name)
            if descriptor is None:
                violations.append(f"unknown backend {provider_id}/{backend_name}")
                continue
            if not descriptor.online:
                violations.append(f"backend {provider_id}/{backend_name} is offline")
            if spec.circuit.width > descriptor.max_qubits:
                violations.append(
                    f"circuit {spec.circuit.name!r} width {spec.circuit.width} exceeds "
                    f"{provider_id}/{backend_name} limit {descriptor.max_qubits}"
                )
        return violations

    def to_dict(self) -> dict:
        """JSON-ready form {provider: {backend: [{qasm, shots, options}]}}, canonically ordered."""
        out: dict[str, dict[str, list[dict]]] = {}
        for provider_id, backend_name, spec in self.jobs():
            out.setdefault(provider_id, {}).setdefault(backend_name, []).append(
                {
                    "qasm": serialize_qasm(spec.circuit),
                    "shots": spec.shots,
                    "options": dict(spec.options),
                }
            )
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "Dispatch":
        dispatch = cls()
        for provider_id in sorted(data):
            for backend_name in sorted(data[provider_id]):
                for entry in data[provider_id][backend_name]:
                    dispatch.add_job(
                        provider_id,
                        backend_name,
                        parse_qasm(entry["qasm"]),
                        entry["shots"],
                        entry.get("options") or {},
                    )
        return dispatch

    @classmethod
    def from_json(cls, text: str) -> "Dispatch":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dispatch):
            return NotImplemented
        mine = [(p, b, s.circuit, s.shots, s.options, s.ordinal) for p, b, s in self.jobs()]
        theirs = [(p, b, s.circuit, s.shots, s.options, s.ordinal) for p, b, s in other.jobs()]
        return mine == theirs

    def __repr__(self) -> str:
        return f"Dispatch(jobs={self.total_jobs()}, shots={self.total_shots()})"
