"""The learner/verifier synthesis loop.

Each iteration trains the candidate on the current samples, expands it
into an exact polynomial pair, and tries to knock it down: first with a
cheap float-level falsifier, then with the SMT queries.  Counterexamples
(always exactly validated first) are injected into the sample set together
with a cloud of random neighbors, and training resumes from the current
weights.  The loop ends with a verified exact certificate, an exhausted
iteration budget, or an inconclusive solver answer; it never treats a
timeout as validity.

All randomness is derived from one master seed, so a run is reproducible
from a single number (up to the models the solver returns, which are fixed
for a fixed solver binary).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dynamics import DomainSpec, VectorField
from .learner import (
    COUNTEREXAMPLE,
    INITIAL,
    NEIGHBORHOOD,
    LearnerConfig,
    SampleSet,
    train,
)
from .network import LAST_LAYER_MODES, Lnn, NetworkShape, init_network
from .translation import CertificateCandidate, make_candidate
from .verifier import (
    PHI1,
    PHI2,
    SolverConfig,
    augment_counterexample,
    build_queries,
    discover_solver,
    emit_smtlib,
    fallback_falsify,
    refine_near_witness,
    run_queries,
    validate_counterexample,
)

VERIFIED = "verified"
EXHAUSTED = "exhausted"
INCONCLUSIVE = "inconclusive"


class ConfigError(ValueError):
    """Invalid synthesis configuration."""


def derive_seed(master_seed: int, role: str, index: int = 0) -> int:
    """Stable 63-bit seed for one component of a run."""
    digest = hashlib.sha256(f"{master_seed}:{role}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class CegisConfig:
    shape: NetworkShape
    domain: DomainSpec
    last_layer_mode: str = "ones"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    solver: SolverConfig | None = None
    initial_samples: int = 500
    max_iterations: int = 100
    cex_count: int = 20
    cex_radius_fraction: float = 0.05
    master_seed: int = 0
    fallback_budget: int = 20000
    max_expansion_degree: int = 12
    emit_smt: bool = False
    log_training: bool = False

    def __post_init__(self):
        if self.last_layer_mode not in LAST_LAYER_MODES:
            raise ConfigError(f"unknown last-layer mode {self.last_layer_mode!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.initial_samples < 1:
            raise ConfigError("initial_samples must be at least 1")
        if self.cex_count < 0:
            raise ConfigError("cex_count must be non-negative")
        if not 0 < self.cex_radius_fraction <= 1:
            raise ConfigError("cex_radius_fraction must be in (0, 1]")

    def snapshot(self) -> dict:
        out = {
            "shape": {
                "input_dim": self.shape.input_dim,
                "hidden_widths": list(self.shape.hidden_widths),
                "activation_degrees": list(self.shape.activation_degrees),
            },
            "domain": self.domain.describe(),
            "last_layer_mode": self.last_layer_mode,
            "learner": {
                "epsilon": self.learner.epsilon,
                "slope_a": self.learner.slope_a,
                "learning_rate": self.learner.learning_rate,
                "max_epochs": self.learner.max_epochs,
            },
            "solver": self.solver.command if self.solver else None,
            "solver_timeout_s": self.solver.timeout_s if self.solver else None,
            "initial_samples": self.initial_samples,
            "max_iterations": self.max_iterations,
            "cex_count": self.cex_count,
            "cex_radius_fraction": self.cex_radius_fraction,
            "master_seed": self.master_seed,
            "fallback_budget": self.fallback_budget,
            "max_expansion_degree": self.max_expansion_degree,
        }
        return out


def initial_sampling(domain: DomainSpec, dimension: int, count: int, seed: int) -> SampleSet:
    """Uniform samples in the domain by rejection from its bounding box;
    the origin is excluded.  Deterministic given seed."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    samples = SampleSet(domain)
    lo, hi = domain.bounding_box(dimension)
    while len(samples) < count:
        block = rng.uniform(lo, hi, size=(max(64, count), dimension))
        block = block[domain.contains_mask(block)]
        for row in block:
            if len(samples) >= count:
                break
            try:
                samples.add(tuple(float(v) for v in row), INITIAL)
            except ValueError:
                # Float boundary points can fail the exact membership check.
                continue
    return samples


@dataclass
class CexRecord:
    point: tuple[str, ...]  # exact rationals as strings
    formula: str  # phi1 | phi2
    source: str  # fallback | smt
    validated: bool
    injected: bool

    def exact_point(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(v) for v in self.point)


@dataclass
class IterationRecord:
    index: int
    samples_before: int
    samples_after: int
    epochs: int
    verdict: str  # falsified | valid | unknown
    source: str | None  # fallback | smt
    counterexamples: list[CexRecord]
    v_text: str
    vdot_text: str
    timings: dict[str, float]

    def as_dict(self, with_timings: bool = True) -> dict:
        out = {
            "index": self.index,
            "samples_before": self.samples_before,
            "samples_after": self.samples_after,
            "epochs": self.epochs,
            "verdict": self.verdict,
            "source": self.source,
            "counterexamples": [asdict(c) for c in self.counterexamples],
            "v": self.v_text,
            "vdot": self.vdot_text,
        }
        if with_timings:
            out["timings"] = self.timings
        return out


@dataclass
class CegisOutcome:
    status: str  # verified | exhausted | inconclusive
    certificate: CertificateCandidate | None
    reason: str | None
    iterations: list[IterationRecord]
    config: dict

    @property
    def verified(self) -> bool:
        return self.status == VERIFIED

    def history_fingerprint(self) -> str:
        """Deterministic digest of the run history (timings excluded)."""
        payload = json.dumps(
            [rec.as_dict(with_timings=False) for rec in self.iterations],
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_json(self) -> str:
        return json.dumps(
            {
                "status": self.status,
                "reason": self.reason,
                "config": self.config,
                "iterations": [rec.as_dict() for rec in self.iterations],
                "certificate": self.certificate.to_text() if self.certificate else None,
            },
            indent=2,
        )


Progress = Callable[[str], None]


def _exact_strings(point: Sequence[Fraction]) -> tuple[str, ...]:
    return tuple(str(Fraction(v)) for v in point)


def run_cegis(
    field_: VectorField,
    cfg: CegisConfig,
    artifact_dir: str | Path | None = None,
    progress: Progress | None = None,
) -> CegisOutcome:
    """Run the synthesis loop until a certificate verifies or the budget
    runs out.  See the module docstring for the phase structure."""
    if cfg.shape.input_dim != field_.dimension:
        raise ConfigError(
            f"network input dimension {cfg.shape.input_dim} does not match the "
            f"{field_.dimension}-dimensional system"
        )
    solver = cfg.solver or discover_solver()
    if solver is None:
        raise ConfigError(
            "no SMT solver available: configure one explicitly, set "
            "LYASYNTH_SOLVER, or run scripts/setup_solver.sh"
        )
    out_dir = Path(artifact_dir) if artifact_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(json.dumps(cfg.snapshot(), indent=2) + "\n")

    say = progress or (lambda message: None)
    master = cfg.master_seed
    samples = initial_sampling(
        cfg.domain, field_.dimension, cfg.initial_samples, derive_seed(master, "init-samples")
    )
    net = init_network(cfg.shape, cfg.last_layer_mode, derive_seed(master, "net-init"))
    learner_cfg = replace(cfg.learner, seed=derive_seed(master, "learner"))

    history: list[IterationRecord] = []
    outcome_status, outcome_reason, certificate = EXHAUSTED, None, None

    train_log = None
    if out_dir and cfg.log_training:
        train_log = (out_dir / "training_log.jsonl").open("w")

    try:
        for iteration in range(1, cfg.max_iterations + 1):
            timings: dict[str, float] = {}
            samples_before = len(samples)
            epochs = 0

            def sink(record: dict, _iter=iteration) -> None:
                nonlocal epochs
                epochs += 1
                if train_log is not None:
                    record = {"iteration": _iter, **record}
                    train_log.write(json.dumps(record) + "\n")

            t0 = time.perf_counter()
            train(net, field_, samples, learner_cfg, log_sink=sink)
            timings["train"] = time.perf_counter() - t0

            t0 = time.perf_counter()
            candidate = make_candidate(net, field_, cfg.max_expansion_degree)
            timings["translate"] = time.perf_counter() - t0

            cex_records: list[CexRecord] = []
            verdict, source = "falsified", None

            t0 = time.perf_counter()
            hit = fallback_falsify(
                candidate, cfg.domain, cfg.fallback_budget,
                seed=derive_seed(master, "fallback", iteration),
            )
            timings["falsify"] = time.perf_counter() - t0

            if hit is not None:
                point, which = hit
                source = "fallback"
                cex_records.append(
                    CexRecord(_exact_strings(point), which, source, True, True)
                )
            else:
                t0 = time.perf_counter()
                queries = build_queries(candidate, cfg.domain)
                if out_dir and cfg.emit_smt:
                    for q in queries:
                        path = out_dir / f"iter_{iteration:03d}_{q.which}.smt2"
                        path.write_text(emit_smtlib(q))
                results = run_queries(list(queries), solver)
                timings["verify"] = time.perf_counter() - t0
                source = "smt"

                sat_results = [r for r in results if r.status == "sat"]
                unknown_results = [r for r in results if r.status == "unknown"]
                if not sat_results and not unknown_results:
                    verdict = "valid"
                elif sat_results:
                    bad_model = False
                    for r in sat_results:
                        exact = r.model
                        ok = validate_counterexample(candidate, exact, r.which, cfg.domain)
                        if not ok:
                            refined = refine_near_witness(
                                candidate, cfg.domain, exact, r.which,
                                seed=derive_seed(master, "refine", iteration),
                            )
                            if refined is not None:
                                cex_records.append(
                                    CexRecord(_exact_strings(exact), r.which, source, False, False)
                                )
                                exact, _ = refined
                                ok = True
                        cex_records.append(
                            CexRecord(_exact_strings(exact), r.which, source, ok, ok)
                        )
                        bad_model |= not ok
                    if bad_model and not any(c.injected for c in cex_records):
                        verdict = "unknown"
                        outcome_reason = "solver-error: model failed exact validation"
                else:
                    verdict = "unknown"
                    outcome_reason = "; ".join(
                        f"{r.which}: {r.reason}" for r in unknown_results
                    )

            injected_points: list[tuple[Fraction, ...]] = [
                rec.exact_point() for rec in cex_records if rec.injected
            ]
            for j, point in enumerate(injected_points):
                cloud = augment_counterexample(
                    point, cfg.domain, cfg.cex_count, cfg.cex_radius_fraction,
                    derive_seed(master, f"augment-{iteration}", j),
                )
                for k, sample in enumerate(cloud):
                    try:
                        samples.add(sample, COUNTEREXAMPLE if k == 0 else NEIGHBORHOOD)
                    except ValueError:
                        continue

            record = IterationRecord(
                index=iteration,
                samples_before=samples_before,
                samples_after=len(samples),
                epochs=epochs,
                verdict=verdict,
                source=source,
                counterexamples=cex_records,
                v_text=candidate.v.to_text(candidate.var_names),
                vdot_text=candidate.vdot.to_text(candidate.var_names),
                timings=timings,
            )
            history.append(record)
            say(
                f"iteration {iteration}: |S|={samples_before} epochs={epochs} "
                f"verdict={verdict}"
                + (f" ({len(injected_points)} counterexample(s) via {source})"
                   if injected_points else "")
            )

            if verdict == "valid":
                outcome_status, certificate = VERIFIED, candidate
                break
            if verdict == "unknown":
                outcome_status = INCONCLUSIVE
                break
    finally:
        if train_log is not None:
            train_log.close()

    outcome = CegisOutcome(
        status=outcome_status,
        certificate=certificate,
        reason=outcome_reason,
        iterations=history,
        config=cfg.snapshot(),
    )
    if out_dir:
        (out_dir / "history.json").write_text(outcome.to_json() + "\n")
        with (out_dir / "counterexamples.jsonl").open("w") as fh:
            for rec in history:
                for cex in rec.counterexamples:
                    fh.write(json.dumps({"iteration": rec.index, **asdict(cex)}) + "\n")
        if certificate is not None:
            (out_dir / "certificate.txt").write_text(certificate.to_text())
    return outcome
