"""Training orchestration: teacher refresh, noisy labelling, budgeted updates.

One outer iteration refreshes every teacher on its real shard versus fresh
generator samples, draws a query batch from the generator, collects teacher
tallies, releases noisy labels, charges the accountant once for the batch,
runs the configured number of student steps on the fixed query batch, takes
one generator step against all-ones targets, and refreshes the converted
privacy cost. The loop guard is epsilon_hat < epsilon_target, so the final
batch may overshoot the target; the overshoot is the last batch's conversion
delta and is visible in the trace.

Real rows reach the student and generator only through vote tallies: the
query batch and every student input are generator output.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields

import numpy as np

from . import diffcore as dc
from .errors import ConfigError, DataError, NumericError
from .models.generator import Generator, generate_batch
from .models.student import make_student
from .models.teacher import fit_teacher_ensemble, tally_votes
from .privacy.accountant import (
    Epsilon,
    RdpLedger,
    VoteRecord,
    epsilon_floor,
    get_epsilon,
    record_query,
)
from .privacy.aggregate import noisy_aggregate_batch
from .tabular.encoding import EncodedMatrix
from .tabular.sharding import partition_shards

STUDENT_KINDS = ("transformer", "mlp")


@dataclass
class TrainConfig:
    epsilon_target: float
    delta: float = 1e-5
    teachers: int = 10          # k
    sigma: float = 1.0
    batch_size: int = 64        # B, query labels per outer iteration
    student_steps: int = 5      # n_s
    max_outer_iterations: int = 2000
    student_kind: str = "transformer"
    lr: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    adam_eps: float = 1e-8
    seed: int = 0
    rdp_clamp: bool = True
    teacher_warm_start: bool = False
    checkpoint_every: int = 0   # 0: only at exit
    threads: int = 0            # 0: all cores; used by evaluation helpers

    def validate(self) -> "TrainConfig":
        problems = []
        if not self.epsilon_target > 0:
            problems.append(f"epsilon_target must be > 0, got {self.epsilon_target}")
        if not (0.0 < self.delta < 1.0):
            problems.append(f"delta must lie in (0, 1), got {self.delta}")
        if self.teachers < 1:
            problems.append(f"teachers must be >= 1, got {self.teachers}")
        if self.sigma <= 0:
            problems.append(f"sigma must be > 0, got {self.sigma}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.student_steps < 1:
            problems.append(f"student_steps must be >= 1, got {self.student_steps}")
        if self.max_outer_iterations < 1:
            problems.append(f"max_outer_iterations must be >= 1, got {self.max_outer_iterations}")
        if self.student_kind not in STUDENT_KINDS:
            problems.append(f"student_kind must be one of {STUDENT_KINDS}, got {self.student_kind!r}")
        if problems:
            raise ConfigError("invalid training config: " + "; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(doc: dict) -> "TrainConfig":
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "epsilon_target" not in doc:
            raise ConfigError("config requires epsilon_target")
        return TrainConfig(**doc).validate()


def rng_streams(seed: int) -> dict:
    """Four independent named streams so e.g. batch size cannot perturb the
    shard partition: partition, gumbel (all generator sampling randomness),
    gaussian_noise (vote noise), init (weights)."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("partition", "gumbel", "gaussian_noise", "init")
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


@dataclass
class TraceRow:
    iteration: int
    epsilon_hat: float
    mean_gap: float
    frac_label_real: float
    student_loss: float
    generator_loss: float


@dataclass
class AccountantRow:
    outer_iteration: int
    batch_index: int
    label_index: int
    tally: int
    gap: float
    q: float
    epsilon_hat_after: float


TRACE_COLUMNS = ("iteration", "epsilon_hat", "mean_gap", "frac_label_real",
                 "student_loss", "generator_loss")
ACCOUNTANT_COLUMNS = ("outer_iteration", "batch_index", "label_index", "tally",
                      "gap", "q", "epsilon_hat_after")


def _rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in
                         (getattr(r, c) for c in columns)])
    return buf.getvalue()


def trace_to_csv(rows) -> str:
    return _rows_to_csv(TRACE_COLUMNS, rows)


def accountant_trace_to_csv(rows) -> str:
    return _rows_to_csv(ACCOUNTANT_COLUMNS, rows)


def read_accountant_trace(path) -> list[AccountantRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != ACCOUNTANT_COLUMNS:
            raise DataError(f"accountant trace: expected columns {ACCOUNTANT_COLUMNS}")
        out = []
        for rec in reader:
            out.append(AccountantRow(
                outer_iteration=int(rec["outer_iteration"]),
                batch_index=int(rec["batch_index"]),
                label_index=int(rec["label_index"]),
                tally=int(rec["tally"]),
                gap=float(rec["gap"]),
                q=float(rec["q"]),
                epsilon_hat_after=float(rec["epsilon_hat_after"]),
            ))
        return out


@dataclass
class TrainResult:
    generator: Generator
    student: object
    epsilon: Epsilon
    ledger: RdpLedger
    trace: list
    accountant_trace: list
    stopped_by: str            # "budget" or "iteration_cap"
    iterations: int
    config: TrainConfig
    shard_sizes: list = field(default_factory=list)


def student_update(student, optimizer, X_q: np.ndarray, Y: np.ndarray, n_s: int,
                   context: str = "") -> list[float]:
    """n_s optimizer steps of BCE on the fixed labelled query batch."""
    losses = []
    targets = Y.reshape(-1, 1).astype(np.float64)
    for _ in range(n_s):
        optimizer.zero_grad()
        loss = dc.bce_with_logits(student.forward(X_q), targets)
        value = float(loss.data[0, 0])
        if not np.isfinite(value):
            raise NumericError(f"student loss non-finite {context}")
        loss.backward()
        optimizer.step()
        losses.append(value)
    return losses


def generator_update(generator: Generator, student, optimizer, batch_size: int,
                     rng: np.random.Generator, context: str = "") -> float:
    """One generator step on BCE(S(G(z)), 1); the student stays frozen."""
    z = rng.standard_normal((batch_size, generator.latent_dim))
    student_params = student.parameters()
    flags = [p.requires_grad for p in student_params]
    for p in student_params:
        p.requires_grad = False
    try:
        optimizer.zero_grad()
        out = generator.forward(z, "train", rng=rng)
        loss = dc.bce_with_logits(student.forward(out), np.ones((batch_size, 1)))
        value = float(loss.data[0, 0])
        if not np.isfinite(value):
            raise NumericError(f"generator loss non-finite {context}")
        loss.backward()
        optimizer.step()
    finally:
        for p, flag in zip(student_params, flags):
            p.requires_grad = flag
    return value


def train(data: EncodedMatrix, config: TrainConfig, hooks=None) -> TrainResult:
    """Run the budgeted teacher-student training loop on real encoded data."""
    config.validate()
    if data.provenance != "real":
        raise DataError("train: data must carry real provenance")
    n = data.n_rows
    if config.teachers > n:
        raise ConfigError(f"train: teachers={config.teachers} exceeds rows={n}")

    floor = epsilon_floor(config.delta)
    if config.epsilon_target <= floor:
        raise ConfigError(
            f"epsilon_target={config.epsilon_target} is at or below the empty-ledger "
            f"conversion floor {floor:.6f} at delta={config.delta}; no batch can be charged"
        )

    rngs = rng_streams(config.seed)
    shard_set = partition_shards(n, config.teachers, rngs["partition"])
    views = [shard_set.view(data, i) for i in range(config.teachers)]

    generator = Generator(data.schema, rngs["init"])
    student = make_student(config.student_kind, data.schema, rngs["init"])
    gen_opt = dc.Adam(generator.parameters(), lr=config.lr, beta1=config.adam_beta1,
                      beta2=config.adam_beta2, eps=config.adam_eps)
    stu_opt = dc.Adam(student.parameters(), lr=config.lr, beta1=config.adam_beta1,
                      beta2=config.adam_beta2, eps=config.adam_eps)

    ledger = RdpLedger(k=config.teachers, sigma=config.sigma, delta=config.delta,
                       clamp=config.rdp_clamp)
    teachers = None
    epsilon_hat = 0.0
    trace: list[TraceRow] = []
    acct_rows: list[AccountantRow] = []
    stopped_by = "iteration_cap"
    iteration = 0

    while epsilon_hat < config.epsilon_target:
        if iteration >= config.max_outer_iterations:
            break
        iteration += 1

        # teacher refresh: real shard (label 1) vs fresh fakes (label 0)
        fakes = []
        total_fake = sum(v.n_rows for v in views)
        fake_pool = generator.sample(total_fake, rngs["gumbel"], mode="train")
        start = 0
        for v in views:
            fakes.append(fake_pool[start:start + v.n_rows])
            start += v.n_rows
        warm = teachers if (config.teacher_warm_start and teachers is not None) else None
        teachers = fit_teacher_ensemble(views, fakes, warm_start=warm)

        # query batch, tallies, noisy labels
        X_q = generator.sample(config.batch_size, rngs["gumbel"], mode="train")
        tallies = tally_votes(teachers, X_q)
        labels = noisy_aggregate_batch(tallies, config.teachers, config.sigma,
                                       rngs["gaussian_noise"])

        batch_index = iteration - 1
        collect = (lambda j, tally, gap, q, eps_after: acct_rows.append(
            AccountantRow(iteration, batch_index, j, tally, gap, q, eps_after)))
        record_query(ledger, VoteRecord(tuple(int(t) for t in tallies),
                                        config.teachers, config.sigma), collect=collect)

        context = f"(outer iteration {iteration})"
        losses = student_update(student, stu_opt, X_q, labels, config.student_steps, context)
        gen_loss = generator_update(generator, student, gen_opt, config.batch_size,
                                    rngs["gumbel"], context)

        epsilon_hat = get_epsilon(ledger).value
        gaps = np.abs(tallies - config.teachers / 2.0)
        row = TraceRow(
            iteration=iteration,
            epsilon_hat=epsilon_hat,
            mean_gap=float(gaps.mean()),
            frac_label_real=float(labels.mean()),
            student_loss=losses[-1],
            generator_loss=gen_loss,
        )
        trace.append(row)
        if hooks is not None:
            hooks(iteration=iteration, row=row, generator=generator, student=student,
                  ledger=ledger)
        if epsilon_hat >= config.epsilon_target:
            stopped_by = "budget"

    return TrainResult(
        generator=generator,
        student=student,
        epsilon=get_epsilon(ledger),
        ledger=ledger,
        trace=trace,
        accountant_trace=acct_rows,
        stopped_by=stopped_by,
        iterations=iteration,
        config=config,
        shard_sizes=shard_set.sizes(),
    )


def checkpoint_arrays(result: TrainResult) -> dict:
    arrays = dict(result.generator.named_arrays())
    arrays.update(result.student.named_arrays())
    return arrays


def replay_tallies(
    tallies, k: int, sigma: float, delta: float, clamp: bool = True,
    batch_boundaries=None,
) -> list[AccountantRow]:
    """Recharge a recorded tally sequence through a fresh ledger.

    `batch_boundaries` optionally carries (outer_iteration, batch_index,
    label_index) triples aligned with `tallies`; defaults to one batch.
    """
    ledger = RdpLedger(k=k, sigma=sigma, delta=delta, clamp=clamp)
    rows: list[AccountantRow] = []
    tallies = list(tallies)
    if batch_boundaries is None:
        batch_boundaries = [(1, 0, j) for j in range(len(tallies))]
    groups: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for (outer, batch, label), tally in zip(batch_boundaries, tallies):
        groups.setdefault((outer, batch), []).append((label, tally))
    for (outer, batch) in sorted(groups):
        labelled = groups[(outer, batch)]
        record = VoteRecord(tuple(t for _, t in labelled), k, sigma)
        base = [lab for lab, _ in labelled]
        collect = (lambda j, tally, gap, q, eps_after: rows.append(
            AccountantRow(outer, batch, base[j], tally, gap, q, eps_after)))
        record_query(ledger, record, collect=collect)
    return rows
