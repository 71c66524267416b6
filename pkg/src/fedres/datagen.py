"""Data ingestion and synthesis.

Three sources feed the learners:

* LIBSVM-format multiclass corpora, partitioned into per-client binary
  tasks: a random subset of classes is merged into one positive class,
  each client distinguishes it from a single randomly assigned negative
  class, sample assignments are disjoint across clients and exactly
  class-balanced, and the feature coordinates are split once into a
  global and a local half.
* A two-block synthetic family where labels are linear in shared features
  with a per-client sign-flipped component, so no single global model can
  serve both halves of the population.
* A single-client stream of two noisy complementary views of shared
  latent variables with constant label, whose unique zero-loss model pair
  requires the global and local models to move in a coordinated way.

All randomness comes from named substreams of the caller's seed.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Sample
from .errors import ConfigError
from .rng import substream

MERGE_FRACTION = 0.3
DEFAULT_HOLDOUT = 0.25


# ---------------------------------------------------------------------------
# LIBSVM corpora


@dataclass
class MulticlassCorpus:
    """Dense multiclass dataset with source line numbers preserved."""

    labels: np.ndarray  # (n,) int
    features: np.ndarray  # (n, d) float
    line_numbers: np.ndarray  # (n,) int, 1-based position in the source text

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> list[int]:
        return sorted(set(int(v) for v in self.labels))

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def parse_libsvm(text: str) -> MulticlassCorpus:
    """Parse 'label index:value ...' lines; indices are 1-based and sparse.

    Vectors are densified to the maximum index seen anywhere in the
    corpus. Malformed input is reported with its line number: non-numeric
    labels, indices below 1, duplicate indices within a line, and tokens
    that are not index:value pairs.
    """
    labels: list[int] = []
    rows: list[dict[int, float]] = []
    lines: list[int] = []
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = int(tokens[0])
        except ValueError:
            raise ConfigError(f"line {lineno}: non-numeric label {tokens[0]!r}")
        entries: dict[int, float] = {}
        for tok in tokens[1:]:
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ConfigError(f"line {lineno}: malformed token {tok!r}")
            try:
                index = int(head)
                value = float(tail)
            except ValueError:
                raise ConfigError(f"line {lineno}: malformed token {tok!r}")
            if index <= 0:
                raise ConfigError(f"line {lineno}: index {index} must be >= 1")
            if index in entries:
                raise ConfigError(f"line {lineno}: duplicate index {index}")
            entries[index] = value
            max_index = max(max_index, index)
        labels.append(label)
        rows.append(entries)
        lines.append(lineno)
    features = np.zeros((len(rows), max_index))
    for i, entries in enumerate(rows):
        for index, value in entries.items():
            features[i, index - 1] = value
    return MulticlassCorpus(
        labels=np.array(labels, dtype=int),
        features=features,
        line_numbers=np.array(lines, dtype=int),
    )


def load_libsvm(path: str | Path) -> MulticlassCorpus:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            return parse_libsvm(fh.read())
    return parse_libsvm(path.read_text(encoding="utf-8"))


def serialize_libsvm(corpus: MulticlassCorpus) -> str:
    """Inverse of parse_libsvm up to blank lines: re-parsing is identical."""
    out = []
    max_seen = 0
    for row in corpus.features:
        nz = np.nonzero(row)[0]
        if len(nz):
            max_seen = max(max_seen, int(nz[-1]) + 1)
    for i in range(corpus.n):
        row = corpus.features[i]
        toks = [str(int(corpus.labels[i]))]
        toks += [f"{j + 1}:{float(row[j])!r}" for j in np.nonzero(row)[0]]
        if i == 0 and max_seen < corpus.d:
            toks.append(f"{corpus.d}:0.0")  # keep the dense width round-trippable
        out.append(" ".join(toks))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Federated datasets


@dataclass
class ClientData:
    train: list[Sample]
    test: list[Sample]
    task: tuple
    train_lines: list[int] = field(default_factory=list)
    test_lines: list[int] = field(default_factory=list)


@dataclass
class FederatedDataset:
    """Per-client streams plus the global/local feature split.

    Pool-backed datasets (LIBSVM partitions) replay their train pool in
    reshuffled epochs; pre-generated datasets (synthetic) return their
    stored streams and reject horizons beyond what was generated.
    """

    clients: list[ClientData]
    d_global: int
    d_locals: list[int]
    global_index: np.ndarray | None = None
    local_index: np.ndarray | None = None
    pregenerated: list[list[Sample]] | None = None

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    def round_stream(self, client_id: int, rounds: int, rng: np.random.Generator) -> list[Sample]:
        if self.pregenerated is not None:
            stream = self.pregenerated[client_id]
            if rounds > len(stream):
                raise ConfigError(
                    f"client {client_id} has {len(stream)} pre-generated rounds, need {rounds}"
                )
            return stream[:rounds]
        pool = self.clients[client_id].train
        if not pool:
            raise ConfigError(f"client {client_id} has an empty train pool")
        out: list[Sample] = []
        while len(out) < rounds:
            order = rng.permutation(len(pool))
            out.extend(pool[j] for j in order)
        return out[:rounds]

    def test_sets(self) -> list[list[Sample]]:
        return [c.test for c in self.clients]


def partition_federated(
    corpus: MulticlassCorpus,
    clients: int,
    n0: int,
    seed: int,
    holdout: float = DEFAULT_HOLDOUT,
) -> FederatedDataset:
    """Carve per-client binary tasks out of a multiclass corpus.

    A random subset of floor(0.3 K) classes is merged into the shared
    positive class (+1); each client's negative class (-1) is the class of
    the bucket it draws. Per client, the positive allocation is an equal
    disjoint share of the merged-class pool; a holdout fraction of each
    side is split off for testing before the train count is capped at n0,
    so every client trains on exactly N positives and N negatives with
    N = min(n0, share - holdout part).
    """
    if clients < 1:
        raise ConfigError(f"need at least one client, got {clients}")
    if n0 < 1:
        raise ConfigError(f"n0 must be >= 1, got {n0}")
    if not 0 <= holdout < 1:
        raise ConfigError(f"holdout must be in [0, 1), got {holdout}")
    k = corpus.n_classes
    if k < 6:
        raise ConfigError(f"corpus has {k} classes; partitioning needs at least 6")
    rng = substream(seed, "partition")

    classes = np.array(corpus.classes)
    n_merge = int(np.floor(MERGE_FRACTION * k))
    merged = set(int(c) for c in rng.choice(classes, size=n_merge, replace=False))
    rest = [int(c) for c in classes if c not in merged]
    if not rest:
        raise ConfigError("no classes left outside the merged positive class")

    pos_pool = np.flatnonzero(np.isin(corpus.labels, list(merged)))
    pos_pool = pos_pool[rng.permutation(len(pos_pool))]
    share = len(pos_pool) // clients
    if share < 1:
        raise ConfigError(
            f"{len(pos_pool)} merged-class samples cannot give {clients} clients one each"
        )
    n_test = int(np.floor(holdout * share))
    n_train = min(n0, share - n_test)
    if n_train < 1:
        raise ConfigError(f"per-client share {share} leaves no train samples after holdout")

    # Buckets: same-size single-class chunks; a client's negative side is one bucket.
    bucket_size = n_train + n_test
    buckets: list[tuple[int, np.ndarray]] = []
    for c in rest:
        idx = np.flatnonzero(corpus.labels == c)
        idx = idx[rng.permutation(len(idx))]
        for start in range(0, len(idx) - bucket_size + 1, bucket_size):
            buckets.append((c, idx[start : start + bucket_size]))
    if len(buckets) < clients:
        raise ConfigError(
            f"only {len(buckets)} buckets of size {bucket_size} for {clients} clients"
        )
    bucket_order = rng.permutation(len(buckets))

    d = corpus.d
    perm = rng.permutation(d)
    d_g = (d + 1) // 2  # odd d: the global block gets the extra coordinate
    global_index = np.sort(perm[:d_g])
    local_index = np.sort(perm[d_g:])

    def make_sample(row_index: int, y: float) -> Sample:
        x = corpus.features[row_index]
        return Sample(x[global_index], x[local_index], y)

    client_data = []
    for i in range(clients):
        block = pos_pool[i * share : (i + 1) * share]
        train_pos = block[:n_train]
        test_pos = block[n_train : n_train + n_test]
        neg_class, bucket = buckets[bucket_order[i]]
        train_neg = bucket[:n_train]
        test_neg = bucket[n_train : n_train + n_test]
        train = [make_sample(j, 1.0) for j in train_pos] + [
            make_sample(j, -1.0) for j in train_neg
        ]
        test = [make_sample(j, 1.0) for j in test_pos] + [make_sample(j, -1.0) for j in test_neg]
        lines = corpus.line_numbers
        client_data.append(
            ClientData(
                train=train,
                test=test,
                task=(tuple(sorted(merged)), neg_class),
                train_lines=[int(lines[j]) for j in np.concatenate([train_pos, train_neg])],
                test_lines=[int(lines[j]) for j in np.concatenate([test_pos, test_neg])],
            )
        )
    return FederatedDataset(
        clients=client_data,
        d_global=d_g,
        d_locals=[d - d_g] * clients,
        global_index=global_index,
        local_index=local_index,
    )


def write_partition_manifest(dataset: FederatedDataset, path: str | Path) -> None:
    """Line-oriented audit record: one 'client_id line_number' per sample."""
    rows = []
    for i, client in enumerate(dataset.clients):
        if not client.train_lines and client.train:
            raise ConfigError("dataset has no source line numbers; nothing to audit")
        for line in client.train_lines + client.test_lines:
            rows.append(f"{i} {line}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Synthetic generators


def gen_example2(
    clients: int,
    dim: int,
    v: np.ndarray,
    noise: float,
    rounds: int,
    seed: int,
    *,
    u_global: np.ndarray | None = None,
    test_rounds: int = 200,
) -> FederatedDataset:
    """Sign-split population: y = (u_global + u_i) . x (+ noise), u_i = +-v.

    The first half of the clients uses +v, the second half -v, so the best
    single global model is u_global alone and every client retains an
    irreducible (v . x)^2 loss without a local model. Covariates are
    i.i.d. standard normal and the global and local feature blocks are the
    same coordinates duplicated.
    """
    if clients % 2 != 0:
        raise ConfigError(f"clients must be even, got {clients}")
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise ConfigError(f"v must have shape ({dim},), got {v.shape}")
    ug = np.zeros(dim) if u_global is None else np.asarray(u_global, dtype=float)
    rng = substream(seed, "example2")
    total = rounds + test_rounds
    xs = rng.standard_normal((clients, total, dim))
    eps = rng.standard_normal((clients, total)) * noise if noise > 0 else np.zeros((clients, total))

    streams: list[list[Sample]] = []
    client_data: list[ClientData] = []
    for i in range(clients):
        u_i = v if i < clients // 2 else -v
        w = ug + u_i
        ys = xs[i] @ w + eps[i]
        samples = [Sample(xs[i, t], xs[i, t], float(ys[t])) for t in range(total)]
        streams.append(samples[:rounds])
        client_data.append(
            ClientData(train=samples[:rounds], test=samples[rounds:], task=("sign-split", i < clients // 2))
        )
    return FederatedDataset(
        clients=client_data,
        d_global=dim,
        d_locals=[dim] * clients,
        pregenerated=streams,
    )


def gen_appendixc(rounds: int, seed: int) -> FederatedDataset:
    """Single-client stream of complementary noisy views with label 1.

    With latents a, b ~ N(0,1) and eps ~ N(0, 0.25), the global view is
    [a + eps, b] and the local view [1 - a, 1 - b]; the unique zero-loss
    pair is global [0, 1] with local [0, 1], reachable only if both models
    move together. Feeds the three-way learner comparison.
    """
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    rng = substream(seed, "appendixc")
    a = rng.standard_normal(rounds)
    b = rng.standard_normal(rounds)
    eps = rng.normal(0.0, 0.5, rounds)
    samples = [
        Sample(np.array([a[t] + eps[t], b[t]]), np.array([1.0 - a[t], 1.0 - b[t]]), 1.0)
        for t in range(rounds)
    ]
    return FederatedDataset(
        clients=[ClientData(train=samples, test=[], task=("complementary-views",))],
        d_global=2,
        d_locals=[2],
        pregenerated=[samples],
    )
