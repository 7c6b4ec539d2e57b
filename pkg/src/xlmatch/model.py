"""Siamese question matcher: shared conv/LSTM/BiLSTM encoder with a
difference/product MLP head.

Both questions of a pair are embedded and passed through one shared
encoder. The encoder concatenates up to three branch outputs into the
representation vector: per kernel size, a 1-D convolution over the
embedded sequence followed by global max pooling over time; the final
hidden state of an LSTM; and the concatenated final forward/backward
states of a BiLSTM. The head takes the element-wise absolute difference
and element-wise product of the two representations, concatenates them,
and feeds two affine/batch-norm/ReLU/dropout blocks into a single
sigmoid output.

Everything is deterministic given the config seed: parameters are
initialized from a dedicated numpy generator and training shuffles with
another, so repeated runs produce bit-identical weights files.
"""

from __future__ import annotations

import copy
import json
import logging
import struct
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .corpus import Corpus, MintedPair, PairRecord
from .embeddings import EmbeddingTable, EncodedSequence, encode_sequence
from .errors import ConfigError, ModelIOError, ValidationError
from .evalkit import PredictionRecord
from .textprep import RepairTable, build_repair_table, tokenize

logger = logging.getLogger(__name__)

_MAGIC = b"XLMATCH1"


@dataclass
class ModelConfig:
    """Architecture and training hyperparameters.

    At least one encoder branch must be enabled. hidden_size values of
    32/64/128 are the intended operating range; smaller values are legal
    (miniature configs are useful for testing).
    """

    use_conv: bool = True
    use_lstm: bool = True
    use_bilstm: bool = True
    kernel_sizes: tuple[int, ...] = (1, 2, 3)
    conv_filters: int = 64
    hidden_size: int = 64
    mlp_hidden: tuple[int, int] = (128, 64)
    dropout_rate: float = 0.2
    max_len: int = 60
    embed_dim: int = 300
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    patience: int = 3
    abs_difference: bool = True
    train_embeddings: bool = True

    def __post_init__(self):
        self.kernel_sizes = tuple(int(k) for k in self.kernel_sizes)
        self.mlp_hidden = tuple(int(h) for h in self.mlp_hidden)

    def validate(self) -> None:
        if not (self.use_conv or self.use_lstm or self.use_bilstm):
            raise ConfigError("at least one of use_conv/use_lstm/use_bilstm must be enabled")
        if self.use_conv:
            if not self.kernel_sizes:
                raise ConfigError("kernel_sizes must be non-empty when use_conv is set")
            if any(k < 1 for k in self.kernel_sizes):
                raise ConfigError("kernel sizes must be >= 1")
            if max(self.kernel_sizes) > self.max_len:
                raise ConfigError(
                    f"largest kernel ({max(self.kernel_sizes)}) exceeds max_len ({self.max_len})"
                )
            if self.conv_filters < 1:
                raise ConfigError("conv_filters must be >= 1")
        if self.hidden_size < 1:
            raise ConfigError("hidden_size must be >= 1")
        if len(self.mlp_hidden) != 2 or any(h < 1 for h in self.mlp_hidden):
            raise ConfigError("mlp_hidden must be two positive layer widths")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1")
        if self.embed_dim < 1:
            raise ConfigError("embed_dim must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    @property
    def rep_dim(self) -> int:
        """Length of the representation vector for this configuration."""
        dim = 0
        if self.use_conv:
            dim += len(self.kernel_sizes) * self.conv_filters
        if self.use_lstm:
            dim += self.hidden_size
        if self.use_bilstm:
            dim += 2 * self.hidden_size
        return dim

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)


class _SiameseNet(nn.Module):
    """The shared encoder and matching head; forward returns logits."""

    def __init__(self, config: ModelConfig, vocab_rows: int, pad_index: int):
        super().__init__()
        self.config = config
        self.pad_index = pad_index
        self.embedding = nn.Embedding(vocab_rows, config.embed_dim, padding_idx=pad_index)
        if not config.train_embeddings:
            self.embedding.weight.requires_grad_(False)
        if config.use_conv:
            self.convs = nn.ModuleList(
                [nn.Conv1d(config.embed_dim, config.conv_filters, k) for k in config.kernel_sizes]
            )
        if config.use_lstm:
            self.lstm = nn.LSTM(config.embed_dim, config.hidden_size, batch_first=True)
        if config.use_bilstm:
            self.bilstm = nn.LSTM(
                config.embed_dim, config.hidden_size, batch_first=True, bidirectional=True
            )
        h1, h2 = config.mlp_hidden
        self.head = nn.Sequential(
            nn.Linear(2 * config.rep_dim, h1),
            nn.BatchNorm1d(h1),
            nn.ReLU(),
            nn.Dropout(config.dropout_rate),
            nn.Linear(h1, h2),
            nn.BatchNorm1d(h2),
            nn.ReLU(),
            nn.Dropout(config.dropout_rate),
            nn.Linear(h2, 1),
        )

    @property
    def head_in_features(self) -> int:
        return self.head[0].in_features

    def encode(self, indices: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Representation vectors for a batch of index sequences."""
        embedded = self.embedding(indices)  # (B, L, E)
        parts = []
        if self.config.use_conv:
            swapped = embedded.transpose(1, 2)  # (B, E, L)
            for conv in self.convs:
                parts.append(conv(swapped).max(dim=2).values)
        # pack_padded_sequence rejects zero lengths; all-pad rows run over a
        # single zero embedding instead, which leaves their state finite.
        clamped = lengths.clamp(min=1).cpu()
        if self.config.use_lstm:
            packed = nn.utils.rnn.pack_padded_sequence(
                embedded, clamped, batch_first=True, enforce_sorted=False
            )
            _, (h_n, _) = self.lstm(packed)
            parts.append(h_n[0])
        if self.config.use_bilstm:
            packed = nn.utils.rnn.pack_padded_sequence(
                embedded, clamped, batch_first=True, enforce_sorted=False
            )
            _, (h_n, _) = self.bilstm(packed)
            parts.append(torch.cat([h_n[0], h_n[1]], dim=1))
        return torch.cat(parts, dim=1)

    def forward(
        self,
        indices_1: torch.Tensor,
        lengths_1: torch.Tensor,
        indices_2: torch.Tensor,
        lengths_2: torch.Tensor,
    ) -> torch.Tensor:
        r1 = self.encode(indices_1, lengths_1)
        r2 = self.encode(indices_2, lengths_2)
        diff = (r1 - r2).abs() if self.config.abs_difference else r1 - r2
        prod = r1 * r2
        return self.head(torch.cat([diff, prod], dim=1)).squeeze(1)


def _fill_uniform(param: torch.Tensor, bound: float, rng: np.random.Generator) -> None:
    values = rng.uniform(-bound, bound, size=tuple(param.shape))
    with torch.no_grad():
        param.copy_(torch.from_numpy(values).to(param.dtype))


def _init_parameters(net: _SiameseNet, rng: np.random.Generator) -> None:
    """Deterministically initialize all parameters except the embedding.

    Mirrors the usual fan-in-scaled uniform schemes but draws from a
    seeded numpy generator so initialization does not depend on the torch
    RNG stream or version.
    """
    for module in net.modules():
        if isinstance(module, nn.Linear):
            bound = 1.0 / np.sqrt(module.in_features)
            _fill_uniform(module.weight, bound, rng)
            if module.bias is not None:
                _fill_uniform(module.bias, bound, rng)
        elif isinstance(module, nn.Conv1d):
            fan_in = module.in_channels * module.kernel_size[0]
            bound = 1.0 / np.sqrt(fan_in)
            _fill_uniform(module.weight, bound, rng)
            if module.bias is not None:
                _fill_uniform(module.bias, bound, rng)
        elif isinstance(module, nn.LSTM):
            bound = 1.0 / np.sqrt(module.hidden_size)
            for name, param in sorted(module.named_parameters(recurse=False)):
                _fill_uniform(param, bound, rng)
        elif isinstance(module, nn.BatchNorm1d):
            with torch.no_grad():
                module.weight.fill_(1.0)
                module.bias.fill_(0.0)
            module.reset_running_stats()


@dataclass
class TrainedModel:
    """A (possibly untrained) matcher plus everything prediction needs.

    The model file is self-contained: the vocabulary and explicit fixes
    travel with the weights so prediction does not need the original
    embedding file.
    """

    config: ModelConfig
    net: _SiameseNet
    table: EmbeddingTable
    repair: RepairTable
    training_log: list = field(default_factory=list)

    def encode_sentence(self, sentence: str) -> EncodedSequence:
        return encode_sequence(tokenize(sentence), self.table, self.repair, self.config.max_len)


def build_model(
    config: ModelConfig,
    table: EmbeddingTable,
    explicit_fixes: dict[str, str] | None = None,
) -> TrainedModel:
    """Construct an untrained matcher over an embedding table.

    Embedding rows are copied from the table; the padding row stays
    frozen at zero. Explicit fixes whose canonical form is missing from
    the table are dropped with a warning.
    """
    config.validate()
    if config.embed_dim != table.dim:
        raise ConfigError(
            f"config embed_dim ({config.embed_dim}) does not match table dim ({table.dim})"
        )
    net = _SiameseNet(config, vocab_rows=table.vectors.shape[0], pad_index=table.pad_index)
    rng = np.random.default_rng(config.seed)
    _init_parameters(net, rng)
    with torch.no_grad():
        net.embedding.weight.copy_(torch.from_numpy(table.vectors))
    repair = build_repair_table(explicit_fixes or {}, table.vocab)
    # Re-anchor the table on the live embedding weights so encoding and
    # inspection always see the current vectors.
    live = EmbeddingTable(
        dim=table.dim,
        vocab=dict(table.vocab),
        vectors=net.embedding.weight.detach().numpy(),
        pad_index=table.pad_index,
        oov_index=table.oov_index,
    )
    return TrainedModel(config=config, net=net, table=live, repair=repair)


def _check_sequence(seq: EncodedSequence, max_len: int) -> None:
    if len(seq.indices) != max_len:
        raise ValidationError(
            f"encoded sequence has length {len(seq.indices)}, model expects {max_len}"
        )


def represent(model: TrainedModel, seq: EncodedSequence) -> np.ndarray:
    """The encoder's representation vector for one sequence (inference
    mode, deterministic)."""
    _check_sequence(seq, model.config.max_len)
    model.net.eval()
    with torch.no_grad():
        indices = torch.tensor([seq.indices], dtype=torch.int64)
        lengths = torch.tensor([seq.true_length], dtype=torch.int64)
        rep = model.net.encode(indices, lengths)
    return rep[0].numpy().copy()


def match_probability(model: TrainedModel, s1: EncodedSequence, s2: EncodedSequence) -> float:
    """Probability that the two encoded questions match.

    Symmetric in its arguments when the config uses the absolute
    difference (the default).
    """
    _check_sequence(s1, model.config.max_len)
    _check_sequence(s2, model.config.max_len)
    model.net.eval()
    with torch.no_grad():
        i1 = torch.tensor([s1.indices], dtype=torch.int64)
        i2 = torch.tensor([s2.indices], dtype=torch.int64)
        l1 = torch.tensor([s1.true_length], dtype=torch.int64)
        l2 = torch.tensor([s2.true_length], dtype=torch.int64)
        logit = model.net(i1, l1, i2, l2)
    return float(torch.sigmoid(logit)[0])


def _pair_sentences(record) -> tuple[str, str]:
    if isinstance(record, MintedPair):
        return record.spanish_1, record.spanish_2
    if isinstance(record, PairRecord):
        return record.q1_src, record.q2_src
    raise TypeError(f"cannot predict on {type(record).__name__}")


def _encode_corpus(model: TrainedModel, pairs, require_labels: bool):
    n = len(pairs)
    max_len = model.config.max_len
    i1 = np.empty((n, max_len), dtype=np.int64)
    i2 = np.empty((n, max_len), dtype=np.int64)
    l1 = np.empty(n, dtype=np.int64)
    l2 = np.empty(n, dtype=np.int64)
    y = np.zeros(n, dtype=np.float32)
    for row, record in enumerate(pairs):
        s1, s2 = _pair_sentences(record)
        e1 = model.encode_sentence(s1)
        e2 = model.encode_sentence(s2)
        i1[row], l1[row] = e1.indices, e1.true_length
        i2[row], l2[row] = e2.indices, e2.true_length
        label = getattr(record, "label", None)
        if label is None:
            if require_labels:
                raise ValidationError(f"pair {row + 1} has no label; training needs labeled pairs")
        else:
            y[row] = label
    return (
        torch.from_numpy(i1),
        torch.from_numpy(l1),
        torch.from_numpy(i2),
        torch.from_numpy(l2),
        torch.from_numpy(y),
    )


def _batch_slices(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    # Batch norm cannot normalize a single sample; fold a trailing
    # singleton into the previous batch.
    if len(batches) >= 2 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def _mean_loss(net: _SiameseNet, data, batch_size: int) -> float:
    i1, l1, i2, l2, y = data
    loss_fn = nn.BCEWithLogitsLoss(reduction="sum")
    net.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(y), batch_size):
            sl = slice(start, start + batch_size)
            logits = net(i1[sl], l1[sl], i2[sl], l2[sl])
            total += float(loss_fn(logits, y[sl]))
    return total / len(y)


def train(
    model: TrainedModel,
    pairs: Corpus | Sequence[MintedPair],
    val: Corpus | None = None,
    config: ModelConfig | None = None,
) -> TrainedModel:
    """Fit the matcher by minimizing mean binary cross-entropy.

    Mini-batch Adam over shuffled epochs; per-epoch train (and, when a
    validation corpus is given, validation) loss goes to the training
    log. The returned weights are those of the best epoch by validation
    loss (training loss when no validation set is given); early stopping
    kicks in after ``patience`` epochs without improvement. Deterministic
    given the config seed.
    """
    config = config or model.config
    config.validate()
    if len(pairs) == 0:
        raise ValidationError("training corpus is empty")
    if len(pairs) == 1:
        raise ValidationError("training needs at least 2 pairs (batch normalization)")
    if config.batch_size < 2:
        raise ConfigError("training batch_size must be >= 2 (batch normalization)")

    data = _encode_corpus(model, pairs, require_labels=True)
    val_data = None
    if val is not None and len(val) > 0:
        val_data = _encode_corpus(model, val, require_labels=True)

    net = model.net
    previous_threads = torch.get_num_threads()
    torch.set_num_threads(1)  # keeps reductions bit-stable run to run
    try:
        torch.manual_seed(config.seed)
        shuffle_rng = np.random.default_rng(config.seed)
        optimizer = torch.optim.Adam(
            (p for p in net.parameters() if p.requires_grad), lr=config.learning_rate
        )
        loss_fn = nn.BCEWithLogitsLoss(reduction="mean")
        i1, l1, i2, l2, y = data

        best_monitor = float("inf")
        best_state = None
        stale = 0
        model.training_log.clear()
        for epoch in range(1, config.epochs + 1):
            net.train()
            order = shuffle_rng.permutation(len(y))
            epoch_total = 0.0
            for batch in _batch_slices(order, config.batch_size):
                idx = torch.from_numpy(batch)
                optimizer.zero_grad()
                logits = net(i1[idx], l1[idx], i2[idx], l2[idx])
                loss = loss_fn(logits, y[idx])
                loss.backward()
                optimizer.step()
                epoch_total += float(loss.detach()) * len(batch)
            train_loss = epoch_total / len(y)
            val_loss = _mean_loss(net, val_data, config.batch_size) if val_data else None
            model.training_log.append(
                {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
            )
            monitor = val_loss if val_data else train_loss
            if monitor < best_monitor:
                best_monitor = monitor
                best_state = copy.deepcopy(net.state_dict())
                stale = 0
            else:
                stale += 1
                if config.patience > 0 and stale >= config.patience:
                    logger.info("early stop after epoch %d (no improvement for %d epochs)",
                                epoch, stale)
                    break
        if best_state is not None:
            net.load_state_dict(best_state)
    finally:
        torch.set_num_threads(previous_threads)
    return model


def predict_batch(model: TrainedModel, pairs: Corpus | Sequence) -> list[PredictionRecord]:
    """Match probabilities for every pair, in input order."""
    if len(pairs) == 0:
        return []
    i1, l1, i2, l2, _ = _encode_corpus(model, pairs, require_labels=False)
    net = model.net
    net.eval()
    probs = []
    with torch.no_grad():
        for start in range(0, len(pairs), model.config.batch_size):
            sl = slice(start, start + model.config.batch_size)
            logits = net(i1[sl], l1[sl], i2[sl], l2[sl])
            probs.extend(torch.sigmoid(logits).tolist())
    records = []
    for row, record in enumerate(pairs):
        pair_id = getattr(record, "id", None) or f"pair-{row + 1}"
        records.append(PredictionRecord(pair_id=pair_id, probability=float(probs[row])))
    return records


def save_model(model: TrainedModel, path) -> None:
    """Write the model as a self-describing container.

    Layout: magic, 8-byte little-endian header length, a JSON header
    (config, vocabulary, explicit fixes, training log, parameter
    manifest), then the raw little-endian parameter arrays in manifest
    order. Identical weights produce identical bytes.
    """
    if sys.byteorder != "little":
        raise ModelIOError("model files are little-endian only")
    state = model.net.state_dict()
    manifest = []
    payload = []
    for name in sorted(state):
        array = state[name].detach().cpu().contiguous().numpy()
        manifest.append({"name": name, "shape": list(array.shape), "dtype": str(array.dtype)})
        payload.append(array.tobytes())
    vocab_tokens = [""] * len(model.table.vocab)
    for token, index in model.table.vocab.items():
        vocab_tokens[index] = token
    header = {
        "format": "xlmatch-model",
        "format_version": 1,
        "config": model.config.as_dict(),
        "vocab": vocab_tokens,
        "explicit_fixes": dict(model.repair.explicit_fixes),
        "training_log": model.training_log,
        "params": manifest,
    }
    blob = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_MAGIC)
        handle.write(struct.pack("<Q", len(blob)))
        handle.write(blob)
        for chunk in payload:
            handle.write(chunk)


def load_model(path) -> TrainedModel:
    """Read a model container written by :func:`save_model`."""
    if sys.byteorder != "little":
        raise ModelIOError("model files are little-endian only")
    data = Path(path).read_bytes()
    if len(data) < len(_MAGIC) + 8 or data[: len(_MAGIC)] != _MAGIC:
        raise ModelIOError(f"{path}: not a model file")
    (header_len,) = struct.unpack_from("<Q", data, len(_MAGIC))
    body_start = len(_MAGIC) + 8
    if len(data) < body_start + header_len:
        raise ModelIOError(f"{path}: truncated header")
    try:
        header = json.loads(data[body_start : body_start + header_len].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        vocab_tokens = header["vocab"]
        manifest = header["params"]
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as exc:
        raise ModelIOError(f"{path}: corrupt header ({exc})") from None

    vocab = {token: i for i, token in enumerate(vocab_tokens)}
    pad_index = len(vocab_tokens)
    oov_index = pad_index + 1
    net = _SiameseNet(config, vocab_rows=pad_index + 2, pad_index=pad_index)

    offset = body_start + header_len
    state = {}
    for entry in manifest:
        shape = tuple(entry["shape"])
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(data):
            raise ModelIOError(f"{path}: truncated parameter data at {entry['name']}")
        array = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape)
        state[entry["name"]] = torch.from_numpy(array.copy())
        offset += nbytes
    if offset != len(data):
        raise ModelIOError(f"{path}: {len(data) - offset} unexpected trailing bytes")
    try:
        net.load_state_dict(state)
    except RuntimeError as exc:
        raise ModelIOError(f"{path}: parameter mismatch ({exc})") from None

    table = EmbeddingTable(
        dim=config.embed_dim,
        vocab=vocab,
        vectors=net.embedding.weight.detach().numpy(),
        pad_index=pad_index,
        oov_index=oov_index,
    )
    repair = RepairTable(explicit_fixes=header.get("explicit_fixes", {}), vocabulary=vocab)
    return TrainedModel(
        config=config,
        net=net,
        table=table,
        repair=repair,
        training_log=list(header.get("training_log", [])),
    )
