"""Build word-table JSON files from a language model's next-token output.

A *word table* gives a vocabulary, an initial next-word distribution for a
prompt, and one transition row per vocabulary word (order-1, with every
context prefixed by the prompt).  The table format is::

    {"vocab": [...], "initial": [...], "transitions": {word: {word: p}}}

Construction: query the model once at the prompt, keep the ``J`` most
probable distinct words (ties broken by model-native token order), then
query once per kept word at ``"<prompt> <word>"``; every row is restricted
to the kept vocabulary and renormalized.  A companion CSV traces next-word
entropy along the greedy chain for ``M`` positions.

Three model sources are supported:

``dummy`` / ``dummy:<size>``
    A uniform distribution over ``<size>`` synthetic words (default 128);
    no network or model weights needed.
``http://...`` / ``https://...``
    A completion endpoint.  Each query POSTs ``{"context": str,
    "top_k": int|null}`` and expects ``{"tokens": [str], "logprobs":
    [float]}`` in model-native order.
``hf:<path-or-name>``
    Local causal-LM weights loaded through ``transformers`` (an optional
    dependency; install the ``local-models`` extra).
"""

from __future__ import annotations

import csv
import json
import math
import urllib.error
import urllib.request
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

__all__ = [
    "ExtractionError", "Source", "DummyUniformSource", "HttpLogprobSource",
    "LocalWeightsSource", "make_source", "extract_table",
]

# Leading markers that subword tokenizers use to mean "preceded by a space".
_SPACE_MARKERS = "Ġ▁"  # Ġ (byte-BPE), ▁ (sentencepiece)


class ExtractionError(RuntimeError):
    """Raised when a model source fails or cannot supply a usable table."""


class Source(Protocol):
    """Anything that maps a text context to a next-token distribution."""

    def next_distribution(self, context: str) -> tuple[list[str], np.ndarray]:
        """Candidate tokens and their probabilities, model-native order.

        Probabilities must be non-negative; they need not sum to one
        (a top-k source returns partial mass).
        """
        ...


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------

class DummyUniformSource:
    """Uniform next-word distribution over a fixed synthetic vocabulary."""

    def __init__(self, size: int = 128) -> None:
        if size < 2:
            raise ExtractionError(f"dummy vocabulary size {size} < 2")
        width = len(str(size))
        self._tokens = [f"w{i:0{width}d}" for i in range(1, size + 1)]
        self._probs = np.full(size, 1.0 / size)

    def next_distribution(self, context: str) -> tuple[list[str], np.ndarray]:
        return list(self._tokens), self._probs.copy()


class HttpLogprobSource:
    """Next-token log-probabilities from a completion endpoint.

    Each call POSTs ``{"context": ..., "top_k": ...}`` as JSON and expects
    a JSON reply ``{"tokens": [...], "logprobs": [...]}`` with the two
    lists aligned and in model-native token order.
    """

    def __init__(self, url: str, top_k: int | None = None,
                 timeout: float = 10.0) -> None:
        self.url = url
        self.top_k = top_k
        self.timeout = timeout

    def next_distribution(self, context: str) -> tuple[list[str], np.ndarray]:
        body = json.dumps({"context": context, "top_k": self.top_k})
        req = urllib.request.Request(
            self.url, data=body.encode(),
            headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.load(resp)
        except (urllib.error.URLError, TimeoutError, OSError,
                json.JSONDecodeError) as exc:
            raise ExtractionError(
                f"endpoint {self.url} failed: {exc}") from exc
        try:
            tokens = list(payload["tokens"])
            logprobs = np.asarray(payload["logprobs"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ExtractionError(
                f"endpoint {self.url} returned malformed payload: "
                f"{exc}") from exc
        if len(tokens) != logprobs.size:
            raise ExtractionError(
                f"endpoint {self.url} returned {len(tokens)} tokens but "
                f"{logprobs.size} logprobs")
        if logprobs.size and np.max(logprobs) > 1e-9:
            raise ExtractionError(
                f"endpoint {self.url} returned positive logprobs")
        return [str(t) for t in tokens], np.exp(logprobs)


class LocalWeightsSource:
    """Next-token distribution from local causal-LM weights.

    Imports ``transformers``/``torch`` lazily so the rest of the package
    works without them.
    """

    def __init__(self, model_path: str) -> None:
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:
            raise ExtractionError(
                "local-weights source needs the optional dependencies "
                "torch and transformers") from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_path)
            self._model = AutoModelForCausalLM.from_pretrained(model_path)
        except Exception as exc:  # transformers raises many types here
            raise ExtractionError(
                f"could not load model from {model_path}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        vocab_size = self._model.get_output_embeddings().weight.shape[0]
        self._tokens = [self._tokenizer.decode([i])
                        for i in range(vocab_size)]

    def next_distribution(self, context: str) -> tuple[list[str], np.ndarray]:
        ids = self._tokenizer.encode(context, return_tensors="pt")
        with self._torch.no_grad():
            logits = self._model(ids).logits[0, -1]
        z = logits.double().numpy()
        z -= z.max()
        probs = np.exp(z)
        probs /= probs.sum()
        return list(self._tokens), probs


def make_source(spec: str, timeout: float = 10.0) -> Source:
    """Turn a source string into a source object.

    ``dummy`` or ``dummy:<size>`` gives the uniform synthetic model;
    ``http://``/``https://`` URLs give the endpoint client; ``hf:<path>``
    loads local weights.
    """
    if spec == "dummy":
        return DummyUniformSource()
    if spec.startswith("dummy:"):
        try:
            size = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ExtractionError(f"bad dummy size in {spec!r}") from exc
        return DummyUniformSource(size)
    if spec.startswith(("http://", "https://")):
        return HttpLogprobSource(spec, timeout=timeout)
    if spec.startswith("hf:"):
        return LocalWeightsSource(spec[3:])
    raise ExtractionError(
        f"unknown source {spec!r}; expected 'dummy', 'dummy:<size>', "
        "'hf:<path>', or an http(s) URL")


# ---------------------------------------------------------------------------
# Table construction
# ---------------------------------------------------------------------------

def _word_probs(tokens: Sequence[str],
                probs: np.ndarray) -> tuple[list[str], dict[str, float]]:
    """Collapse raw tokens to clean words, keeping model-native order.

    Strips subword space markers and surrounding whitespace, drops
    candidates that are empty or contain internal whitespace, and sums
    the probability of tokens that map to the same word.  Returns the
    words in first-appearance (native) order and their total masses.
    """
    order: list[str] = []
    mass: dict[str, float] = {}
    for tok, p in zip(tokens, probs):
        word = tok.strip().lstrip(_SPACE_MARKERS).strip()
        if not word or any(ch.isspace() for ch in word):
            continue
        if word not in mass:
            order.append(word)
            mass[word] = 0.0
        mass[word] += float(p)
    return order, mass


def _row_for(source: Source, context: str,
             vocab: Sequence[str]) -> np.ndarray:
    """Restrict the model's next-word mass at ``context`` to ``vocab``."""
    tokens, probs = source.next_distribution(context)
    _, mass = _word_probs(tokens, probs)
    row = np.array([mass.get(w, 0.0) for w in vocab])
    total = row.sum()
    if total <= 0.0:
        raise ExtractionError(
            f"model puts no mass on the vocabulary after context "
            f"{context!r}")
    return row / total


def _entropy(row: np.ndarray) -> float:
    nz = row[row > 0.0]
    return float(-(nz * np.log(nz)).sum())


def extract_table(source: Source | str, prompt: str, J: int, M: int,
                  table_out: str | Path,
                  entropy_out: str | Path | None = None,
                  ) -> tuple[str, str | None]:
    """Extract a ``J``-word table at ``prompt`` and an ``M``-step entropy CSV.

    Returns ``(table_path, entropy_path)``; the second is ``None`` when no
    entropy CSV was requested.  Raises :class:`ExtractionError` if the
    model is unreachable or offers fewer than ``J`` distinct words.
    """
    if isinstance(source, str):
        source = make_source(source)
    if J < 2:
        raise ExtractionError(f"J must be at least 2, got {J}")
    if M < 1:
        raise ExtractionError(f"M must be at least 1, got {M}")

    tokens, probs = source.next_distribution(prompt)
    order, mass = _word_probs(tokens, probs)
    if len(order) < J:
        raise ExtractionError(
            f"model offers {len(order)} distinct words after the prompt, "
            f"fewer than the requested J={J}")
    native_index = {w: i for i, w in enumerate(order)}
    # Highest mass first; ties broken by model-native token order.
    vocab = sorted(order, key=lambda w: (-mass[w], native_index[w]))[:J]

    initial = np.array([mass[w] for w in vocab])
    initial /= initial.sum()
    transitions = {w: _row_for(source, f"{prompt} {w}", vocab)
                   for w in vocab}

    table = {
        "vocab": list(vocab),
        "initial": [float(p) for p in initial],
        "transitions": {w: {v: float(p) for v, p in zip(vocab, row)}
                        for w, row in transitions.items()},
    }
    table_path = Path(table_out)
    table_path.parent.mkdir(parents=True, exist_ok=True)
    with table_path.open("w") as fh:
        json.dump(table, fh, indent=2)
        fh.write("\n")

    entropy_path: str | None = None
    if entropy_out is not None:
        rows = []
        context_word = "<initial>"
        row = initial
        for position in range(1, M + 1):
            rows.append((position, context_word, repr(_entropy(row))))
            nxt = vocab[int(np.argmax(row))]  # greedy, first max on ties
            context_word = nxt
            row = transitions[nxt]
        ep = Path(entropy_out)
        ep.parent.mkdir(parents=True, exist_ok=True)
        with ep.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("position", "context", "entropy"))
            writer.writerows(rows)
        entropy_path = str(ep)

    return str(table_path), entropy_path


def _entropy_check(table_path: str | Path) -> list[float]:
    """Row entropies of a stored table (initial row first); a debug aid."""
    with Path(table_path).open() as fh:
        table = json.load(fh)
    vocab = table["vocab"]
    init = table["initial"]
    if isinstance(init, dict):
        init = [init[w] for w in vocab]
    out = [_entropy(np.asarray(init, dtype=float))]
    for w in vocab:
        row = table["transitions"][w]
        out.append(_entropy(np.array([row.get(v, 0.0) for v in vocab])))
    return out
