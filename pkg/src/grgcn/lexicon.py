"""Word embeddings, relation vocabulary and the sense/lemma lexicon."""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .numerics import ParamRegistry, Tensor, constant, mean_rows, stack, take

UNK = "<unk>"


class LexiconError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


_SPLIT_RE = re.compile(r"[\s_\-.]+")
_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


def tokenize_relation_label(label: str) -> list[str]:
    """``"position_held"`` → ``["position", "held"]``; also splits camelCase, hyphens and dots."""
    words = []
    for chunk in _SPLIT_RE.split(label):
        words.extend(_CAMEL_RE.split(chunk))
    return [w.lower() for w in words if w]


class EmbeddingTable:
    """Word → vector lookup backed by a (possibly trainable) matrix.

    ``unk_policy`` is one of ``"zero"``, ``"random"`` (a fixed vector per word,
    seeded) or ``"learned"`` (a trainable ``<unk>`` row appended to the matrix).
    """

    def __init__(self, words: Sequence[str], matrix: np.ndarray, trainable: bool = True,
                 unk_policy: str = "learned", seed: int = 0):
        if unk_policy not in ("zero", "random", "learned"):
            raise ValueError(f"unknown unk_policy {unk_policy!r}")
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError(f"matrix shape {matrix.shape} does not match {len(words)} words")
        self.dim = matrix.shape[1]
        self.vocab: dict[str, int] = {}
        for w in words:
            self.vocab.setdefault(w.lower(), len(self.vocab))
        if len(self.vocab) != len(words):
            raise ValueError("vocabulary words must be unique after case folding")
        self.unk_policy = unk_policy
        self.seed = seed
        self.trainable = trainable
        if unk_policy == "learned":
            rng = np.random.default_rng(seed)
            matrix = np.vstack([matrix, rng.normal(0.0, 0.1, self.dim)])
        self.matrix = Tensor(matrix, requires_grad=trainable, name="word_emb")

    def register(self, params: ParamRegistry, name: str = "word_emb") -> None:
        """Make the matrix a named trainable parameter (no-op when frozen)."""
        if self.trainable:
            self.matrix = params.add(name, self.matrix.data)

    @property
    def words(self) -> list[str]:
        return list(self.vocab)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.vocab

    def _unk_vector(self, word: str) -> Tensor:
        if self.unk_policy == "zero":
            return constant(np.zeros(self.dim))
        seed = zlib.crc32(word.lower().encode("utf-8")) ^ self.seed
        return constant(np.random.default_rng(seed).normal(0.0, 0.1, self.dim))

    def index(self, word: str) -> int | None:
        i = self.vocab.get(word.lower())
        if i is None and self.unk_policy == "learned":
            return len(self.vocab)
        return i

    def lookup(self, word: str) -> Tensor:
        i = self.index(word)
        return self._unk_vector(word) if i is None else take(self.matrix, i)

    def rows(self, words: Sequence[str]) -> Tensor:
        """Stacked lookups, as one gather when every word has a row."""
        idx = [self.index(w) for w in words]
        if all(i is not None for i in idx):
            return take(self.matrix, idx)
        return stack([self.lookup(w) for w in words])

    def phrase(self, text: str) -> Tensor:
        """Mean vector of a multi-word phrase (lemma or entity label)."""
        words = text.replace("_", " ").split()
        if not words:
            return constant(np.zeros(self.dim))
        return mean_rows(self.rows(words))


def random_embeddings(words: Sequence[str], dim: int, seed: int, scale: float = 0.1) -> np.ndarray:
    return np.random.default_rng(seed).normal(0.0, scale, (len(words), dim))


def load_embeddings(path, expected_dim: int, fallback_vocab: Sequence[str] | None = None,
                    seed: int = 0, unk_policy: str = "learned") -> EmbeddingTable:
    """Read ``word v1 ... vd`` lines.  A missing file with ``fallback_vocab`` yields seeded random vectors."""
    path = Path(path) if path is not None else None
    if path is None or not path.exists():
        if fallback_vocab is None:
            raise FileNotFoundError(f"embedding file {path} not found")
        vocab = list(dict.fromkeys(w.lower() for w in fallback_vocab))
        return EmbeddingTable(vocab, random_embeddings(vocab, expected_dim, seed), unk_policy=unk_policy, seed=seed)
    words, rows = [], []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) - 1 != expected_dim:
                raise LexiconError(f"expected {expected_dim} values, got {len(parts) - 1}", lineno)
            word = parts[0].lower()
            if word in seen:
                continue  # first occurrence wins, as with cased GloVe dumps
            seen.add(word)
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise LexiconError("non-numeric vector entry", lineno) from None
            words.append(word)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), expected_dim)
    return EmbeddingTable(words, matrix, unk_policy=unk_policy, seed=seed)


def extend_table(table: EmbeddingTable, words: Iterable[str], seed: int) -> EmbeddingTable:
    """A copy of ``table`` with rows appended (seeded random) for words it lacks."""
    extra = [w for w in dict.fromkeys(x.lower() for x in words) if w not in table.vocab]
    base = table.matrix.data[:len(table.vocab)]
    matrix = np.vstack([base, random_embeddings(extra, table.dim, seed)]) if extra else base
    return EmbeddingTable(table.words + extra, matrix, table.trainable, table.unk_policy, seed)


class RelationVocabulary:
    """Relation id → trainable row, with a trailing learned UNK row."""

    def __init__(self, relations: Sequence[str], dim: int, seed: int, labels: dict[str, str] | None = None):
        self.relations: dict[str, int] = {r: i for i, r in enumerate(dict.fromkeys(relations))}
        self.labels = {r: (labels or {}).get(r, r) for r in self.relations}
        self.dim = dim
        rng = np.random.default_rng(seed)
        self.matrix = Tensor(rng.normal(0.0, 0.1, (len(self.relations) + 1, dim)), requires_grad=True,
                             name="rel_emb")

    def register(self, params: ParamRegistry, name: str = "rel_emb") -> None:
        self.matrix = params.add(name, self.matrix.data)

    @property
    def unk_index(self) -> int:
        return len(self.relations)

    def index(self, relation: str) -> int:
        return self.relations.get(relation, self.unk_index)

    def __len__(self) -> int:
        return len(self.relations)

    def words(self, relation: str) -> list[str]:
        return tokenize_relation_label(self.labels.get(relation, relation))


@dataclass(frozen=True)
class Sense:
    sense_id: str
    lemmas: tuple[str, ...]


@dataclass
class SenseLexicon:
    entries: dict[str, list[Sense]] = field(default_factory=dict)

    def senses_of(self, word: str) -> list[Sense]:
        found = self.entries.get(word.lower())
        if found:
            return found
        return [Sense(word.lower(), (word.lower(),))]

    def words(self) -> set[str]:
        """Every token occurring as a headword or inside a lemma."""
        out = set(self.entries)
        for senses in self.entries.values():
            for s in senses:
                for lemma in s.lemmas:
                    out.update(lemma.replace("_", " ").split())
        return out


def senses_of(lex: SenseLexicon, word: str) -> list[Sense]:
    return lex.senses_of(word)


def parse_lexicon(text: str) -> SenseLexicon:
    """Records ``word: sense_id = lemma, lemma`` one sense per line, blank line between words."""
    entries: dict[str, list[Sense]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if not line:
            current = None
            continue
        m = re.match(r"^([^:=]+):\s*([^=]+?)\s*=\s*(.+)$", line)
        if not m:
            raise LexiconError("expected 'word: sense_id = lemma, lemma'", lineno)
        word, sense_id, lemma_text = m.group(1).strip().lower(), m.group(2).strip(), m.group(3)
        lemmas = tuple(x.strip().lower() for x in lemma_text.split(","))
        if not word or " " in word or not all(lemmas):
            raise LexiconError("empty word or lemma", lineno)
        if current is None:
            if word in entries:
                raise LexiconError(f"duplicate record for word {word!r}", lineno)
            entries[word] = []
            current = word
        elif word != current:
            raise LexiconError(f"word {word!r} inside the record of {current!r}", lineno)
        entries[word].append(Sense(sense_id, lemmas))
    return SenseLexicon(entries)


def load_lexicon(path) -> SenseLexicon:
    return parse_lexicon(Path(path).read_text(encoding="utf-8"))


def dump_lexicon(lex: SenseLexicon) -> str:
    blocks = []
    for word, senses in lex.entries.items():
        blocks.append("\n".join(f"{word}: {s.sense_id} = {', '.join(s.lemmas)}" for s in senses))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
