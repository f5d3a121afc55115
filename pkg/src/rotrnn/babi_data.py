"""Reading the bAbI question-answering corpus.

The task files are line oriented.  Each line starts with an integer id that
restarts at 1 for every new story.  Fact lines are ``ID sentence .`` and
question lines are ``ID question ?<TAB>answer<TAB>supporting ids``.  Every
question yields one :class:`Story` holding all facts seen since the last id
reset.

The corpus itself is not shipped; point ``ROTRNN_DATA`` (or ``data_dir``) at
an unpacked ``tasks_1-20_v1-2`` directory, for instance from
https://research.facebook.com/downloads/babi/ .
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DataError, ParseError

PAD_ID = 0

TASK_DESCRIPTIONS = {
    1: "Factoid QA with one supporting fact",
    2: "Factoid QA with two supporting facts",
    3: "Factoid QA with three supporting facts",
    4: "Two argument relations: subject vs. object",
    5: "Three argument relations",
    6: "Yes/No questions",
    7: "Counting",
    8: "Lists/Sets",
    9: "Simple Negation",
    10: "Indefinite Knowledge",
    11: "Basic coreference",
    12: "Conjunction",
    13: "Compound coreference",
    14: "Time manipulation",
    15: "Basic deduction",
    16: "Basic induction",
    17: "Positional reasoning",
    18: "Reasoning about size",
    19: "Path finding",
    20: "Reasoning about agent's motivation",
}

_TOKEN = re.compile(r"[^\s.?,]+|[.?,]")
_LINE = re.compile(r"^\s*(\d+)\s+(.*)$")


def tokenize(text: str) -> list[str]:
    """Whitespace split with '.', '?' and ',' detached as their own tokens."""
    return _TOKEN.findall(text)


@dataclass(frozen=True)
class Story:
    task_id: int | None
    context: tuple[tuple[str, ...], ...]
    question: tuple[str, ...]
    answer: str
    supporting_facts: tuple[int, ...] = ()

    def flat_context(self) -> list[str]:
        return [tok for sent in self.context for tok in sent]


def parse_task_file(text: str, task_id: int | None = None) -> list[Story]:
    stories = []
    context: list[tuple[str, ...]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        match = _LINE.match(raw)
        if match is None:
            raise ParseError(f"missing line id in {raw!r}", line_no)
        line_id, rest = int(match.group(1)), match.group(2)
        if line_id == 1:
            context = []
        if "\t" in rest:
            fields = rest.split("\t")
            question, answer = fields[0], fields[1].strip()
            if not answer:
                raise ParseError("question line has an empty answer", line_no)
            if not context:
                raise ParseError("question with no preceding facts", line_no)
            support = fields[2].split() if len(fields) > 2 else []
            try:
                support = tuple(int(s) for s in support)
            except ValueError:
                raise ParseError(f"bad supporting fact ids {fields[2]!r}", line_no) from None
            stories.append(
                Story(task_id, tuple(context), tuple(tokenize(question)), answer, support)
            )
        elif rest.rstrip().endswith("?"):
            raise ParseError("question without a tab-separated answer", line_no)
        else:
            context.append(tuple(tokenize(rest)))
    return stories


def task_files(data_dir, task_id: int) -> tuple[Path, Path]:
    """Locate ``qa{task}_*_train.txt`` / ``_test.txt`` of the English 1k set.

    Accepts the archive root, its ``en/`` directory, or any directory that
    contains the files directly.  The 10k variant is never selected.
    """
    root = Path(data_dir)
    candidates = [root / "en", root / "tasks_1-20_v1-2" / "en", root]
    out = []
    for split in ("train", "test"):
        found = None
        for base in candidates:
            hits = sorted(base.glob(f"qa{task_id}_*_{split}.txt"))
            if hits:
                found = hits[0]
                break
        if found is None:
            raise FileNotFoundError(str(candidates[0] / f"qa{task_id}_*_{split}.txt"))
        out.append(found)
    return out[0], out[1]


def load_task(data_dir, task_id: int) -> tuple[list[Story], list[Story]]:
    train_path, test_path = task_files(data_dir, task_id)
    read = lambda p: parse_task_file(p.read_text(encoding="utf-8"), task_id)  # noqa: E731
    return read(train_path), read(test_path)


class Vocab:
    """Token <-> id map with id 0 reserved for padding."""

    def __init__(self, tokens: Iterable[str]):
        self.tokens = sorted(set(tokens))
        self.index = {tok: i + 1 for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens) + 1

    def __contains__(self, tok):
        return tok in self.index

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def id(self, tok: str) -> int:
        try:
            return self.index[tok]
        except KeyError:
            raise DataError(f"token {tok!r} not in vocabulary") from None

    def token(self, i: int) -> str:
        if i == PAD_ID:
            return ""
        return self.tokens[i - 1]

    def encode(self, toks: Sequence[str]) -> list[int]:
        return [self.id(t) for t in toks]

    def decode(self, ids) -> list[str]:
        return [self.token(int(i)) for i in ids if i != PAD_ID]

    def digest(self) -> str:
        """Stable hash of the id assignment; checkpoints record it."""
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


def build_vocab(stories: Sequence[Story]) -> tuple[Vocab, Vocab]:
    """Word vocabulary over context, question and answer tokens, plus the answer set."""
    if not stories:
        raise ContractError("cannot build a vocabulary from zero stories")
    words, answers = set(), set()
    for s in stories:
        words.update(s.flat_context())
        words.update(s.question)
        words.add(s.answer)
        answers.add(s.answer)
    return Vocab(words), Vocab(answers)


def max_lengths(stories: Sequence[Story]) -> tuple[int, int]:
    return (
        max(len(s.flat_context()) for s in stories),
        max(len(s.question) for s in stories),
    )


def _pad(seq, length):
    out = np.zeros(length, dtype=np.int64)
    if seq:
        out[length - len(seq):] = seq
    return out


def vectorize(stories: Sequence[Story], vocab: Vocab, max_story_len: int, max_q_len: int):
    """Pre-padded id arrays ``(stories, questions, answers)``."""
    n = len(stories)
    story_ids = np.zeros((n, max_story_len), dtype=np.int64)
    q_ids = np.zeros((n, max_q_len), dtype=np.int64)
    answers = np.zeros(n, dtype=np.int64)
    for k, s in enumerate(stories):
        ctx = vocab.encode(s.flat_context())
        q = vocab.encode(s.question)
        if len(ctx) > max_story_len or len(q) > max_q_len:
            raise ContractError(
                f"story {k} needs lengths ({len(ctx)}, {len(q)}), "
                f"padding allows ({max_story_len}, {max_q_len})"
            )
        story_ids[k] = _pad(ctx, max_story_len)
        q_ids[k] = _pad(q, max_q_len)
        answers[k] = vocab.id(s.answer)
    return story_ids, q_ids, answers


def split_train_val(arrays, fraction: float = 0.05, seed: int = 0):
    """Shuffled split into ``(train, val)``; ``floor(N * fraction)`` rows go to val.

    ``arrays`` is a tuple of equally long arrays; the same row permutation is
    applied to all of them.
    """
    if not 0.0 < fraction < 1.0:
        raise ContractError(f"validation fraction must be in (0, 1), got {fraction}")
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ContractError("arrays to split differ in length")
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(np.floor(n * fraction))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    return tuple(a[train_idx] for a in arrays), tuple(a[val_idx] for a in arrays)


@dataclass
class Split:
    """Vectorized examples plus the digest of the vocabulary that produced them."""

    story: np.ndarray
    question: np.ndarray
    answer: np.ndarray
    vocab_digest: str

    def __len__(self):
        return len(self.answer)

    def subset(self, idx) -> "Split":
        return Split(self.story[idx], self.question[idx], self.answer[idx], self.vocab_digest)


@dataclass
class TaskData:
    task_id: int | None
    vocab: Vocab
    answer_vocab: Vocab
    max_story_len: int
    max_q_len: int
    train: Split
    val: Split
    test: Split


def prepare_task(train_stories, test_stories, val_fraction=0.05, seed=0, task_id=None) -> TaskData:
    """Vocabulary over train+test, corpus-derived padding, seeded train/val split."""
    everything = list(train_stories) + list(test_stories)
    vocab, answer_vocab = build_vocab(everything)
    s_len, q_len = max_lengths(everything)
    digest = vocab.digest()
    tr = vectorize(train_stories, vocab, s_len, q_len)
    te = vectorize(test_stories, vocab, s_len, q_len)
    (tr_s, tr_q, tr_a), (va_s, va_q, va_a) = split_train_val(tr, val_fraction, seed)
    return TaskData(
        task_id,
        vocab,
        answer_vocab,
        s_len,
        q_len,
        Split(tr_s, tr_q, tr_a, digest),
        Split(va_s, va_q, va_a, digest),
        Split(*te, digest),
    )


def git_blob_hash(path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
