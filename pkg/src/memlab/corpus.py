"""Text ingestion, word-level tokenization, sentence-respecting packing,
MLM mask layouts, document-ID injection, and POS annotation handling.

Corpus files are UTF-8 plain text, one document per blank-line-separated
block. Tokenization splits on whitespace and peels punctuation into
single-character tokens; detokenization joins with single spaces, so
round-trips are exact for text whose punctuation is already space-separated
(the whitespace-normalized form).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import IngestionError, UsageError

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_NUM_RE = re.compile(r"^\d+([.,]\d+)*$")

PAD, UNK, MASK, BOS = "<pad>", "<unk>", "<mask>", "<bos>"
SPECIALS = (PAD, UNK, MASK, BOS)


class PosTag(IntEnum):
    NOUN = 0
    PROPN = 1
    NUM = 2
    VERB = 3
    ADJ = 4
    OTHER = 5


_TAG_BY_NAME = {t.name: t for t in PosTag}


def pos_tag_from_label(label: str) -> PosTag:
    """Map an annotation label to the closed tag set; unknown labels -> OTHER."""
    return _TAG_BY_NAME.get(label.strip().upper(), PosTag.OTHER)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def detokenize(tokens) -> str:
    return " ".join(tokens)


def split_sentences(text: str) -> list[str]:
    """Sentence boundary rule: terminal . ! ? followed by whitespace."""
    parts = [p.strip() for p in _SENT_SPLIT_RE.split(text)]
    return [p for p in parts if p]


@dataclass
class Document:
    """Tokenized sentences of one source document, with optional POS tags."""

    sentences: list[list[str]]
    tags: list[np.ndarray] | None = None  # aligned int8 arrays, PosTag values

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def token_stream(self):
        for s in self.sentences:
            yield from s


def load_corpus(path) -> list[Document]:
    """Read blank-line-separated documents; newlines inside a block are spaces."""
    text = Path(path).read_text(encoding="utf-8")
    docs = []
    for block in re.split(r"\n\s*\n", text):
        block = " ".join(block.split())
        if not block:
            continue
        sentences = [tokenize(s) for s in split_sentences(block)]
        sentences = [s for s in sentences if s]
        if sentences:
            docs.append(Document(sentences=sentences))
    if not docs:
        raise IngestionError(f"{path}: corpus is empty")
    return docs


class Vocabulary:
    """Total bijection token<->id over [0, V), reserved specials first.

    Corpus-derived ids follow the four specials in descending frequency order
    (ties lexicographic). An optional docid region of fresh ids can be
    appended once for unique-identifier experiments.
    """

    def __init__(self, tokens: list[str], docid_region: tuple[int, int] | None = None):
        self._id_to_token = list(tokens)
        self._token_to_id = {t: i for i, t in enumerate(self._id_to_token)}
        if len(self._token_to_id) != len(self._id_to_token):
            raise UsageError("duplicate token in vocabulary")
        self.docid_region = docid_region  # (start, size)

    @property
    def size(self) -> int:
        return len(self._id_to_token)

    pad_id, unk_id, mask_id, bos_id = 0, 1, 2, 3

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, self.unk_id)

    def token_of(self, idx: int) -> str:
        return self._id_to_token[idx]

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def encode(self, tokens) -> np.ndarray:
        get = self._token_to_id.get
        unk = self.unk_id
        return np.fromiter((get(t, unk) for t in tokens), dtype=np.int32)

    def decode(self, ids) -> list[str]:
        return [self._id_to_token[i] for i in ids]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for t in self._id_to_token:
            h.update(t.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()

    def with_docid_region(self, n: int) -> "Vocabulary":
        if self.docid_region is not None:
            raise UsageError("vocabulary already has a docid region")
        start = self.size
        fresh = [f"<uid_{i}>" for i in range(n)]
        return Vocabulary(self._id_to_token + fresh, docid_region=(start, n))


def build_vocab(docs: list[Document], max_size: int, min_freq: int = 1) -> Vocabulary:
    """Frequency-ranked word vocabulary, ties broken lexicographically."""
    if not docs:
        raise IngestionError("build_vocab: empty corpus")
    counts: dict[str, int] = {}
    for d in docs:
        for tok in d.token_stream():
            counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        raise IngestionError("build_vocab: corpus has no tokens")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [t for t, c in ranked if c >= min_freq][: max_size - len(SPECIALS)]
    return Vocabulary(list(SPECIALS) + kept)


def coverage(vocab: Vocabulary, docs: list[Document]) -> float:
    """Fraction of corpus token occurrences retained (not mapped to unk)."""
    total = 0
    hit = 0
    for d in docs:
        for tok in d.token_stream():
            total += 1
            hit += tok in vocab
    return hit / total if total else 0.0


@dataclass
class MaskLayout:
    """MLM corruption record: which positions, their originals, and how."""

    positions: np.ndarray      # int32, sorted
    original_ids: np.ndarray   # int32
    corruption: np.ndarray     # int8: 0 = mask token, 1 = random token, 2 = kept
    corrupt_ids: np.ndarray    # int32, input ids placed at the positions


@dataclass
class PackedSequence:
    ids: np.ndarray                    # int32, <= max_len
    doc_id: int
    sentence_offsets: list[int]        # start offset of each packed sentence
    pos_tags: np.ndarray | None = None # int8 PosTag values, aligned with ids
    mask_layout: MaskLayout | None = None
    truncated: bool = False
    prefix_len: int = 0                # docid prefix positions excluded from metrics
    uid: int = -1                      # index within the dataset

    def __len__(self):
        return len(self.ids)

    def content_hash(self) -> str:
        return hashlib.sha256(self.ids.astype("<i4").tobytes()).hexdigest()


def pack_sequences(docs: list[Document], vocab: Vocabulary, max_len: int = 512) -> list[PackedSequence]:
    """Greedy packing of whole sentences up to max_len tokens.

    Sentences never split across sequences; a single sentence longer than
    max_len is hard-truncated and the sequence flagged.
    """
    out: list[PackedSequence] = []
    for doc_id, doc in enumerate(docs):
        cur_ids: list[np.ndarray] = []
        cur_tags: list[np.ndarray] = []
        cur_offsets: list[int] = []
        cur_len = 0
        truncated = False

        def flush():
            nonlocal cur_ids, cur_tags, cur_offsets, cur_len, truncated
            if cur_len == 0:
                return
            ids = np.concatenate(cur_ids)
            tags = np.concatenate(cur_tags) if doc.tags is not None else None
            out.append(
                PackedSequence(
                    ids=ids,
                    doc_id=doc_id,
                    sentence_offsets=list(cur_offsets),
                    pos_tags=tags,
                    truncated=truncated,
                    uid=len(out),
                )
            )
            cur_ids, cur_tags, cur_offsets, cur_len, truncated = [], [], [], 0, False

        for si, sent in enumerate(doc.sentences):
            ids = vocab.encode(sent)
            tags = doc.tags[si] if doc.tags is not None else None
            if len(ids) > max_len:
                flush()
                cur_ids = [ids[:max_len]]
                cur_tags = [tags[:max_len]] if tags is not None else []
                cur_offsets = [0]
                cur_len = max_len
                truncated = True
                flush()
                continue
            if cur_len + len(ids) > max_len:
                flush()
            cur_offsets.append(cur_len)
            cur_ids.append(ids)
            if tags is not None:
                cur_tags.append(tags)
            cur_len += len(ids)
        flush()
    return out


def mean_packed_length(seqs: list[PackedSequence]) -> float:
    return float(np.mean([len(s) for s in seqs])) if seqs else 0.0


def _seq_rng(seed, uid: int) -> np.random.Generator:
    entropy = (*seed, uid) if isinstance(seed, tuple) else (seed, uid)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def apply_mlm_mask(
    seq: PackedSequence,
    vocab: Vocabulary,
    p: float = 0.15,
    seed: int = 0,
    split_corruption: bool = False,
) -> PackedSequence:
    """Independently mask each non-special position with probability p.

    The layout is fully determined by (seed, sequence uid). By default every
    chosen position becomes the mask token; ``split_corruption`` enables the
    80/10/10 mask/random/keep variant instead.
    """
    if seq.mask_layout is not None:
        raise UsageError("sequence already carries a mask layout")
    rng = _seq_rng(seed, seq.uid)
    eligible = (seq.ids >= len(SPECIALS)) & (np.arange(len(seq.ids)) >= seq.prefix_len)
    picks = (rng.random(len(seq.ids)) < p) & eligible
    positions = np.flatnonzero(picks).astype(np.int32)
    originals = seq.ids[positions].copy()
    corruption = np.zeros(len(positions), dtype=np.int8)
    corrupt_ids = np.full(len(positions), vocab.mask_id, dtype=np.int32)
    if split_corruption and len(positions):
        u = rng.random(len(positions))
        corruption[(u >= 0.8) & (u < 0.9)] = 1
        corruption[u >= 0.9] = 2
        rand_ids = rng.integers(len(SPECIALS), vocab.size, size=len(positions)).astype(np.int32)
        corrupt_ids = np.where(corruption == 1, rand_ids, corrupt_ids)
        corrupt_ids = np.where(corruption == 2, originals, corrupt_ids).astype(np.int32)
    layout = MaskLayout(
        positions=positions,
        original_ids=originals,
        corruption=corruption,
        corrupt_ids=corrupt_ids,
    )
    return PackedSequence(
        ids=seq.ids,
        doc_id=seq.doc_id,
        sentence_offsets=seq.sentence_offsets,
        pos_tags=seq.pos_tags,
        mask_layout=layout,
        truncated=seq.truncated,
        prefix_len=seq.prefix_len,
        uid=seq.uid,
    )


def masked_input_ids(seq: PackedSequence) -> np.ndarray:
    """Input ids with the layout's corruption applied."""
    if seq.mask_layout is None:
        raise UsageError("sequence has no mask layout")
    ids = seq.ids.copy()
    ids[seq.mask_layout.positions] = seq.mask_layout.corrupt_ids
    return ids


DOCID_MODES = ("control", "vocab-only", "prepend")


def prepend_doc_ids(
    seqs: list[PackedSequence],
    vocab: Vocabulary,
    mode: str,
) -> tuple[list[PackedSequence], Vocabulary]:
    """Unique-identifier arms: control / vocab-only / prepend.

    vocab-only grows the vocabulary by one fresh id per sequence without
    touching the token streams; prepend additionally gives every sequence the
    3-token prefix ["document", "ID", <uid_i>]. The prefix tokens "document"
    and "ID" must already be ordinary vocabulary entries.
    """
    if mode not in DOCID_MODES:
        raise UsageError(f"mode must be one of {DOCID_MODES}")
    if mode == "control":
        return seqs, vocab
    vocab2 = vocab.with_docid_region(len(seqs))
    if mode == "vocab-only":
        return seqs, vocab2
    for word in ("document", "ID"):
        if word not in vocab2:
            raise IngestionError(
                f"docid prefix token {word!r} is not in the vocabulary; "
                "build the vocabulary from a corpus containing it"
            )
    start, _ = vocab2.docid_region
    doc_tok, id_tok = vocab2.id_of("document"), vocab2.id_of("ID")
    other_tag = np.array([PosTag.OTHER] * 3, dtype=np.int8)
    out = []
    for i, s in enumerate(seqs):
        prefix = np.array([doc_tok, id_tok, start + i], dtype=np.int32)
        out.append(
            PackedSequence(
                ids=np.concatenate([prefix, s.ids]),
                doc_id=s.doc_id,
                sentence_offsets=[0] + [o + 3 for o in s.sentence_offsets],
                pos_tags=None if s.pos_tags is None else np.concatenate([other_tag, s.pos_tags]),
                truncated=s.truncated,
                prefix_len=3,
                uid=s.uid,
            )
        )
    return out, vocab2


def strip_doc_id_prefix(seqs: list[PackedSequence]) -> list[PackedSequence]:
    """Inverse of prepend mode; recovers the control token streams exactly."""
    out = []
    for s in seqs:
        n = s.prefix_len
        out.append(
            PackedSequence(
                ids=s.ids[n:].copy(),
                doc_id=s.doc_id,
                sentence_offsets=[o - n for o in s.sentence_offsets if o >= n] or [0],
                pos_tags=None if s.pos_tags is None else s.pos_tags[n:].copy(),
                truncated=s.truncated,
                prefix_len=0,
                uid=s.uid,
            )
        )
    return out


# ---------------------------------------------------------------------------
# POS annotations
# ---------------------------------------------------------------------------

def export_token_stream(docs: list[Document], path):
    """One token per line, in corpus order, for external tagging."""
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            for tok in d.token_stream():
                fh.write(tok + "\n")


def ingest_pos_annotations(docs: list[Document], path) -> list[Document]:
    """Attach per-token tags from a `token<TAB>TAG` file aligned with the corpus.

    Alignment is verified token-for-token; the first divergence (or a token
    count mismatch) raises IngestionError naming the offset.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    entries = []
    for ln, line in enumerate(lines):
        if not line.strip():
            continue
        if "\t" not in line:
            raise IngestionError(f"{path}:{ln + 1}: expected token<TAB>TAG")
        tok, tag = line.split("\t", 1)
        entries.append((tok, pos_tag_from_label(tag)))

    n_tokens = sum(d.n_tokens for d in docs)
    if len(entries) != n_tokens:
        raise IngestionError(
            f"annotation count {len(entries)} != corpus token count {n_tokens}"
        )
    offset = 0
    tagged: list[Document] = []
    for d in docs:
        tag_rows = []
        for sent in d.sentences:
            row = np.empty(len(sent), dtype=np.int8)
            for j, tok in enumerate(sent):
                a_tok, a_tag = entries[offset]
                if a_tok != tok:
                    raise IngestionError(
                        f"annotation misaligned at token offset {offset}: "
                        f"corpus {tok!r} vs annotation {a_tok!r}"
                    )
                row[j] = a_tag
                offset += 1
            tag_rows.append(row)
        tagged.append(Document(sentences=d.sentences, tags=tag_rows))
    return tagged


class PosLexicon:
    """Majority-tag lexicon built from ingested annotations.

    Query order: digit-pattern tokens are NUM; known words take their
    most-frequent annotated tag; unseen capitalized words are PROPN;
    anything else is OTHER.
    """

    def __init__(self):
        self._counts: dict[str, np.ndarray] = {}
        self._majority: dict[str, PosTag] = {}

    @classmethod
    def from_documents(cls, docs: list[Document]) -> "PosLexicon":
        lex = cls()
        for d in docs:
            if d.tags is None:
                raise IngestionError("document has no POS tags; ingest annotations first")
            for sent, tags in zip(d.sentences, d.tags):
                for tok, tag in zip(sent, tags):
                    row = lex._counts.get(tok)
                    if row is None:
                        row = np.zeros(len(PosTag), dtype=np.int64)
                        lex._counts[tok] = row
                    row[tag] += 1
        for tok, row in lex._counts.items():
            lex._majority[tok] = PosTag(int(row.argmax()))
        return lex

    def tag(self, word: str) -> PosTag:
        if _NUM_RE.match(word):
            return PosTag.NUM
        known = self._majority.get(word)
        if known is not None:
            return known
        if word[:1].isupper():
            return PosTag.PROPN
        return PosTag.OTHER

    def tag_table(self, vocab: Vocabulary) -> np.ndarray:
        """Per-vocab-id tag lookup (int8) for fast prediction tagging."""
        table = np.empty(vocab.size, dtype=np.int8)
        for i in range(vocab.size):
            table[i] = self.tag(vocab.token_of(i))
        return table


def lexicon_pos_tag(lexicon: PosLexicon, word: str) -> PosTag:
    return lexicon.tag(word)


def write_manifest(seqs: list[PackedSequence], vocab: Vocabulary, path, mask_seed: int | None = None):
    """Canonical-JSON dataset manifest: sequences, source offsets, vocab hash."""
    manifest = {
        "vocab_hash": vocab.content_hash(),
        "vocab_size": vocab.size,
        "mask_seed": mask_seed,
        "sequences": [
            {
                "uid": s.uid,
                "doc_id": s.doc_id,
                "length": len(s),
                "sentence_offsets": s.sentence_offsets,
                "truncated": s.truncated,
                "prefix_len": s.prefix_len,
                "hash": s.content_hash(),
            }
            for s in seqs
        ],
    }
    Path(path).write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )
