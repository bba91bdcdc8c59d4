import collections

import numpy as np

from memlab.corpus import PosTag, ingest_pos_annotations, load_corpus, tokenize
from memlab.datagen import CorpusSpec, generate_documents, write_corpus


def small_spec(**kw):
    base = dict(seed=1, target_tokens=5000, n_nouns=60, n_propn=40, n_nums=30,
                n_verbs=20, n_adjs=15)
    base.update(kw)
    return CorpusSpec(**base)


def test_deterministic_generation():
    a = generate_documents(small_spec())
    b = generate_documents(small_spec())
    assert a == b
    c = generate_documents(small_spec(seed=2))
    assert a != c


def test_token_budget_reached():
    docs = generate_documents(small_spec(target_tokens=12_000))
    assert sum(len(d) for d in docs) >= 12_000


def test_tag_classes_are_pure():
    # every surface form maps to exactly one tag (no cross-class collisions)
    docs = generate_documents(small_spec())
    seen: dict[str, PosTag] = {}
    for doc in docs:
        for tok, tag in doc:
            assert seen.setdefault(tok, tag) == tag


def test_written_text_round_trips_tokenizer(tmp_path):
    paths = write_corpus(small_spec(), tmp_path)
    docs = load_corpus(paths["text"])
    flat_pipeline = [t for d in docs for t in d.token_stream()]
    flat_generated = [tok for doc in generate_documents(small_spec()) for tok, _ in doc]
    assert flat_pipeline == flat_generated
    # and the annotation sidecar ingests without any misalignment
    tagged = ingest_pos_annotations(docs, paths["annotations"])
    assert all(d.tags is not None for d in tagged)


def test_capitalization_convention():
    docs = generate_documents(small_spec())
    for doc in docs:
        for tok, tag in doc:
            if tok in ("document", "ID"):  # literal boilerplate nouns
                continue
            if tag == PosTag.PROPN:
                assert tok[0].isupper()
            elif tag in (PosTag.NOUN, PosTag.VERB, PosTag.ADJ):
                assert tok[0].islower()
            elif tag == PosTag.NUM:
                assert tok[0].isdigit()


def test_locality_moves_verbs_into_doc_pools():
    global_docs = generate_documents(small_spec(verb_locality=0.0))
    local_docs = generate_documents(small_spec(verb_locality=1.0, verbs_per_doc=2))

    def verbs_per_doc(docs):
        return np.mean([len({t for t, g in d if g == PosTag.VERB}) for d in docs])

    assert verbs_per_doc(local_docs) <= 2.0
    assert verbs_per_doc(global_docs) > verbs_per_doc(local_docs)


def test_pool_reuse_creates_repeated_sentences():
    docs = generate_documents(small_spec(sentence_pool_size=3, pool_use_prob=0.9,
                                         sentences_per_doc=(20, 25)))
    repeats = 0
    for doc in docs:
        text = " ".join(t for t, _ in doc)
        sents = [s for s in text.split(" . ") if s]
        counts = collections.Counter(sents)
        repeats += sum(1 for c in counts.values() if c > 1)
    assert repeats > len(docs)  # heavy within-document sentence reuse


def test_docid_prefix_words_always_present(tmp_path):
    paths = write_corpus(small_spec(target_tokens=20_000), tmp_path)
    docs = load_corpus(paths["text"])
    stream = set()
    for d in docs:
        stream.update(d.token_stream())
    assert "document" in stream and "ID" in stream
