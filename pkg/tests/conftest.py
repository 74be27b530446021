import pytest

from corefal.corpus import Corpus, Document, GoldAnnotation


def make_doc(doc_id="doc", n_tokens=30, sent_len=10):
    tokens = tuple(f"w{i}" for i in range(n_tokens))
    sentences = tuple((s, min(s + sent_len, n_tokens))
                      for s in range(0, n_tokens, sent_len))
    speakers = tuple("spk0" if (i // sent_len) % 2 == 0 else "spk1"
                     for i in range(n_tokens))
    return Document(doc_id=doc_id, tokens=tokens, sentences=sentences,
                    speakers=speakers)


def make_corpus(clusters_by_doc):
    """clusters_by_doc: {doc_id: [[span, ...], ...]}; spans as (start, end)."""
    corpus = Corpus()
    for doc_id, clusters in clusters_by_doc.items():
        n = max(e for c in clusters for _, e in c) + 3
        corpus.documents.append(make_doc(doc_id, n_tokens=n, sent_len=n))
        corpus.gold[doc_id] = GoldAnnotation(
            tuple(frozenset(tuple(s) for s in c) for c in clusters))
    return corpus


@pytest.fixture
def doc():
    return make_doc()
