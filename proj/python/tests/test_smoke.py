import pytest

import pprl


SECRETS = dict(hash_secret=b"k" * 32, study_secret=b"s" * 32, permutation_seed=b"p" * 32)


def make_scheme(**overrides):
    weights = {"first_name": 7.0, "last_name": 6.8, "gender": 2.0, "birth_date": 5.8, "city": 7.1}
    args = dict(SECRETS)
    args.update(overrides)
    return pprl.build_scheme(list(pprl.DEFAULT_ATTRIBUTES), weights, **args)


RECORD = {
    "first_name": "Anna",
    "last_name": "Müller",
    "gender": "F",
    "birth_date": "1980-02-01",
    "city": "Köln",
}


def test_preprocess_and_tokenize():
    assert pprl.preprocess("Müller") == "muller"
    assert pprl.preprocess("  José   GARCÍA ") == "jose garcia"
    assert pprl.tokenize("anna", 2) == {"_a", "an", "nn", "na", "a_"}


def test_hash_allocation():
    assert pprl.allocate_hash_counts({"a": 3.0, "b": 1.0}, 20) == {"a": 15, "b": 5}


def test_encoding_is_balanced_and_deterministic():
    scheme = make_scheme()
    a = pprl.encode(RECORD, scheme)
    assert len(a) == 2048
    assert a.count() == 1024
    assert a == pprl.encode(RECORD, scheme)
    assert pprl.jaccard(a, a) == 1.0


def test_match_and_roundtrip():
    scheme = make_scheme()
    other = dict(RECORD, first_name="Berta", city="Bonn")
    vectors = pprl.encode_many([RECORD, other], scheme)
    pairs = pprl.match(vectors[:1], vectors, 0.99)
    assert pairs == [(0, 0, 1.0)]
    restored = pprl.BitVector.from_bytes(vectors[1].to_bytes(), len(vectors[1]))
    assert restored == vectors[1]


def test_scheme_json_roundtrip():
    scheme = make_scheme()
    again = pprl.EncodingScheme.from_json(scheme.to_json())
    assert again.digest() == scheme.digest()
    assert again.hash_counts == scheme.hash_counts


def test_attribute_mismatch_is_reported():
    with pytest.raises(pprl.AttributeMismatch):
        pprl.encode({"first_name": "Anna"}, make_scheme())


def test_metrics_from_counts():
    m = pprl.evaluate_counts(1145, 4, 12, 1143252)
    assert m["tn"] == 1142091
    assert abs(m["f1"] - 0.9931) <= 1e-4


def test_generate_is_deterministic():
    assert pprl.generate(50, seed=3) == pprl.generate(50, seed=3)
    assert len({r["entity_id"] for r in pprl.generate(200)}) == 200
