"""Simulator: determinism, mode fidelity, corpora, ground truth."""
from __future__ import annotations

import json

import pytest

from ransomwatch.events import MUTATING_OPS, Operation, window_events
from ransomwatch.features import Mode, classify_mode
from ransomwatch.notes import build_pool, similarity, tokenize
from ransomwatch.simulator import (
    BadSpec,
    BenignProfile,
    BenignSpec,
    Corpus,
    RansomwareSpec,
    ScenarioSpec,
    TreeSpec,
    build_corpus,
    generate,
    make_benign_doc_corpus,
    make_note_corpus,
    merge_results,
    scenario_windows,
    spec_from_json,
    spec_from_kind,
    tree_layout,
    write_scenario,
)

ALL_MODES = (Mode.M1, Mode.M2, Mode.M3, Mode.M4, Mode.M5, Mode.M6)


def _ransom_spec(mode, seed, files=40, fps=80.0, **kw):
    return ScenarioSpec(
        kind=RansomwareSpec(mode=mode, files_per_second=fps, **kw),
        seed=seed,
        tree=TreeSpec(depth=2, fanout=2, files=files),
    )


def test_same_seed_identical_bytes(tmp_path):
    spec = _ransom_spec(Mode.M3, seed=77)
    d1, d2 = tmp_path / "a", tmp_path / "b"
    write_scenario(generate(spec), d1)
    write_scenario(generate(spec), d2)
    for name in ("trace.jsonl", "ground_truth.json", "notes.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_different_seeds_differ():
    a = generate(_ransom_spec(Mode.M3, seed=1))
    b = generate(_ransom_spec(Mode.M3, seed=2))
    assert a.events != b.events


@pytest.mark.parametrize("mode", ALL_MODES)
def test_mode_ground_truth_agreement(mode):
    hits = 0
    runs = 20
    for seed in range(runs):
        result = generate(_ransom_spec(mode, seed=1000 + seed, files=30))
        window = window_events(result.events, result.ground_truth["pid"], 0, 10**12)
        hits += classify_mode(window).mode is mode
    assert hits / runs >= 0.99


def test_trace_realizes_operation_pattern():
    result = generate(_ransom_spec(Mode.M5, seed=3, files=20))
    ops = {ev.operation for ev in result.events}
    assert Operation.SMASH in ops and Operation.CREATE in ops
    assert Operation.DELETE not in ops and Operation.OVERWRITE not in ops


def test_note_drops_and_texts():
    result = generate(_ransom_spec(Mode.M1, seed=5, files=20, note_every_k_dirs=1))
    assert result.notes
    for path, text in result.notes.items():
        assert path in result.ground_truth["note_paths"]
        assert "encrypted" in text.lower() or "locked" in text.lower()
    created = {ev.file_name for ev in result.events if ev.operation is Operation.CREATE}
    assert set(result.notes) <= created


def test_generated_notes_score_against_pool():
    pool = build_pool([tokenize(t) for t in make_note_corpus(100, seed=1)], n=3, top_k=300)
    result = generate(_ransom_spec(Mode.M3, seed=31))
    scores = [similarity(tokenize(text), pool).score for text in result.notes.values()]
    assert max(scores) >= 0.21


def test_benign_indexer_only_reads():
    spec = ScenarioSpec(
        kind=BenignSpec(profile=BenignProfile.INDEXER),
        seed=8,
        tree=TreeSpec(depth=2, fanout=2, files=50),
        decoy_paths=("C:/Users/alice/Documents/budget_99.docx",),
    )
    result = generate(spec)
    assert all(ev.operation is Operation.READ for ev in result.events)
    assert not [ev for ev in result.events if ev.operation in MUTATING_OPS]


def test_avoid_decoys_never_touches_them():
    layout = tree_layout(TreeSpec(depth=2, fanout=2, files=40), seed=55)
    decoys = (f"{layout.dirs[0]}/quarterly_report.docx",)
    spec = ScenarioSpec(
        kind=RansomwareSpec(mode=Mode.M4, files_per_second=50, avoid_decoys=True),
        seed=55,
        tree=TreeSpec(depth=2, fanout=2, files=40),
        decoy_paths=decoys,
    )
    result = generate(spec)
    touched = {ev.file_name for ev in result.events} | {
        ev.old_file_name for ev in result.events if ev.old_file_name
    }
    assert not (set(decoys) & touched)
    assert result.ground_truth["decoys_touched"] == []


def test_decoys_encrypted_when_not_avoiding():
    layout = tree_layout(TreeSpec(depth=2, fanout=2, files=40), seed=55)
    decoys = (f"{layout.dirs[0]}/quarterly_report.docx",)
    spec = ScenarioSpec(
        kind=RansomwareSpec(mode=Mode.M4, files_per_second=50),
        seed=55,
        tree=TreeSpec(depth=2, fanout=2, files=40),
        decoy_paths=decoys,
    )
    result = generate(spec)
    assert result.ground_truth["decoys_touched"] == list(decoys)


def test_ground_truth_consistency():
    result = generate(_ransom_spec(Mode.M2, seed=13, files=25))
    truth = result.ground_truth
    assert truth["event_count"] == len(result.events)
    times = [f["encrypted_at"] for f in truth["files"]]
    assert times == sorted(times)
    assert len(truth["files"]) == 25
    event_times = [ev.time for ev in result.events]
    assert event_times == sorted(event_times)


def test_merge_results_sorted_with_distinct_pids():
    a = generate(_ransom_spec(Mode.M1, seed=1))
    b = generate(ScenarioSpec(kind=BenignSpec(), seed=2, tree=TreeSpec(files=30)))
    merged, notes = merge_results([a, b])
    assert [ev.time for ev in merged] == sorted(ev.time for ev in merged)
    assert len(merged) == len(a.events) + len(b.events)
    assert notes == a.notes


def test_scenario_windows_prefix_growth():
    result = generate(_ransom_spec(Mode.M3, seed=4, files=60, fps=30))
    windows = scenario_windows(result)
    assert windows
    by_anchor: dict[int, list[int]] = {}
    for w in windows:
        by_anchor.setdefault(w.window_start, []).append(len(w.events))
    assert 1 <= len(by_anchor) <= 2  # first-event anchor plus optional mid-trace one
    for sizes in by_anchor.values():
        assert sizes == sorted(sizes) and len(set(sizes)) == len(sizes)


def test_build_corpus_shape_and_balance():
    corpus = build_corpus(30, 36, seed=5)
    assert corpus.X.shape == (66, 12 + corpus.dims)
    assert int(corpus.y.sum()) == 30
    modes = {m["mode"] for m in corpus.meta if m["label"] == 1}
    assert modes == {m.value for m in ALL_MODES}
    profiles = {m["profile"] for m in corpus.meta if m["label"] == 0}
    assert "zipper" not in profiles


def test_build_corpus_zipper_flag():
    corpus = build_corpus(6, 30, seed=5, include_zipper=True)
    assert "zipper" in {m["profile"] for m in corpus.meta if m["label"] == 0}


def test_corpus_save_load_round_trip(tmp_path):
    corpus = build_corpus(8, 8, seed=2)
    corpus.save(tmp_path)
    loaded = Corpus.load(tmp_path)
    assert (loaded.X == corpus.X).all() and (loaded.y == corpus.y).all()
    assert loaded.dims == corpus.dims and loaded.hash_seed == corpus.hash_seed


def test_corpus_features_independent_of_row_order():
    a = build_corpus(10, 10, seed=3)
    b = build_corpus(10, 10, seed=3)
    assert (a.X == b.X).all()


def test_corpus_feature_distributions_separate_classes():
    from ransomwatch.features import FEATURE_NAMES, extract_features, feature_report
    from ransomwatch.simulator import scenario_windows

    vectors, labels = [], []
    for i in range(40):
        if i % 2:
            spec = ScenarioSpec(
                kind=RansomwareSpec(mode=ALL_MODES[i % 6], files_per_second=60),
                seed=700 + i, tree=TreeSpec(depth=2, fanout=2, files=80),
            )
        else:
            spec = ScenarioSpec(
                kind=BenignSpec(profile=list(BenignProfile)[i % 5]),
                seed=800 + i, tree=TreeSpec(depth=2, fanout=2, files=80),
            )
        for window in scenario_windows(generate(spec))[:2]:
            vectors.append(extract_features(window))
            labels.append(i % 2)
    report = feature_report(vectors, labels)
    rows = report.to_csv().strip().splitlines()
    assert {r.split(",")[0] for r in rows[1:]} == set(FEATURE_NAMES)
    separation = report.separation()
    # the same-named-note spread features and the type-ratio split classes hard
    assert separation["n_folder"] >= 0.9
    assert separation["max_n_file"] >= 0.9
    assert separation["rtype_change"] >= 0.5
    assert separation["n_create"] >= 0.5


def test_note_and_doc_corpora_deterministic():
    assert make_note_corpus(10, seed=4) == make_note_corpus(10, seed=4)
    assert make_benign_doc_corpus(10, seed=4) == make_benign_doc_corpus(10, seed=4)
    assert make_note_corpus(10, seed=4) != make_note_corpus(10, seed=5)


def test_bad_specs_rejected():
    with pytest.raises(BadSpec):
        generate(ScenarioSpec(kind=RansomwareSpec(mode=Mode.M1, files_per_second=0), seed=1))
    with pytest.raises(BadSpec):
        generate(ScenarioSpec(kind=RansomwareSpec(mode=Mode.NONE), seed=1))
    with pytest.raises(BadSpec):
        spec_from_kind("m9")
    with pytest.raises(BadSpec):
        build_corpus(0, 5, seed=1)


def test_spec_from_json_round():
    text = json.dumps(
        {
            "kind": "m4",
            "seed": 9,
            "fps": 120,
            "note_every_k_dirs": 2,
            "tree": {"depth": 2, "fanout": 2, "files": 44},
        }
    )
    spec = spec_from_json(text)
    assert isinstance(spec.kind, RansomwareSpec)
    assert spec.kind.mode is Mode.M4 and spec.kind.files_per_second == 120
    assert spec.tree.files == 44
    result = generate(spec)
    assert result.ground_truth["mode"] == "M4"


def test_decoy_outside_tree_rejected():
    spec = ScenarioSpec(
        kind=RansomwareSpec(mode=Mode.M1),
        seed=1,
        tree=TreeSpec(depth=1, fanout=1, files=5),
        decoy_paths=("Z:/elsewhere/decoy.docx",),
    )
    with pytest.raises(BadSpec):
        generate(spec)
