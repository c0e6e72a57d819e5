import json

import pytest

from medqakit import (
    DatasetSubsetId,
    Provenance,
    QAPair,
    Schedule,
    SplitSpec,
    StageSpec,
    TransformKind,
    TransformTarget,
    ValidationError,
    YesNoInstance,
    builtin_schedules,
    default_lemma_lexicon,
    default_morpheme_lexicon,
    emit_schedule,
    make_folds,
    make_target_split,
)
from medqakit.formats import file_sha256
from medqakit.schedule import get_schedule

EXPECTED_STAGE_ORDERS = {
    "1": ["d1"],
    "2": ["d2", "d1"],
    "3": ["d2", "d1", "d3"],
    "4": ["d2", "d1", "d3", "d4"],
    "baseline": ["pqa_a", "pqa_l"],
    **{sid: ["pqa_a", "pqa_l"] for sid in
       ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI", "XII")},
}

EXPECTED_CHAINS = {
    "baseline": None,
    "I": [("replacement", "lemma")],
    "II": [("concatenation", "lemma")],
    "III": [("augmentation", "lemma")],
    "IV": [("replacement", "neo_form")],
    "V": [("concatenation", "neo_form")],
    "VI": [("augmentation", "neo_form")],
    "VII": [("replacement", "neo_meaning")],
    "VIII": [("concatenation", "neo_meaning")],
    "IX": [("augmentation", "neo_meaning")],
    "X": [("concatenation", "lemma"), ("replacement", "neo_form")],
    "XI": [("replacement", "neo_form"), ("replacement", "neo_meaning")],
    "XII": [
        ("concatenation", "lemma"),
        ("replacement", "neo_form"),
        ("replacement", "neo_meaning"),
    ],
}


class TestBuiltinSchedules:
    def test_seventeen_schedules(self):
        schedules = builtin_schedules()
        assert len(schedules) == 17
        assert [s.schedule_id for s in schedules] == list(EXPECTED_STAGE_ORDERS)

    @pytest.mark.parametrize("schedule_id,subsets", sorted(EXPECTED_STAGE_ORDERS.items()))
    def test_stage_orders(self, schedule_id, subsets):
        schedule = get_schedule(schedule_id)
        assert [stage.subset.value for stage in schedule.stages] == subsets
        assert [stage.stage_index for stage in schedule.stages] == list(
            range(1, len(subsets) + 1)
        )

    @pytest.mark.parametrize("schedule_id,chain", sorted(EXPECTED_CHAINS.items()))
    def test_transform_chains(self, schedule_id, chain):
        schedule = get_schedule(schedule_id)
        for stage in schedule.stages:
            if chain is None:
                assert stage.chain is None
            else:
                assert [(s.kind.value, s.target.value) for s in stage.chain.specs] == chain

    def test_extractive_schedules_have_no_chains(self):
        for schedule_id in ("1", "2", "3", "4"):
            assert all(stage.chain is None for stage in get_schedule(schedule_id).stages)

    def test_stage_indices_validated(self):
        with pytest.raises(ValidationError):
            Schedule(
                schedule_id="bad",
                stages=(
                    StageSpec(stage_index=2, subset=DatasetSubsetId.D1),
                    StageSpec(stage_index=1, subset=DatasetSubsetId.D2),
                ),
            )


def ids(prefix, n):
    return [f"{prefix}{i:04d}" for i in range(n)]


class TestMakeTargetSplit:
    def test_ten_percent_of_thousand(self):
        split = make_target_split({DatasetSubsetId.D1: ids("a", 1000)}, SplitSpec(seed=13))
        assert len(split.test_by_subset[DatasetSubsetId.D1]) == 100
        assert len(split.train_ids[DatasetSubsetId.D1]) == 900

    def test_d2_contributes_nothing(self):
        split = make_target_split(
            {DatasetSubsetId.D1: ids("a", 100), DatasetSubsetId.D2: ids("b", 100)},
            SplitSpec(seed=13),
        )
        assert split.test_by_subset[DatasetSubsetId.D2] == ()
        assert len(split.train_ids[DatasetSubsetId.D2]) == 100

    def test_same_seed_identical(self):
        datasets = {DatasetSubsetId.D1: ids("a", 200), DatasetSubsetId.D3: ids("c", 60)}
        first = make_target_split(datasets, SplitSpec(seed=42))
        second = make_target_split(datasets, SplitSpec(seed=42))
        assert first == second

    def test_different_seed_differs(self):
        datasets = {DatasetSubsetId.D1: ids("a", 200)}
        assert make_target_split(datasets, SplitSpec(seed=1)) != make_target_split(
            datasets, SplitSpec(seed=2)
        )

    def test_train_test_disjoint_and_complete(self):
        datasets = {DatasetSubsetId.D1: ids("a", 137), DatasetSubsetId.D4: ids("d", 83)}
        split = make_target_split(datasets, SplitSpec(seed=7))
        for subset, all_ids in datasets.items():
            train = set(split.train_ids[subset])
            test = set(split.test_by_subset[subset])
            assert train & test == set()
            assert train | test == set(all_ids)

    def test_small_subset_holds_out_at_least_one(self):
        split = make_target_split({DatasetSubsetId.D3: ids("c", 4)}, SplitSpec(seed=5))
        assert len(split.test_by_subset[DatasetSubsetId.D3]) == 1

    def test_empty_subset_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            make_target_split({DatasetSubsetId.D1: []}, SplitSpec(seed=1))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            make_target_split({DatasetSubsetId.D1: ["x", "x"]}, SplitSpec(seed=1))

    def test_fraction_bounds_validated(self):
        with pytest.raises(ValidationError):
            SplitSpec(seed=1, fractions={DatasetSubsetId.D1: 1.5})


class TestMakeFolds:
    def test_canonical_protocol(self):
        folds = make_folds(ids("l", 1000), seed=13)
        assert len(folds.pool) == 500
        assert len(folds.reserved_test) == 500
        assert len(folds.folds) == 10
        assert all(len(f) == 50 for f in folds.folds)
        assert folds.train_size == 450
        assert len(folds.train_ids(0)) == 450

    def test_folds_partition_the_pool(self):
        folds = make_folds(ids("l", 1000), seed=13)
        seen: set[str] = set()
        for fold in folds.folds:
            assert seen.isdisjoint(fold)
            seen.update(fold)
        assert seen == set(folds.pool)

    def test_pool_and_reserved_disjoint(self):
        folds = make_folds(ids("l", 1000), seed=13)
        assert set(folds.pool).isdisjoint(folds.reserved_test)
        assert set(folds.pool) | set(folds.reserved_test) == set(ids("l", 1000))

    def test_same_seed_identical(self):
        assert make_folds(ids("l", 1000), seed=9) == make_folds(ids("l", 1000), seed=9)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            make_folds(["x"] * 30, seed=1)

    def test_smaller_input_scales(self):
        folds = make_folds(ids("l", 100), seed=3)
        assert len(folds.pool) == 50
        assert sum(len(f) for f in folds.folds) == 50
        assert len(folds.reserved_test) == 50


def make_pairs(subset, n):
    pairs = []
    for i in range(n):
        context = f"Sentence number {i} about outcomes. Another line of text."
        pairs.append(
            QAPair(
                id=f"{subset.value}-{i:04d}",
                question=f"Does item {i} improve outcomes?",
                context=context,
                answer_text=f"Sentence number {i} about outcomes.",
                answer_start=0,
                subset=subset,
                provenance=Provenance.BM25_WEAK,
            )
        )
    return pairs


def make_yesno(subset, n):
    return [
        YesNoInstance(
            id=f"{subset.value}-{i:04d}",
            question="Do outcomes with dacryoadenitis improve?",
            context="Patients improved. Some symptoms persisted.",
            label="yes" if i % 2 else "no",
        )
        for i in range(n)
    ]


@pytest.fixture(scope="module")
def materialized():
    return {
        DatasetSubsetId.D1: make_pairs(DatasetSubsetId.D1, 40),
        DatasetSubsetId.D2: make_pairs(DatasetSubsetId.D2, 50),
        DatasetSubsetId.D3: make_pairs(DatasetSubsetId.D3, 20),
        DatasetSubsetId.D4: make_pairs(DatasetSubsetId.D4, 30),
        DatasetSubsetId.PQA_L: make_yesno(DatasetSubsetId.PQA_L, 40),
        DatasetSubsetId.PQA_A: make_yesno(DatasetSubsetId.PQA_A, 60),
    }


class TestEmitSchedule:
    def _emit(self, schedule_id, materialized, out_dir, folds=None):
        split = make_target_split(
            {s: [i.id for i in materialized[s]] for s in
             (DatasetSubsetId.D1, DatasetSubsetId.D3, DatasetSubsetId.D4)},
            SplitSpec(seed=13),
        )
        return emit_schedule(
            get_schedule(schedule_id),
            materialized,
            split,
            out_dir,
            folds=folds,
            lems=default_lemma_lexicon(),
            morphs=default_morpheme_lexicon(),
            provenance={"seed": 13},
        ), split

    def test_schedule_4_stage_files_disjoint_from_test_pool(self, materialized, tmp_path):
        manifest_path, split = self._emit("4", materialized, tmp_path / "4")
        manifest = json.loads(manifest_path.read_text())
        assert [s["subset"] for s in manifest["stages"]] == ["d2", "d1", "d3", "d4"]
        test_ids = split.test_ids
        for stage in manifest["stages"]:
            data = json.loads((tmp_path / "4" / stage["dataset_path"]).read_text())
            stage_ids = {
                qa["id"]
                for article in data["data"]
                for para in article["paragraphs"]
                for qa in para["qas"]
            }
            assert stage_ids.isdisjoint(test_ids)
            assert len(stage_ids) == stage["n_instances"]

    def test_baseline_untransformed(self, materialized, tmp_path):
        manifest_path, _ = self._emit("baseline", materialized, tmp_path / "baseline")
        manifest = json.loads(manifest_path.read_text())
        assert [s["transform_chain"] for s in manifest["stages"]] == [None, None]
        stage2 = (tmp_path / "baseline" / manifest["stages"][1]["dataset_path"]).read_text()
        assert "Patients improved." in stage2

    def test_augmentation_schedule_appends_copies(self, materialized, tmp_path):
        manifest_path, _ = self._emit("III", materialized, tmp_path / "III")
        manifest = json.loads(manifest_path.read_text())
        stage2 = manifest["stages"][1]
        lines = (tmp_path / "III" / stage2["dataset_path"]).read_text().splitlines()
        assert any("#aug1" in line for line in lines)
        base = [json.loads(l)["id"] for l in lines if "#aug" not in json.loads(l)["id"]]
        assert stage2["n_instances"] == len(lines)
        assert len(lines) > len(base)

    def test_fold_pool_restricts_pqa_l_stage(self, materialized, tmp_path):
        fold_ids = [i.id for i in materialized[DatasetSubsetId.PQA_L]]
        folds = make_folds(fold_ids, seed=13)
        manifest_path, split = self._emit("baseline", materialized, tmp_path / "bf", folds=folds)
        manifest = json.loads(manifest_path.read_text())
        lines = (tmp_path / "bf" / manifest["stages"][1]["dataset_path"]).read_text().splitlines()
        stage_ids = {json.loads(line)["id"] for line in lines}
        assert stage_ids.issubset(set(folds.pool))
        assert stage_ids.isdisjoint(folds.reserved_test)
        assert manifest["folds"]["n_folds"] == 10

    def test_missing_dataset_names_subset(self, materialized, tmp_path):
        datasets = dict(materialized)
        del datasets[DatasetSubsetId.D3]
        with pytest.raises(ValidationError, match="d3"):
            emit_schedule(get_schedule("3"), datasets, None, tmp_path / "x")

    def test_rerun_is_byte_identical(self, materialized, tmp_path):
        first, _ = self._emit("XII", materialized, tmp_path / "XII")
        hashes_before = {
            p.name: file_sha256(p) for p in sorted((tmp_path / "XII").iterdir())
        }
        second, _ = self._emit("XII", materialized, tmp_path / "XII")
        hashes_after = {
            p.name: file_sha256(p) for p in sorted((tmp_path / "XII").iterdir())
        }
        assert hashes_before == hashes_after
