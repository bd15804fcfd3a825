import numpy as np
import pytest

from conftest import make_instance
from loadcast.pipeline import GenerationJob, generate_dataset
from loadcast.sampling import Protocol, SamplingPlan, data_class
from loadcast.solver import solve_lpp
from loadcast.storage import (
    DataFormatError,
    dataset_bytes,
    load_instance,
    read_dataset,
    read_dataset_csv,
    save_instance,
    save_solution,
    write_dataset,
    write_dataset_csv,
)
from loadcast.summarize import OBEFML, OTHRML


@pytest.fixture(scope="module")
def small_dataset(fleet):
    plan = SamplingPlan(Protocol.TWO_STAGE, data_class("A'"), 42, second_stage_draws=3)
    return generate_dataset(GenerationJob(plan, 12, OBEFML, fleet))


def same(a, b):
    return (
        [e.sketch for e in a.examples] == [e.sketch for e in b.examples]
        and [e.target for e in a.examples] == [e.target for e in b.examples]
        and np.array_equal(a.split, b.split)
    )


class TestBinary:
    def test_round_trip(self, small_dataset, tmp_path):
        p = tmp_path / "d.lcds"
        write_dataset(small_dataset, p)
        back = read_dataset(p)
        assert same(back, small_dataset)
        assert back.provenance["plan"]["k"] == 3
        assert dataset_bytes(back) == p.read_bytes()

    def test_bytes_deterministic(self, small_dataset, fleet):
        plan = SamplingPlan(Protocol.TWO_STAGE, data_class("A'"), 42, second_stage_draws=3)
        again = generate_dataset(GenerationJob(plan, 12, OBEFML, fleet))
        assert dataset_bytes(again) == dataset_bytes(small_dataset)

    def test_one_stage_keeps_weights(self, fleet, tmp_path):
        plan = SamplingPlan(Protocol.ONE_STAGE, data_class("A'"), 5)
        ds = generate_dataset(GenerationJob(plan, 6, OTHRML, fleet))
        write_dataset(ds, tmp_path / "d.lcds")
        back = read_dataset(tmp_path / "d.lcds")
        assert same(back, ds)

    @pytest.mark.parametrize("mutate", [lambda b: b"XXXX" + b[4:], lambda b: b[:-3], lambda b: b + b"\0", lambda b: b[:6]])
    def test_corrupt(self, small_dataset, tmp_path, mutate):
        p = tmp_path / "d.lcds"
        p.write_bytes(mutate(dataset_bytes(small_dataset)))
        with pytest.raises(DataFormatError):
            read_dataset(p)


class TestCsv:
    def test_round_trip(self, small_dataset, tmp_path):
        p = tmp_path / "d.csv"
        write_dataset_csv(small_dataset, p)
        assert same(read_dataset_csv(p), small_dataset)

    @pytest.mark.parametrize(
        "text",
        ["a,b\n1,2\n", None],
    )
    def test_bad_files(self, small_dataset, tmp_path, text):
        p = tmp_path / "d.csv"
        if text is None:
            write_dataset_csv(small_dataset, p)
            lines = p.read_text().splitlines()
            lines[1] = lines[1].rsplit(",", 1)[0]
            text = "\n".join(lines) + "\n"
        p.write_text(text)
        with pytest.raises(DataFormatError):
            read_dataset_csv(p)

    def test_non_integer(self, small_dataset, tmp_path):
        p = tmp_path / "d.csv"
        write_dataset_csv(small_dataset, p)
        lines = p.read_text().splitlines()
        lines[2] = "x" + lines[2][1:]
        p.write_text("\n".join(lines))
        with pytest.raises(DataFormatError, match=":3:"):
            read_dataset_csv(p)


class TestInstances:
    def test_round_trip(self, fleet, tmp_path):
        inst = make_instance({3: 1, 5: 2}, w40=[8000.5, 9000.0], w53=[12000.25])
        save_instance(inst, tmp_path / "i.json")
        back = load_instance(tmp_path / "i.json")
        assert back.sketch == inst.sketch
        assert np.array_equal(back.weights[0], inst.weights[0])
        assert np.array_equal(back.weights[1], inst.weights[1])
        save_solution(solve_lpp(back, fleet), tmp_path / "s.json")
        assert (tmp_path / "s.json").read_text().startswith("{")

    @pytest.mark.parametrize("text", ["{", '{"sketch": {}}', '{"sketch": {"railcars": [1], "containers": [0, 0]}, "weights": {}}'])
    def test_invalid(self, tmp_path, text):
        p = tmp_path / "i.json"
        p.write_text(text)
        with pytest.raises(DataFormatError):
            load_instance(p)
