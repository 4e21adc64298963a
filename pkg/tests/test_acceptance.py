"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they execute. The desk-scale experiment tests share one synthetic
dataset (8 informative features buried in 56 noise features) and drive the
full harness end to end.
"""

import json
import math

import numpy as np
import pytest
from mpmath import mp, mpf
from sklearn.datasets import make_classification

from conftest import make_separable
from evoprune import (
    Chromosome,
    DecaySchedule,
    FeatureDataset,
    GAConfig,
    HeadArchitecture,
    Population,
    RunConfig,
    SparseMask,
    TrainConfig,
    hamming,
    run,
    run_experiment,
    save_dataset,
    sparsity_at,
    train,
)
from evoprune.cli import main as cli_main
from evoprune.ga import FitnessRecord, crossover_uniform, mutate, replace, select_nam, sort_key
from evoprune.network import loss_and_gradients


def report(name: str, ok: bool, detail: str) -> None:
    # write past pytest's capture so the line shows up even without -s
    import sys
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, file=sys.__stdout__)
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# schedule correctness
# ---------------------------------------------------------------------------

class TestScheduleCorrectness:
    def test_schedule_matches_arithmetic_oracle(self):
        mp.dps = 50

        def oracle(s_i, s_f, k_i, k_f, alpha, k):
            t = (mpf(k) - k_i) / (mpf(k_f) - k_i)
            return float(mpf(s_f) + (mpf(s_i) - mpf(s_f)) * (1 - t) ** mpf(alpha))

        rng = np.random.default_rng(101)
        worst = 0.0
        boundaries_exact = True
        for _ in range(1000):
            s_i = float(rng.uniform(0.0, 0.6))
            s_f = float(rng.uniform(s_i, 0.99))
            k_i = int(rng.integers(0, 100))
            k_f = k_i + int(rng.integers(2, 10_000))
            alpha = float(rng.uniform(0.2, 6.0))
            sched = DecaySchedule(s_i, s_f, k_i, k_f, 7, alpha, 3)
            boundaries_exact &= sparsity_at(sched, k_i) == s_i
            boundaries_exact &= sparsity_at(sched, k_f) == s_f
            k = int(rng.integers(k_i + 1, k_f))
            err = abs(sparsity_at(sched, k) - oracle(s_i, s_f, k_i, k_f, alpha, k))
            worst = max(worst, err)
        report("schedule-correctness", worst <= 1e-12 and boundaries_exact,
               f"max abs error {worst:.3e} over 1000 schedules, boundaries exact: {boundaries_exact}")


# ---------------------------------------------------------------------------
# GA oracle equivalence
# ---------------------------------------------------------------------------

class TestGaOracleEquivalence:
    def test_weighted_onemax_matches_exhaustive_optimum(self):
        rng = np.random.default_rng(2024)
        weights = rng.uniform(0.1, 1.0, size=12)
        total = weights.sum()

        def fitness(chrom, seed):
            return float((weights * chrom.genes).sum() / total)

        # independent oracle: enumerate all 2^12 gene vectors
        bits = (np.arange(4096)[:, None] >> np.arange(12)) & 1
        optimum = float((bits @ weights).max() / total)

        hits = 0
        for seed in range(50):
            cfg = GAConfig(population_size=30, max_evals=4096, seed=seed)
            best, _ = run(cfg, 12, fitness)
            hits += abs(best.fitness - optimum) < 1e-12
        report("ga-oracle-equivalence", hits >= 45, f"{hits}/50 seeded runs hit the optimum")


# ---------------------------------------------------------------------------
# budget audit
# ---------------------------------------------------------------------------

class TestBudgetAudit:
    def test_exact_budget_and_monotone_running_best(self):
        def fitness(chrom, seed):
            return float(chrom.genes.sum()) / len(chrom)

        ok = True
        for budget in (200, 300):
            for seed in range(20):
                cfg = GAConfig(population_size=30, max_evals=budget, seed=seed)
                best, history = run(cfg, 64, fitness)
                ok &= len(history) == budget
                ok &= [r.eval_index for r in history] == list(range(budget))
                running = history[0]
                for record in history[1:]:
                    candidate = max(running, record, key=sort_key)
                    ok &= sort_key(candidate) >= sort_key(running)
                    running = candidate
                ok &= sort_key(best) == sort_key(running)
        report("budget-audit", ok, "|history| == budget and running best monotone, 20 seeds x {200, 300}")


# ---------------------------------------------------------------------------
# operator laws
# ---------------------------------------------------------------------------

def _random_chrom(rng, length):
    return Chromosome(rng.integers(0, 2, size=length).astype(np.uint8))


class TestOperatorLaws:
    CASES = 10_000

    def test_crossover_multiset_preservation(self):
        rng = np.random.default_rng(11)
        for _ in range(self.CASES):
            length = int(rng.integers(1, 48))
            p, q = _random_chrom(rng, length), _random_chrom(rng, length)
            c1, c2 = crossover_uniform(p, q, rng)
            children = np.sort(np.stack([c1.genes, c2.genes]), axis=0)
            parents = np.sort(np.stack([p.genes, q.genes]), axis=0)
            assert np.array_equal(children, parents)
        report("operator-law-crossover", True,
               f"positionwise multisets preserved over {self.CASES} cases")

    def test_mutate_single_flip_law(self):
        rng = np.random.default_rng(12)
        for i in range(self.CASES):
            length = int(rng.integers(1, 48))
            c = _random_chrom(rng, length)
            p_mut = (0.0, 1.0, float(rng.random()))[i % 3]
            flipped = int(np.count_nonzero(mutate(c, p_mut, rng).genes != c.genes))
            if p_mut == 0.0:
                assert flipped == 0
            elif p_mut == 1.0:
                assert flipped == 1
            else:
                assert flipped in (0, 1)
        report("operator-law-mutate", True,
               f"at most one flip, boundary rates exact, over {self.CASES} cases")

    def test_nam_max_distance_law(self):
        rng = np.random.default_rng(13)
        for case in range(self.CASES):
            size = int(rng.integers(2, 9))
            length = int(rng.integers(2, 24))
            records = [FitnessRecord(_random_chrom(rng, length), float(rng.random()),
                                     0, i, 0) for i in range(size)]
            pop = Population(records)
            seed = int(rng.integers(2 ** 32))
            draw_rng = np.random.default_rng(seed)
            replay = np.random.default_rng(seed)
            expected_p1 = pop.records[int(replay.integers(size))]
            expected_p2, best_d = None, -1
            for _ in range(3):
                cand = pop.records[int(replay.integers(size))]
                d = hamming(expected_p1.chromosome, cand.chromosome)
                if d > best_d:
                    best_d, expected_p2 = d, cand
            p1, p2 = select_nam(pop, draw_rng, nam_candidates=3)
            assert p1 is expected_p1 and p2 is expected_p2
        report("operator-law-nam", True,
               f"second parent maximizes Hamming distance, first drawn wins ties, {self.CASES} cases")

    def test_replacement_best_two_law(self):
        rng = np.random.default_rng(14)
        for _ in range(self.CASES):
            records = [FitnessRecord(_random_chrom(rng, 8), float(rng.integers(0, 5)) / 4,
                                     int(rng.integers(0, 9)), i, 0) for i in range(6)]
            pop = Population(records[:4])
            offspring = records[4:]
            out = replace(pop, offspring)
            contenders = sorted(list(pop.records[:2]) + offspring, key=sort_key)
            expected = sorted(contenders[-2:] + list(pop.records[2:]), key=sort_key)
            assert [sort_key(r) for r in out.records] == [sort_key(r) for r in expected]
            assert len(out) == 4
        report("operator-law-replacement", True,
               f"best two of {{worst two, children}} occupy the worst slots, {self.CASES} cases")


# ---------------------------------------------------------------------------
# mask preservation and gradient check
# ---------------------------------------------------------------------------

class TestMaskPreservation:
    def _toy_data(self, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(120, 16)).astype(np.float32)
        y = rng.integers(0, 3, size=120)
        y[:3] = [0, 1, 2]
        return FeatureDataset(X, y, 3, "toy16")

    def _random_mask(self, arch, rng):
        layers = [(rng.random(dims) < 0.6).astype(float) for dims in arch.layer_dims]
        layers[-1] = np.ones(arch.layer_dims[-1])
        return SparseMask(tuple(layers))

    @pytest.mark.parametrize("hidden", [(8,), (8, 8)])
    def test_full_training_keeps_masked_weights_zero(self, hidden):
        data = self._toy_data()
        arch = HeadArchitecture(hidden, 16, 3)
        rng = np.random.default_rng(42)
        mask = self._random_mask(arch, rng)
        cfg = TrainConfig(learning_rate=0.05, batch_size=32, max_epochs=600,
                          patience=10, seed=7)
        head = train(arch, mask, data, cfg)
        exact = all(np.array_equal(W * M, W) for W, M in zip(head.weights, mask.layers))

        # gradient check at the trained parameters
        X = data.features.astype(np.float64)[:32]
        y = data.labels[:32]
        weights = [w.copy() for w in head.weights]
        biases = [b.copy() for b in head.biases]
        _, grad_w, _ = loss_and_gradients(weights, biases, mask, X, y)

        def loss_at(ws):
            ws = [w * m for w, m in zip(ws, mask.layers)]
            value, _, _ = loss_and_gradients(ws, biases, mask, X, y)
            return value

        h = 1e-6
        max_rel = 0.0
        for layer in range(len(weights)):
            it = np.nditer(weights[layer], flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                plus = [w.copy() for w in weights]
                minus = [w.copy() for w in weights]
                plus[layer][idx] += h
                minus[layer][idx] -= h
                fd = (loss_at(plus) - loss_at(minus)) / (2 * h)
                analytic = grad_w[layer][idx]
                rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
                max_rel = max(max_rel, rel)
        report(f"mask-preservation-{'x'.join(map(str, hidden))}",
               exact and max_rel <= 1e-4,
               f"masked weights exact zeros: {exact}, max relative gradient error {max_rel:.2e}, "
               f"epochs {head.epochs_run}")


# ---------------------------------------------------------------------------
# desk-scale research-question analogues (shared synthetic dataset)
# ---------------------------------------------------------------------------

SIGNAL_FEATURES = 8
NOISE_FEATURES = 56


def _synthetic_split():
    X, y = make_classification(
        n_samples=900, n_features=SIGNAL_FEATURES + NOISE_FEATURES,
        n_informative=SIGNAL_FEATURES, n_redundant=0, n_repeated=0,
        n_classes=3, n_clusters_per_class=2, class_sep=1.0, flip_y=0.05,
        shuffle=False, random_state=7)
    perm = np.random.default_rng(0).permutation(900)
    X, y = X[perm], y[perm]
    train_ds = FeatureDataset(X[:600].astype(np.float32), y[:600], 3, "synth")
    test_ds = FeatureDataset(X[600:].astype(np.float32), y[600:], 3, "synth-test")
    return train_ds, test_ds


@pytest.fixture(scope="module")
def desk_scale_runs(tmp_path_factory):
    """FS-mode search, dense reference, and matched baselines over 5 seeds."""
    root = tmp_path_factory.mktemp("desk_scale")
    train_ds, test_ds = _synthetic_split()
    train_path = root / "synth_train.eptl"
    test_path = root / "synth_test.eptl"
    save_dataset(train_ds, train_path)
    save_dataset(test_ds, test_path)

    common = dict(
        dataset=str(train_path), test_dataset=str(test_path),
        hidden_sizes=(32,), n_runs=5, seed=0,
        learning_rate=0.1, batch_size=32, max_epochs=30, patience=5,
        population_size=30, max_evals=200,
    )
    fs = run_experiment(RunConfig(mode="evolve-fs", out_dir=str(root / "fs"), **common))
    dense = run_experiment(RunConfig(mode="reference-dense", out_dir=str(root / "dense"), **common))
    ga_report = str(root / "fs" / "report.json")
    weight = run_experiment(RunConfig(mode="baseline-weight", out_dir=str(root / "weight"),
                                      reference_report=ga_report, **common))
    neuron = run_experiment(RunConfig(mode="baseline-neuron", out_dir=str(root / "neuron"),
                                      reference_report=ga_report, **common))
    return {"fs": fs, "dense": dense, "weight": weight, "neuron": neuron}


class TestDeskScaleRQ1:
    def test_fs_search_beats_dense_reference_with_fewer_features(self, desk_scale_runs):
        fs = desk_scale_runs["fs"]
        dense = desk_scale_runs["dense"]
        ok = (fs.mean_accuracy >= dense.mean_accuracy
              and fs.mean_active_fraction <= 0.75)
        report("desk-scale-rq1", ok,
               f"feature-selection mean acc {fs.mean_accuracy:.3f} vs dense "
               f"{dense.mean_accuracy:.3f}; mean active {fs.mean_active_fraction:.2f} <= 0.75")


class TestDeskScaleRQ3:
    def test_search_matches_or_beats_magnitude_baselines(self, desk_scale_runs):
        fs = desk_scale_runs["fs"]
        weight = desk_scale_runs["weight"]
        neuron = desk_scale_runs["neuron"]
        ok = (fs.mean_accuracy >= weight.mean_accuracy - 0.01
              and fs.mean_accuracy >= neuron.mean_accuracy - 0.01)
        report("desk-scale-rq3", ok,
               f"search {fs.mean_accuracy:.3f} vs weight {weight.mean_accuracy:.3f} "
               f"and neuron {neuron.mean_accuracy:.3f} at matched sparsity")

    def test_baselines_ran_at_matched_sparsity(self, desk_scale_runs):
        fs = desk_scale_runs["fs"]
        weight = desk_scale_runs["weight"]
        # matched within one-weight rounding of the layer-1 pool
        pool = 64 * 32
        assert abs(weight.mean_active_fraction - fs.mean_active_fraction) <= 1.0 / pool + 1e-9


# ---------------------------------------------------------------------------
# determinism of the CLI surface
# ---------------------------------------------------------------------------

class TestDeterminism:
    def test_evolve_cli_byte_identical(self, tmp_path):
        train = make_separable(n=48, d=6, seed=0)
        test = make_separable(n=24, d=6, seed=1)
        save_dataset(train, tmp_path / "train.eptl")
        save_dataset(test, tmp_path / "test.eptl")
        cfg = {
            "dataset": str(tmp_path / "train.eptl"),
            "test_dataset": str(tmp_path / "test.eptl"),
            "mode": "evolve-neurons-L1",
            "out_dir": str(tmp_path / "out"),
            "hidden_sizes": [6],
            "n_runs": 2,
            "population_size": 6,
            "max_evals": 20,
            "learning_rate": 0.1,
            "batch_size": 16,
            "max_epochs": 10,
            "patience": 5,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(cfg))

        assert cli_main(["evolve", "--config", str(cfg_path)]) == 0
        names = ("report.csv", "report.json", "evals_run0.log", "evals_run1.log")
        first = {n: (tmp_path / "out" / n).read_bytes() for n in names}
        assert cli_main(["evolve", "--config", str(cfg_path)]) == 0
        identical = all((tmp_path / "out" / n).read_bytes() == first[n] for n in names)
        report("determinism", identical,
               "two executions produced byte-identical logs and CSV reports")
